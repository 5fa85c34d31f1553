use std::path::Path;
use std::process::{Command, Output};

fn detexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detexp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Parses a CSV table into its header and rows of fields.
fn table(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv
        .lines()
        .map(|l| l.split(',').map(String::from).collect::<Vec<_>>());
    let header = lines.next().expect("header");
    (header, lines.collect())
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let j = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

#[test]
fn exponent_sweep_columns() {
    let (header, rows) = table(&stdout(&detexp(&["exponent"])));
    assert_eq!(rows.len(), 20);
    let opt0 = column(&header, &rows, "optimal_E0");
    let opt1 = column(&header, &rows, "optimal_E1");
    for (a, b) in opt0.iter().zip(&opt1) {
        assert!((a - b).abs() < 1e-6);
    }
    let first: Vec<f64> = [
        "optimal_E0",
        "optimal_E1",
        "simple_quadratic_E0",
        "simple_quadratic_E1",
    ]
    .iter()
    .map(|c| column(&header, &rows, c)[0])
    .collect();
    assert!(
        first.iter().all(|x| (x - first[0]).abs() < 1e-9),
        "{first:?}"
    );
}

#[test]
fn exponent_triangular_drops_after_white() {
    let (header, rows) = table(&stdout(&detexp(&["exponent", "--spectrum", "triangular"])));
    assert_eq!(rows.len(), 10);
    for col in [
        "optimal_E0",
        "optimal_E1",
        "simple_quadratic_E0",
        "simple_quadratic_E1",
    ] {
        let e = column(&header, &rows, col);
        // E₀ of the simple quadratic detector does not depend on the signal spectrum.
        if col == "simple_quadratic_E0" {
            assert!((e[1] - e[0]).abs() < 1e-9);
        } else {
            assert!(e[1] < e[0], "{col}: {e:?}");
        }
    }
}

#[test]
fn are_sweep_layout_and_order() {
    let csv = stdout(&detexp(&[
        "are-sweep",
        "--param",
        "0,0.5",
        "--snr-db",
        "0,10",
    ]));
    let (header, rows) = table(&csv);
    assert_eq!(
        header.join(","),
        "param,snr_db,E_detector1,E_detector2,ARE,feasible1,feasible2"
    );
    let cells: Vec<(String, String)> = rows.iter().map(|r| (r[1].clone(), r[0].clone())).collect();
    let expect = [("0", "0"), ("0", "0.5"), ("10", "0"), ("10", "0.5")];
    assert_eq!(cells, expect.map(|(s, p)| (s.to_string(), p.to_string())));
    let are = column(&header, &rows, "ARE");
    assert!((are[0] - 1.0).abs() < 1e-6 && (are[2] - 1.0).abs() < 1e-6);
    // 12 significant digits.
    assert_eq!(rows[1][2].trim_start_matches("0.").len(), 12);
}

#[test]
fn prop1_check_sets_the_exit_status() {
    let out = detexp(&["are-sweep", "--param", "0.5", "--prop1-check"]);
    let (_, rows) = table(&stdout(&out));
    assert_eq!(rows.last().unwrap()[1], "40");
    let out = detexp(&[
        "are-sweep",
        "--param",
        "0.999",
        "--snr-db",
        "0",
        "--prop1-check",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(!out.stdout.is_empty());
}

#[test]
fn banded_optimize_embeds_simple_quadratic() {
    let out = detexp(&[
        "banded-optimize",
        "--param",
        "0,0.5",
        "--snr-db",
        "10",
        "--m",
        "0,1",
    ]);
    let (header, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 4);
    assert_eq!(header[3..6].join(","), "b0,b1,E0");
    let are = column(&header, &rows, "ARE");
    let are_sq = column(&header, &rows, "ARE_simple_quadratic");
    // White signal: m = 0 is the simple quadratic detector.
    assert!((are[0] - are_sq[0]).abs() < 1e-6, "{are:?} {are_sq:?}");
    // Correlated signal: the m = 0 family contains a detector with the same
    // decisions as the simple quadratic one, and m = 1 contains m = 0.
    assert!(are[2] >= are_sq[2] - 1e-9, "{are:?} {are_sq:?}");
    assert!(are[1] >= are[0] - 1e-12 && are[3] >= are[2] - 1e-12);
    assert!(are[3] >= 0.95);
    assert_eq!(rows[0][4], "0");
    assert!(rows.iter().all(|r| r.last().unwrap() == "ok"));
}

#[test]
fn banded_optimize_flags_empty_feasible_sets() {
    let out = detexp(&[
        "banded-optimize",
        "--param",
        "0.5",
        "--snr-db",
        "10",
        "--m",
        "0",
        "--b0-lo",
        "1e5",
        "--b0-hi",
        "1e6",
        "--grid-steps",
        "5",
        "--seed-simple-quadratic",
        "false",
    ]);
    let (_, rows) = table(&stdout(&out));
    assert_eq!(rows[0].last().unwrap(), "no_feasible_cell");
}

#[test]
fn simulate_is_byte_stable_and_reports_the_exponent() {
    let args = [
        "simulate", "--n", "16,32", "--trials", "2000", "--seed", "7", "--snr-db", "0",
    ];
    let a = stdout(&detexp(&args));
    assert_eq!(a, stdout(&detexp(&args)));
    let (header, rows) = table(&a);
    assert_eq!(rows.len(), 4);
    let e = column(&header, &rows, "analytic_e");
    assert!((e[0] - 0.026467552673).abs() < 1e-9);
    assert!((e[2] - 0.0316402775404).abs() < 1e-9);
    let slope = column(&header, &rows, "slope");
    let ratio = column(&header, &rows, "slope_ratio");
    assert!((ratio[0] - slope[0] / e[0]).abs() < 1e-9);
}

#[test]
fn simulate_without_signal_has_zero_exponent() {
    let out = detexp(&[
        "simulate",
        "--snr-db=-inf",
        "--n",
        "16",
        "--trials",
        "1000",
        "--detector",
        "optimal",
    ]);
    let (header, rows) = table(&stdout(&out));
    let j = header.iter().position(|h| h == "analytic_e").unwrap();
    assert_eq!(rows[0][j], "0");
    assert_eq!(rows[0][j + 1], "false");
}

#[test]
fn config_round_trips_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(
        &path,
        "command = exponent\nspectrum = triangular\nparam = 2\nparam = 3\nsnr_db = 0\n",
    )
    .unwrap();
    let cfg = path.to_str().unwrap();
    let resolved = stdout(&detexp(&[
        "--config",
        cfg,
        "--print-config",
        "--snr-db",
        "20",
    ]));
    assert!(resolved.contains("snr_db = 20\n") && !resolved.contains("snr_db = 0\n"));
    assert!(resolved.contains("param = 2\nparam = 3\n"));
    std::fs::write(&path, &resolved).unwrap();
    assert_eq!(
        stdout(&detexp(&["--config", cfg, "--print-config"])),
        resolved
    );
    let (_, rows) = table(&stdout(&detexp(&["--config", cfg])));
    assert_eq!(rows.len(), 2);
}

#[test]
fn config_errors_name_the_key_and_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    let csv = dir.path().join("out.csv");
    std::fs::write(&cfg, "command = exponent\nsnr_db = 10\nthreshold = 0\n").unwrap();
    let out = detexp(&[
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("threshold"));
    for (flag, value, key) in [
        ("--param", "1.2", "param"),
        ("--trials", "many", "trials"),
        ("--detector", "ideal", "detector"),
    ] {
        let out = detexp(&["simulate", flag, value, "--output", csv.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2));
        assert!(stderr(&out).contains(key), "{}", stderr(&out));
    }
    let out = detexp(&[
        "simulate",
        "--trials",
        "10",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    assert!(!Path::new(&csv).exists());
}

#[test]
fn output_file_matches_standard_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let args = ["exponent", "--param", "0.3"];
    let printed = stdout(&detexp(&args));
    let out = detexp(&[&args[..], &["--output", csv.to_str().unwrap()]].concat());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), printed);
}

#[test]
fn command_must_agree_with_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "command = simulate\n").unwrap();
    let out = detexp(&["exponent", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("command"));
    let out = detexp(&[]);
    assert_eq!(out.status.code(), Some(2));
}
