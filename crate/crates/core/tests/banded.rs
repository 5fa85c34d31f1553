mod common;

use detexp::banded_opt::TIE_TOLERANCE;
use detexp::*;
use proptest::prelude::*;

fn noise(snr_db: f64) -> NoiseModel {
    NoiseModel::from_snr_db(snr_db, 1.0).unwrap()
}

fn gm(a: f64) -> Spectrum {
    Spectrum::gauss_markov(a).unwrap()
}

/// Coarse grid shared across bandwidths so searches stay fast.
fn coarse_config(
    m: usize,
    noise: NoiseModel,
    spectrum: Spectrum,
    steps: usize,
) -> BandedSearchConfig {
    let mut ranges = vec![CoefficientRange::new(0.01, 2.0, steps).unwrap()];
    ranges.extend((0..m).map(|_| CoefficientRange::new(-1.0, 1.0, steps).unwrap()));
    BandedSearchConfig {
        m,
        ranges,
        refinement_rounds: 2,
        noise,
        spectrum,
        seed_cells: Vec::new(),
    }
}

fn found(outcome: SearchOutcome) -> BandedResult {
    match outcome {
        SearchOutcome::Found(r) => r,
        SearchOutcome::NoSolution { .. } => panic!("no feasible cell"),
    }
}

#[test]
fn zero_signal_limits_coincide() {
    let n = NoiseModel::new(1.0, 0.0).unwrap();
    let (t0, t1) = limits(&n, &gm(0.5), &[0.7, 0.1]).unwrap();
    assert!((t0 - t1).abs() < 1e-15);
}

#[test]
fn simple_quadratic_coefficient_limits_on_white() {
    let n = noise(10.0);
    let b0 = simple_quadratic_coefficient(&n);
    let (t0, _) = limits(&n, &Spectrum::white(), &[b0]).unwrap();
    let expect = 0.5 * (1.0 / (1.0 + n.snr())).ln() + n.theta2() / (2.0 * (1.0 + n.theta2()));
    assert!((t0 - expect).abs() < 1e-12);
    let pair = cgf_simple_quadratic(&n, &Spectrum::white());
    let h = 1e-6;
    let fd = (pair.lambda0.eval(h) - pair.lambda0.eval(-h)) / (2.0 * h);
    assert!((t0 - fd).abs() < 1e-10);
}

#[test]
fn simple_quadratic_coefficient_is_feasible() {
    for snr in [-10.0, 0.0, 10.0, 20.0, 30.0] {
        let n = noise(snr);
        let b0 = simple_quadratic_coefficient(&n);
        // The banded offset is the exact log-determinant, so this b₀ is the
        // simple quadratic detector only for a white signal.
        assert!(feasible(&n, &Spectrum::white(), &[b0]));
        for s in [Spectrum::white(), gm(0.5), gm(0.9)] {
            assert!(exponents(&DetectorModel::simple_quadratic(n, s)).unwrap().e > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn extreme_scalings_are_infeasible(
        a in 0.0..0.95f64,
        snr in -10.0..30.0f64,
        b0 in 0.05..2.0f64,
        r in -0.45..0.45f64,
    ) {
        let n = noise(snr);
        let s = gm(a);
        let b = [b0, r * b0];
        let (t0, _) = limits(&n, &s, &b.map(|x| x * 1e6)).unwrap();
        prop_assert!(t0 > 0.0);
        prop_assert!(!feasible(&n, &s, &b.map(|x| x * 1e6)));
        let (_, t1) = limits(&n, &s, &b.map(|x| x * 1e-6)).unwrap();
        prop_assert!(t1 < 0.0);
        prop_assert!(!feasible(&n, &s, &b.map(|x| x * 1e-6)));
    }

    #[test]
    fn zero_padding_leaves_the_report_unchanged(
        a in 0.0..0.95f64,
        b0 in 0.2..1.5f64,
    ) {
        let n = noise(10.0);
        let s = gm(a);
        prop_assume!(feasible(&n, &s, &[b0]));
        let r0 = cell_exponent(&n, &s, &[b0]).unwrap();
        let r1 = cell_exponent(&n, &s, &[b0, 0.0]).unwrap();
        prop_assert!((r0.e - r1.e).abs() < 1e-12);
        prop_assert!((r0.e0 - r1.e0).abs() < 1e-12);
        prop_assert!((r0.e1 - r1.e1).abs() < 1e-12);
    }
}

#[test]
fn m0_cell_reproduces_simple_quadratic_on_white() {
    for snr in [0.0, 10.0, 30.0] {
        let n = noise(snr);
        let r = cell_exponent(&n, &Spectrum::white(), &[simple_quadratic_coefficient(&n)]).unwrap();
        let sq = exponents(&DetectorModel::simple_quadratic(n, Spectrum::white())).unwrap();
        assert!((r.e0 - sq.e0).abs() < 1e-10);
        assert!((r.e1 - sq.e1).abs() < 1e-10);
        assert!((r.e - sq.e).abs() < 1e-10);
    }
}

#[test]
fn m0_cell_matches_simple_quadratic_decisions_on_correlated_signal() {
    // The banded statistic offsets by the exact log-determinant; rescaling b₀
    // by the offset ratio gives the same decision rule as the simple
    // quadratic detector and therefore the same exponent.
    let n = noise(10.0);
    let s = gm(0.5);
    let pair_sq = cgf_simple_quadratic(&n, &s);
    let pair_opt = cgf_optimal(&n, &s);
    let ratio = pair_opt.lambda0.offset() / pair_sq.lambda0.offset();
    let b0 = simple_quadratic_coefficient(&n) * ratio;
    let r = cell_exponent(&n, &s, &[b0]).unwrap();
    let sq = exponents(&DetectorModel::simple_quadratic(n, s)).unwrap();
    assert!((r.e - sq.e).abs() < 1e-8, "{} {}", r.e, sq.e);
}

#[test]
fn cell_exponent_rejects_infeasible_cells() {
    let n = noise(10.0);
    assert!(matches!(
        cell_exponent(&n, &gm(0.5), &[1e-7]),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        cell_exponent(&n, &gm(0.5), &[0.5, 0.3]),
        Err(Error::Contract(_))
    ));
}

#[test]
fn m0_search_beats_simple_quadratic() {
    for a in [0.0, 0.5] {
        let n = noise(10.0);
        let mut cfg = coarse_config(0, n, gm(a), 64);
        cfg.seed_cells.push(vec![simple_quadratic_coefficient(&n)]);
        let r = found(grid_search(&cfg).unwrap());
        let sq = exponents(&DetectorModel::simple_quadratic(n, gm(a))).unwrap();
        assert!(
            r.exponent_report.e >= sq.e - 1e-9,
            "a={a}: {} < {}",
            r.exponent_report.e,
            sq.e
        );
    }
}

#[test]
fn search_results_are_admissible_and_deterministic() {
    let cfg = coarse_config(1, noise(10.0), gm(0.5), 16);
    let r = found(grid_search(&cfg).unwrap());
    assert!(r.exponent_report.feasible);
    assert!(feasible(&cfg.noise, &cfg.spectrum, r.b_star.as_slice()));
    let dense = 1 << 12;
    for k in 0..=dense {
        let w = std::f64::consts::PI * k as f64 / dense as f64;
        assert!(r.b_star.symbol(w) > 0.0);
    }
    assert_eq!(r, found(grid_search(&cfg).unwrap()));
    assert_eq!(r.cells_evaluated, 3 * 256);
    assert!(r.cells_feasible <= r.cells_evaluated);
    let row = r.csv_row();
    assert_eq!(
        row.split(',').count(),
        BandedResult::csv_header(1).split(',').count()
    );
}

#[test]
fn search_bandwidth_is_monotone() {
    let n = noise(10.0);
    let mut best = Vec::new();
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for m in 0..=2 {
        let mut cfg = coarse_config(m, n, gm(0.5), 12);
        cfg.seed_cells = seeds.clone();
        let r = found(grid_search(&cfg).unwrap());
        seeds.push(r.b_star.as_slice().to_vec());
        best.push(r.exponent_report.e);
    }
    assert!(
        best.windows(2).all(|w| w[1] >= w[0] - TIE_TOLERANCE),
        "{best:?}"
    );
}

#[test]
fn doubling_the_optimized_kernel_lowers_the_exponent() {
    let n = noise(10.0);
    let s = gm(0.5);
    let r = found(grid_search(&coarse_config(1, n, s.clone(), 24)).unwrap());
    let doubled = r.b_star.scaled(2.0);
    assert!(feasible(&n, &s, doubled.as_slice()));
    let e2 = cell_exponent(&n, &s, doubled.as_slice()).unwrap().e;
    assert!(e2 < r.exponent_report.e, "{e2} !< {}", r.exponent_report.e);
}

#[test]
fn wide_bandwidth_never_beats_optimal() {
    let n = noise(10.0);
    // A coarser frequency grid keeps the 3⁹-cell search cheap.
    let s = gm(0.5).with_panels(1 << 10).unwrap();
    let opt = exponents(&DetectorModel::optimal(n, s.clone())).unwrap().e;
    // Fourier coefficients of the optimal kernel θ²f/(σ²(σ² + θ²f)).
    let th2 = n.theta2();
    let optimal_kernel: Vec<f64> = (0..=8)
        .map(|l| {
            common::simpson_mean(
                |w| {
                    let f = common::poisson(0.5, w);
                    th2 * f / (1.0 + th2 * f) * (l as f64 * w).cos()
                },
                1 << 12,
            )
        })
        .collect();
    let cfg = BandedSearchConfig {
        m: 8,
        ranges: std::iter::once(CoefficientRange::new(0.01, 2.0, 3).unwrap())
            .chain((0..8).map(|_| CoefficientRange::new(-0.1, 0.1, 3).unwrap()))
            .collect(),
        refinement_rounds: 0,
        noise: n,
        spectrum: s,
        seed_cells: vec![optimal_kernel],
    };
    let r = found(grid_search(&cfg).unwrap());
    assert!(
        r.exponent_report.e <= opt + 1e-9,
        "{} > {opt}",
        r.exponent_report.e
    );
    assert!(r.exponent_report.e > 0.999 * opt);
}

#[test]
fn m1_beats_simple_quadratic_at_low_snr() {
    let n = noise(0.0);
    let r = found(grid_search(&coarse_config(1, n, gm(0.5), 24)).unwrap());
    let sq = exponents(&DetectorModel::simple_quadratic(n, gm(0.5))).unwrap();
    assert!(r.exponent_report.e > sq.e);
}

#[test]
fn empty_feasible_set_is_reported() {
    // Every cell is scaled far past the feasible region.
    let cfg = BandedSearchConfig {
        m: 0,
        ranges: vec![CoefficientRange::new(1e5, 1e6, 5).unwrap()],
        refinement_rounds: 1,
        noise: noise(10.0),
        spectrum: gm(0.5),
        seed_cells: Vec::new(),
    };
    assert_eq!(
        grid_search(&cfg).unwrap(),
        SearchOutcome::NoSolution { cells_evaluated: 5 }
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = coarse_config(1, noise(10.0), gm(0.5), 8);
    cfg.ranges.pop();
    assert!(grid_search(&cfg).is_err());
    let mut cfg = coarse_config(0, noise(10.0), gm(0.5), 8);
    cfg.seed_cells.push(vec![0.5, 0.1]);
    assert!(grid_search(&cfg).is_err());
}
