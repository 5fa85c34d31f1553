//! Uniform midpoint quadrature over one period.
//!
//! Every integrand in this crate is 2π-periodic and symmetric about π
//! (real spectra, cosine symbols). The midpoint nodes
//! `ω_k = (k + ½)·2π/N` are mirrored by `ω ↦ 2π − ω`, so the mean over the
//! first `N/2` nodes equals the mean over all `N`. Only the half grid is
//! stored and evaluated.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default panel count over `[0, 2π)`.
pub const DEFAULT_PANELS: usize = 1 << 14;

/// Midpoint rule with `panels` equal panels over `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    panels: usize,
    nodes: Arc<[f64]>,
}

impl Quadrature {
    pub fn new(panels: usize) -> Result<Self> {
        if panels < 8 || !panels.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "quadrature panel count must be even and at least 8, got {panels}"
            )));
        }
        let step = 2.0 * PI / panels as f64;
        let nodes = (0..panels / 2)
            .map(|k| (k as f64 + 0.5) * step)
            .collect::<Vec<_>>()
            .into();
        Ok(Self { panels, nodes })
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// Midpoint nodes in `(0, π)`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Closed grid `k·π/K`, `k = 0..=K`, with `K = N/2`. Used for suprema,
    /// where the endpoints 0 and π matter.
    pub fn closed_nodes(&self) -> Vec<f64> {
        let half = self.panels / 2;
        (0..=half).map(|k| k as f64 * PI / half as f64).collect()
    }

    /// `(1/2π)∫₀^{2π} h(ω) dω` from values of `h` on [`Self::nodes`].
    pub fn mean(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// Mean of `h(v_k)` over values `v_k` already sampled on the nodes.
    pub fn mean_of_values(&self, values: &[f64], h: impl Fn(f64) -> f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        values.iter().map(|&v| h(v)).sum::<f64>() / values.len() as f64
    }

    pub fn mean_of(&self, mut h: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&w| h(w)).sum::<f64>() / self.nodes.len() as f64
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(DEFAULT_PANELS).expect("default panel count is valid")
    }
}
