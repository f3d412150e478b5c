//! Cost process of a strategy against a payment stream
//!
//! ```text
//! C_t = ∫_0^t B_u^{-1} dD_u + V*_t(φ) - ∫_0^t φ_uᵀ dS*_u
//! ```
//!
//! accumulated along simulated paths with left-endpoint sums. A constant
//! cost process means the strategy finances the stream; for the
//! risk-minimizing strategy the cost is a martingale (mean self-financing).

use std::sync::Arc;

use super::field::HedgeField;
use crate::model::DividendSpec;
use crate::pide::{QueryMode, ValueField};
use crate::sim::Path;

/// A trading strategy evaluated along paths. Evaluations are predictable:
/// callers pass left-limit states `(t_k, Y_k, C_k)`.
pub trait Strategy: Send + Sync {
    /// Asset holdings `φ(t, y, c)`.
    fn phi_into(&self, t: f64, y: &[f64], c: usize, out: &mut [f64]);
    /// Undiscounted portfolio value `V_t(φ) = φᵀS_t + η_t B_t` at the state.
    fn wealth(&self, t: f64, y: &[f64], c: usize) -> f64;
}

/// The 0-achieving risk-minimizing strategy: holdings from the hedge field,
/// wealth equal to the ex-dividend value `v(t, y, c) 1_{t<T}`.
pub struct RiskMinStrategy<'a> {
    pub hedge: &'a HedgeField,
    pub value: &'a ValueField,
}

impl Strategy for RiskMinStrategy<'_> {
    fn phi_into(&self, t: f64, y: &[f64], c: usize, out: &mut [f64]) {
        self.hedge.phi_at(t, y, c, out);
    }
    fn wealth(&self, t: f64, y: &[f64], c: usize) -> f64 {
        if t >= self.value.tgrid.t_end() {
            return 0.0;
        }
        self.value
            .value_at(t, y, c, QueryMode::Clamped)
            .unwrap_or(0.0)
    }
}

/// Strategy from closures (buy-and-hold fixtures, perturbations).
#[allow(clippy::type_complexity)]
pub struct ClosureStrategy {
    pub phi: Arc<dyn Fn(f64, &[f64], usize, &mut [f64]) + Send + Sync>,
    pub wealth: Arc<dyn Fn(f64, &[f64], usize) -> f64 + Send + Sync>,
}

impl Strategy for ClosureStrategy {
    fn phi_into(&self, t: f64, y: &[f64], c: usize, out: &mut [f64]) {
        (self.phi)(t, y, c, out)
    }
    fn wealth(&self, t: f64, y: &[f64], c: usize) -> f64 {
        (self.wealth)(t, y, c)
    }
}

/// Cost trajectory `C_{t_k}` along one path. `d` asset holdings are
/// evaluated at left limits; the discounted-dividend leg uses the same
/// accumulation conventions as the Monte Carlo value estimator.
pub fn cost_process(
    dividend: &DividendSpec,
    strategy: &dyn Strategy,
    d_assets: usize,
    path: &Path,
) -> Vec<f64> {
    let grid = &path.grid;
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut out = Vec::with_capacity(n + 1);
    let mut phi = vec![0.0; d_assets];
    let mut dividends = 0.0; // ∫ B^{-1} dD
    let mut gains = 0.0; // ∫ φᵀ dS*

    for k in 0..=n {
        let t = grid.node(k);
        let y = path.state(k);
        let c = path.regimes[k];
        let b = path.bank[k];
        if k == n {
            dividends += dividend.terminal(y, c) / b;
        }
        let wealth_star = strategy.wealth(t, y, c) / b;
        out.push(dividends + wealth_star - gains);
        if k == n {
            break;
        }

        // step contribution, coefficients at the left endpoint
        strategy.phi_into(t, y, c, &mut phi);
        dividends += dividend.rate(t, y, c) / b * dt;
        if let Some(ev) = path.transition_in_step(k) {
            dividends += dividend.transition(t, y, ev.from, ev.to) / b;
        }
        let y_next = path.state(k + 1);
        let b_next = path.bank[k + 1];
        for (a, p) in phi.iter().enumerate() {
            gains += p * (y_next[a] / b_next - y[a] / b);
        }
    }
    out
}
