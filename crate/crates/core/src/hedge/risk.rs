//! Residual (orthogonal) hedging risk.
//!
//! Two estimators of `R_0 = E[(L^X_T)²]`, the variance of the
//! non-hedgeable part of the claim:
//!
//! - integral form: `E ∫_0^T [ ‖δᵀ - φᵀσ*‖² + ∫ (J - φᵀF*)² ν + Σ (γ^{i,j} - φᵀρ*^{i,j})² λ^{i,j} ] du`
//!   with the three sources reported separately,
//! - direct form: pathwise accumulation of
//!   `dL^X = (δᵀ - φᵀσ*) dW + ∫ (J - φᵀF*) dΠ̃ + Σ (γ - φᵀρ*) dM^{i,j}`
//!   and averaging `(L^X_T)²`.
//!
//! For an attainable claim both vanish; they must agree within Monte Carlo
//! error in general.

use serde::Serialize;

use super::field::HedgeField;
use crate::error::Result;
use crate::model::{DividendSpec, MarketModel};
use crate::pide::{QueryMode, ValueField};
use crate::sim::{mean_se, EnsembleSpec};

#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    /// Integral-form point estimate of `R_0` and its standard error.
    pub r0: f64,
    pub r0_se: f64,
    /// Per-source decomposition of the integral form.
    pub source_brownian: f64,
    pub source_jump: f64,
    pub source_transition: f64,
    /// Direct estimate `E[(L^X_T)²]` and its standard error.
    pub direct: f64,
    pub direct_se: f64,
    pub n_paths: usize,
}

/// Monte Carlo residual-risk estimate for the strategy stored in `hedge`.
pub fn residual_risk(
    model: &MarketModel,
    dividend: &DividendSpec,
    value: &ValueField,
    hedge: &HedgeField,
    spec: &EnsembleSpec,
) -> Result<RiskReport> {
    if (dividend.maturity - hedge.tgrid.t_end()).abs() > 1e-12 * dividend.maturity.max(1.0)
        || (dividend.maturity - spec.grid.t_end()).abs() > 1e-12 * dividend.maturity.max(1.0)
    {
        return Err(crate::error::Error::InvalidSpec(
            "hedge field / ensemble horizon does not match the payment stream maturity".into(),
        ));
    }
    let d = model.dims.assets;
    let r_w = model.dims.wiener;
    let dim = model.dims.state();
    let has_jumps = !model.levy.is_empty();

    let rows: Vec<[f64; 4]> = spec.map_paths(|path| {
        let grid = &path.grid;
        let dt = grid.dt();
        let n = grid.n_steps();
        let mut int_w = 0.0;
        let mut int_j = 0.0;
        let mut int_r = 0.0;
        let mut lx = 0.0;
        let mut phi = vec![0.0; d];
        let mut fbuf = vec![0.0; dim];
        let mut shifted = vec![0.0; dim];

        for k in 0..n {
            let t = grid.node(k);
            let y = path.state(k);
            let c = path.regimes[k];
            let b = path.bank[k];
            let inv_b = 1.0 / b;
            let inv_b2 = inv_b * inv_b;

            // Brownian source
            let mut w_sq = 0.0;
            for w in 0..r_w {
                let m = hedge.wiener_mismatch_at(t, y, c, w);
                w_sq += m * m;
                lx += m * inv_b * path.dw_at(k)[w];
            }
            int_w += w_sq * inv_b2 * dt;

            // jump source
            if has_jumps {
                int_j += hedge.jump_mismatch_sq_at(t, y, c) * inv_b2 * dt;
                lx -= hedge.jump_mismatch_comp_at(t, y, c) * inv_b * dt;
                for ev in path.jumps_in_step(k) {
                    hedge.phi_at(t, y, c, &mut phi);
                    model.jump_into(t, y, c, &ev.mark, &mut fbuf);
                    for (s, (yy, ff)) in shifted.iter_mut().zip(y.iter().zip(fbuf.iter())) {
                        *s = yy + ff;
                    }
                    let v0 = value.value_at(t, y, c, QueryMode::Clamped)?;
                    let vs = value.value_at(t, &shifted, c, QueryMode::Clamped)?;
                    let phi_f: f64 = (0..d).map(|a| phi[a] * fbuf[a]).sum();
                    lx += (vs - v0 - phi_f) * inv_b;
                }
            }

            // transition source
            for j in model.regimes.labels() {
                if j == c {
                    continue;
                }
                let lam = model.intensity(t, y, c, j);
                if lam <= 0.0 {
                    continue;
                }
                let m = hedge.transition_mismatch_at(t, y, c, j);
                int_r += m * m * lam * inv_b2 * dt;
                lx -= m * lam * inv_b * dt;
            }
            if let Some(ev) = path.transition_in_step(k) {
                let m = hedge.transition_mismatch_at(t, y, ev.from, ev.to);
                lx += m * inv_b;
            }
        }
        Ok([int_w, int_j, int_r, lx * lx])
    })?;

    let totals: Vec<f64> = rows.iter().map(|r| r[0] + r[1] + r[2]).collect();
    let (r0, r0_se) = mean_se(&totals);
    let mean_of = |idx: usize| rows.iter().map(|r| r[idx]).sum::<f64>() / rows.len() as f64;
    let directs: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let (direct, direct_se) = mean_se(&directs);

    Ok(RiskReport {
        r0,
        r0_se,
        source_brownian: mean_of(0),
        source_jump: mean_of(1),
        source_transition: mean_of(2),
        direct,
        direct_se,
        n_paths: spec.n_paths,
    })
}
