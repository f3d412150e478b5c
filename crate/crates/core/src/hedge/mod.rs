//! Risk-minimizing hedging via the Galtchouk–Kunita–Watanabe decomposition.
//!
//! Discounted traded prices follow
//! `dS* = σ* dW + ∫ F*(x) Π̃(dx, dt) + Σ ρ*^{i,j} dM^{i,j}` and the
//! discounted cumulated payments of a claim admit a martingale
//! representation with integrands `(δ, J(·), γ^{i,j})`. The strategy that
//! minimizes the conditional variance of the remaining hedging cost solves
//! the pointwise linear system `G φ = A` with
//!
//! ```text
//! G = σ σᵀ + ∫ F Fᵀ ν(dx) + Σ_{j≠i} ρ^{i,j} (ρ^{i,j})ᵀ λ^{i,j}
//! A = σ δ + ∫ F J(x) ν(dx) + Σ_{j≠i} ρ^{i,j} γ^{i,j} λ^{i,j}
//! ```
//!
//! (written here in undiscounted asset coefficients; the bank-account
//! scaling cancels between the two sides). In the Markov setting the
//! integrands come from the ex-dividend price function `v`:
//!
//! ```text
//! A(u, z, i) = a_SS (∇_S v)ᵀ + a_SR (∇_R v)ᵀ
//!            + ∫ F_S (v(u, z + F_Y, i) - v(u, z, i)) ν(dx)
//!            + Σ_{j≠i} ρ_S^{i,j} (v(u, z + ρ_Y^{i,j}, j) - v(u, z, i) + δ^{i,j}) λ^{i,j}
//! ```

pub mod attain;
pub mod cost;
pub mod field;
pub mod risk;
pub mod solve;
pub mod triple;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{DividendSpec, MarketModel};
use crate::pide::ValueFunction;

pub use attain::{attainability_check, Attainability, AttainabilityReport, RankProbe};
pub use cost::{cost_process, ClosureStrategy, RiskMinStrategy, Strategy};
pub use field::{credit_delta_hedge, hedge_field, write_hedge_csv, HedgeField, HedgeOptions, PhiMode};
pub use risk::{residual_risk, RiskReport};
pub use solve::{min_norm_solve, MinNormSolution};
pub use triple::{representation_triple, semimartingale_adjust, RepresentationTriple};

/// The predictable-covariation density of discounted prices, kept as its
/// three sources. Each block is positive semidefinite on its own.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    /// `a_SS = σ_S σ_Sᵀ`
    pub diffusion: DMatrix<f64>,
    /// `∫ F_S F_Sᵀ ν(dx)`
    pub jump: DMatrix<f64>,
    /// `Σ_{j≠i} ρ_S^{i,j} (ρ_S^{i,j})ᵀ λ^{i,j}`
    pub regime: DMatrix<f64>,
}

impl GramMatrix {
    /// Sum of the blocks, symmetrized as `(G + Gᵀ)/2`.
    pub fn total(&self) -> DMatrix<f64> {
        let g = &self.diffusion + &self.jump + &self.regime;
        let gt = g.transpose();
        (g + gt) * 0.5
    }
}

/// Assembles `G(u, z, i)` from the model coefficients.
pub fn gram_matrix(model: &MarketModel, u: f64, z: &[f64], i: usize) -> Result<GramMatrix> {
    let d = model.dims.assets;
    let dim = model.dims.state();
    let sigma = model.diffusion(u, z, i);
    let sigma_s = sigma.rows(0, d);
    let diffusion = sigma_s * sigma_s.transpose();

    let mut jump = DMatrix::zeros(d, d);
    if !model.levy.is_empty() {
        let mut f = vec![0.0; dim];
        for atom in model.levy.nodes() {
            model.jump_into(u, z, i, &atom.point, &mut f);
            for a in 0..d {
                for b in 0..d {
                    jump[(a, b)] += atom.weight * f[a] * f[b];
                }
            }
        }
    }

    let mut regime = DMatrix::zeros(d, d);
    let mut rho = vec![0.0; dim];
    for j in model.regimes.labels() {
        if j == i {
            continue;
        }
        let lam = model.intensity(u, z, i, j);
        if lam == 0.0 {
            continue;
        }
        model.regime_jump_into(u, z, i, j, &mut rho);
        for a in 0..d {
            for b in 0..d {
                regime[(a, b)] += lam * rho[a] * rho[b];
            }
        }
    }

    Ok(GramMatrix {
        diffusion,
        jump,
        regime,
    })
}

/// Assembles the cross vector `A(u, z, i)` against a value function.
/// Fails with `DomainEscape` when a shifted point leaves the value
/// function's extended domain.
pub fn cross_vector(
    model: &MarketModel,
    dividend: &DividendSpec,
    v: &dyn ValueFunction,
    u: f64,
    z: &[f64],
    i: usize,
) -> Result<DVector<f64>> {
    let d = model.dims.assets;
    let p = model.dims.factors;
    let dim = model.dims.state();

    let mut grad = vec![0.0; dim];
    v.gradient(u, z, i, &mut grad)?;
    let sigma = model.diffusion(u, z, i);
    let sigma_s = sigma.rows(0, d);
    let a_ss = sigma_s * sigma_s.transpose();
    let mut a = DVector::zeros(d);
    for k in 0..d {
        for l in 0..d {
            a[k] += a_ss[(k, l)] * grad[l];
        }
    }
    if p > 0 {
        let sigma_r = sigma.rows(d, p);
        let a_sr = sigma_s * sigma_r.transpose();
        for k in 0..d {
            for l in 0..p {
                a[k] += a_sr[(k, l)] * grad[d + l];
            }
        }
    }

    let v0 = v.value(u, z, i)?;

    if !model.levy.is_empty() {
        let mut f = vec![0.0; dim];
        let mut shifted = vec![0.0; dim];
        for atom in model.levy.nodes() {
            model.jump_into(u, z, i, &atom.point, &mut f);
            for (s, (zz, ff)) in shifted.iter_mut().zip(z.iter().zip(f.iter())) {
                *s = zz + ff;
            }
            let dv = v.value(u, &shifted, i)? - v0;
            for k in 0..d {
                a[k] += atom.weight * f[k] * dv;
            }
        }
    }

    let mut rho = vec![0.0; dim];
    let mut shifted = vec![0.0; dim];
    for j in model.regimes.labels() {
        if j == i {
            continue;
        }
        let lam = model.intensity(u, z, i, j);
        if lam == 0.0 {
            continue;
        }
        model.regime_jump_into(u, z, i, j, &mut rho);
        for (s, (zz, rr)) in shifted.iter_mut().zip(z.iter().zip(rho.iter())) {
            *s = zz + rr;
        }
        let dv = v.value(u, &shifted, j)? - v0 + dividend.transition(u, z, i, j);
        for k in 0..d {
            a[k] += lam * rho[k] * dv;
        }
    }

    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClosureDynamics, DividendSpec, LevyMeasure, ModelDims, RegimeSet};
    use crate::pide::ClosureValueFunction;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn gram_vanishes_without_noise() {
        let model = MarketModel::new(
            "silent",
            RegimeSet::new(2).unwrap(),
            ModelDims { assets: 1, factors: 0, wiener: 1, levy: 1 },
            LevyMeasure::none(),
            0.0,
            Arc::new(ClosureDynamics::zeroed()),
        )
        .unwrap();
        let g = gram_matrix(&model, 0.0, &[100.0], 1).unwrap();
        assert_eq!(g.total()[(0, 0)], 0.0);
    }

    #[test]
    fn single_asset_diffusion_gram() {
        let mut dyns = ClosureDynamics::zeroed();
        dyns.diffusion = Box::new(|_, z, _, out| out[(0, 0)] = 0.3 * z[0]);
        let model = MarketModel::new(
            "bs-like",
            RegimeSet::new(1).unwrap(),
            ModelDims { assets: 1, factors: 0, wiener: 1, levy: 1 },
            LevyMeasure::none(),
            0.0,
            Arc::new(dyns),
        )
        .unwrap();
        let g = gram_matrix(&model, 0.0, &[50.0], 1).unwrap();
        assert_relative_eq!(g.total()[(0, 0)], (0.3 * 50.0) * (0.3 * 50.0), max_relative = 1e-14);
        assert_eq!(g.jump[(0, 0)], 0.0);
        assert_eq!(g.regime[(0, 0)], 0.0);
    }

    #[test]
    fn regime_switching_gram_matches_hand_sum() {
        // one asset; G/s² = |σ(i)|² + ∫ (e^{σ(i)x} - 1)² ν(dx) + Σ (e^{ρ^{i,j}} - 1)² λ^{i,j}
        // with atoms ν = {(0.1, w=0.2), (-0.2, w=0.1)}
        let (mut model, _) = crate::model::preset_model(
            "exp_levy_regime",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.15, 0.35],
                "rate": [0.0, 0.0],
                "rho": [[0.0, -0.05], [0.05, 0.0]],
                "lambda": [[0.0, 1.0], [1.0, 0.0]],
            }),
        )
        .unwrap();
        model.levy = LevyMeasure::atoms_1d(&[(0.1, 0.2), (-0.2, 0.1)]).unwrap();
        let s = 120.0;
        for i in 1..=2usize {
            let sig = [0.15, 0.35][i - 1];
            let rho: f64 = [[0.0, -0.05], [0.05, 0.0]][i - 1][2 - i];
            let hand = sig * sig
                + 0.2 * ((sig * 0.1f64).exp() - 1.0).powi(2)
                + 0.1 * ((sig * -0.2f64).exp() - 1.0).powi(2)
                + 1.0 * (rho.exp() - 1.0).powi(2);
            let g = gram_matrix(&model, 0.0, &[s], i).unwrap();
            assert_relative_eq!(g.total()[(0, 0)] / (s * s), hand, max_relative = 1e-12);
        }
    }

    #[test]
    fn cross_vector_zero_for_constant_value() {
        let (model, _) = crate::model::preset_model(
            "exp_levy_regime",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.15, 0.35],
                "rate": [0.0, 0.0],
                "rho": [[0.0, -0.05], [0.05, 0.0]],
                "lambda": [[0.0, 1.0], [1.0, 0.0]],
                "jump_mass": 0.3, "jump_mean": -0.1, "jump_std": 0.15,
            }),
        )
        .unwrap();
        let v = ClosureValueFunction::constant(4.2);
        let a = cross_vector(&model, &DividendSpec::zero(1.0), &v, 0.3, &[80.0], 1).unwrap();
        assert_relative_eq!(a[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_vector_linear_value_pure_diffusion() {
        // two assets + one factor, pure diffusion; v = αᵀ s gives A = a_SS α
        let alpha = [2.0, -1.0];
        let mut dyns = ClosureDynamics::zeroed();
        dyns.diffusion = Box::new(|_, _, _, out| {
            out[(0, 0)] = 1.0;
            out[(0, 1)] = 0.5;
            out[(1, 0)] = 0.2;
            out[(1, 1)] = 0.8;
            out[(2, 0)] = 0.3;
            out[(2, 1)] = 0.3;
        });
        let model = MarketModel::new(
            "two-asset",
            RegimeSet::new(1).unwrap(),
            ModelDims { assets: 2, factors: 1, wiener: 2, levy: 1 },
            LevyMeasure::none(),
            0.0,
            Arc::new(dyns),
        )
        .unwrap();
        let v = ClosureValueFunction {
            value: Box::new(move |_, z, _| alpha[0] * z[0] + alpha[1] * z[1]),
            gradient: Box::new(move |_, _, _, out| {
                out[0] = alpha[0];
                out[1] = alpha[1];
                out[2] = 0.0;
            }),
            hessian: Box::new(|_, _, _, out| out.fill(0.0)),
        };
        let a = cross_vector(&model, &DividendSpec::zero(1.0), &v, 0.0, &[10.0, 20.0, 0.0], 1)
            .unwrap();
        let sigma_s = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 0.8]);
        let a_ss = &sigma_s * sigma_s.transpose();
        let expect = &a_ss * nalgebra::DVector::from_column_slice(&alpha);
        assert_relative_eq!(a[0], expect[0], max_relative = 1e-13);
        assert_relative_eq!(a[1], expect[1], max_relative = 1e-13);
    }

    #[test]
    fn cross_vector_escapes_when_shifts_leave_the_domain() {
        use crate::pide::{Axis, SpatialGrid, ValueField};
        use crate::sim::TimeGrid;
        // switch jump of +80% pushes past the 10% extrapolation band near
        // the upper boundary
        let (model, _) = crate::model::preset_model(
            "exp_levy_regime",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.15, 0.35],
                "rate": [0.0, 0.0],
                "rho": [[0.0, 0.6], [0.0, 0.0]],
                "lambda": [[0.0, 1.0], [1.0, 0.0]],
            }),
        )
        .unwrap();
        let grid = SpatialGrid::new(vec![Axis::new(0.0, 100.0, 51, false).unwrap()]).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let vf = ValueField::from_function(grid, tg, 2, |_, y, _| y[0]);
        let err = cross_vector(&model, &DividendSpec::zero(1.0), &vf, 0.0, &[90.0], 1)
            .unwrap_err();
        assert!(matches!(err, crate::error::Error::DomainEscape { .. }), "{err:?}");
    }

    #[test]
    fn cross_vector_matches_regime_switching_formula() {
        // quadratic test value function; compare against the single-asset
        // regime-switching strategy numerator evaluated symbolically:
        // A = |σ(i)|² s² ∂_s v + ∫ s(e^{σx}-1)(v(s e^{σx}, i) - v(s, i)) ν
        //     + Σ s(e^{ρ}-1)(v(s e^{ρ}, j) - v(s, i) + δ^{i,j}) λ
        let (mut model, _) = crate::model::preset_model(
            "exp_levy_regime",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.15, 0.35],
                "rate": [0.0, 0.0],
                "rho": [[0.0, -0.05], [0.05, 0.0]],
                "lambda": [[0.0, 1.0], [1.0, 0.0]],
            }),
        )
        .unwrap();
        model.levy = LevyMeasure::atoms_1d(&[(0.1, 0.2), (-0.2, 0.1)]).unwrap();
        let quad = |s: f64, c: usize| 0.01 * s * s + 2.0 * s + 10.0 * c as f64;
        let v = ClosureValueFunction {
            value: Box::new(move |_, z, c| quad(z[0], c)),
            gradient: Box::new(|_, z, _, out| out[0] = 0.02 * z[0] + 2.0),
            hessian: Box::new(|_, _, _, out| out[(0, 0)] = 0.02),
        };
        let mut delta = crate::model::ClosureDividend::zeroed();
        delta.transition = Box::new(|_, _, i, j| (i + j) as f64 * 0.1);
        let dividend = DividendSpec::new("probe", 1.0, 1, Arc::new(delta));

        let s = 90.0;
        let sig = 0.15;
        let got = cross_vector(&model, &dividend, &v, 0.2, &[s], 1).unwrap()[0];
        let mut expect = (sig * s).powi(2) * (0.02 * s + 2.0);
        for (x, w) in [(0.1, 0.2), (-0.2, 0.1)] {
            let fac = (sig * x as f64).exp() - 1.0;
            expect += w * s * fac * (quad(s * (1.0 + fac), 1) - quad(s, 1));
        }
        let rho_fac = (-0.05f64).exp() - 1.0;
        expect += 1.0 * s * rho_fac * (quad(s * (1.0 + rho_fac), 2) - quad(s, 1) + 0.3);
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }
}
