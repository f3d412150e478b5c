//! The martingale-representation triple `(δ, J(·), γ^{i,j})` of discounted
//! cumulated payments, built from the ex-dividend price function:
//!
//! ```text
//! δ_t      = B_t^{-1} σ_Yᵀ (∇v)ᵀ                       (Wiener loadings)
//! J_t(x)   = B_t^{-1} (v(t, Y + F_Y(x), i) - v(t, Y, i))
//! γ_t^{i,j} = B_t^{-1} (v(t, Y + ρ_Y^{i,j}, j) - v(t, Y, i) + δ^{i,j}(t, Y))
//! ```

use nalgebra::DVector;

use crate::error::Result;
use crate::model::{DividendSpec, MarketModel, SemimartingaleDividendSpec};
use crate::pide::ValueFunction;

/// Representation triple evaluated at one `(t, y, i)`; the jump loading is
/// tabulated on the Lévy node set (which is also where simulated marks
/// live), the transition loadings per target regime `j ≠ i`.
#[derive(Debug, Clone)]
pub struct RepresentationTriple {
    /// δ ∈ R^{r_W}
    pub brownian: DVector<f64>,
    /// `J(x_q)` per Lévy node
    pub jump: Vec<f64>,
    /// `(j, γ^{i,j})` for each target regime
    pub transition: Vec<(usize, f64)>,
}

/// Evaluates the triple from a value function at `(u, y, i)` with bank
/// account value `bank`.
pub fn representation_triple(
    model: &MarketModel,
    dividend: &DividendSpec,
    v: &dyn ValueFunction,
    u: f64,
    y: &[f64],
    i: usize,
    bank: f64,
) -> Result<RepresentationTriple> {
    let dim = model.dims.state();
    let r_w = model.dims.wiener;
    let inv_b = 1.0 / bank;

    let mut grad = vec![0.0; dim];
    v.gradient(u, y, i, &mut grad)?;
    let sigma = model.diffusion(u, y, i);
    let mut brownian = DVector::zeros(r_w);
    for w in 0..r_w {
        let mut acc = 0.0;
        for k in 0..dim {
            acc += sigma[(k, w)] * grad[k];
        }
        brownian[w] = inv_b * acc;
    }

    let v0 = v.value(u, y, i)?;

    let mut jump = Vec::with_capacity(model.levy.nodes().len());
    let mut f = vec![0.0; dim];
    let mut shifted = vec![0.0; dim];
    for atom in model.levy.nodes() {
        model.jump_into(u, y, i, &atom.point, &mut f);
        for (s, (yy, ff)) in shifted.iter_mut().zip(y.iter().zip(f.iter())) {
            *s = yy + ff;
        }
        jump.push(inv_b * (v.value(u, &shifted, i)? - v0));
    }

    let mut transition = Vec::new();
    let mut rho = vec![0.0; dim];
    for j in model.regimes.labels() {
        if j == i {
            continue;
        }
        model.regime_jump_into(u, y, i, j, &mut rho);
        for (s, (yy, rr)) in shifted.iter_mut().zip(y.iter().zip(rho.iter())) {
            *s = yy + rr;
        }
        let gamma = inv_b * (v.value(u, &shifted, j)? - v0 + dividend.transition(u, y, i, j));
        transition.push((j, gamma));
    }

    Ok(RepresentationTriple {
        brownian,
        jump,
        transition,
    })
}

/// Shifts a triple by the martingale loadings of a semimartingale payment
/// stream: `δ = δ̂ + B^{-1} δ^D`, `J = Ĵ + B^{-1} J^D`,
/// `γ^{i,j} = γ̂^{i,j} + B^{-1} γ^{D,i,j}`. The hat triple belongs to the
/// absolutely-continuous-plus-terminal part of the stream.
pub fn semimartingale_adjust(
    sd: &SemimartingaleDividendSpec,
    hat: &RepresentationTriple,
    model: &MarketModel,
    u: f64,
    y: &[f64],
    i: usize,
    bank: f64,
) -> RepresentationTriple {
    let inv_b = 1.0 / bank;
    let mut brownian = hat.brownian.clone();
    let mut loading = vec![0.0; brownian.len()];
    (sd.brownian_loading)(u, y, i, &mut loading);
    for (b, l) in brownian.iter_mut().zip(loading.iter()) {
        *b += inv_b * l;
    }
    let jump = hat
        .jump
        .iter()
        .zip(model.levy.nodes())
        .map(|(j_hat, atom)| j_hat + inv_b * (sd.jump_loading)(u, y, i, &atom.point))
        .collect();
    let transition = hat
        .transition
        .iter()
        .map(|&(j, g_hat)| (j, g_hat + inv_b * (sd.transition_loading)(u, y, i, j)))
        .collect();
    RepresentationTriple {
        brownian,
        jump,
        transition,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::preset_model;
    use crate::pide::ClosureValueFunction;
    use approx::assert_relative_eq;

    fn regime_model() -> MarketModel {
        preset_model(
            "exp_levy_regime",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.15, 0.35],
                "rate": [0.0, 0.0],
                "rho": [[0.0, -0.05], [0.05, 0.0]],
                "lambda": [[0.0, 1.0], [1.0, 0.0]],
                "jump_mass": 0.2, "jump_mean": -0.1, "jump_std": 0.15,
            }),
        )
        .unwrap()
        .0
    }

    #[test]
    fn zero_value_zero_payments_gives_zero_triple() {
        let model = regime_model();
        let v = ClosureValueFunction::constant(0.0);
        let t = representation_triple(
            &model,
            &DividendSpec::zero(1.0),
            &v,
            0.2,
            &[90.0],
            1,
            1.0,
        )
        .unwrap();
        assert_eq!(t.brownian[0], 0.0);
        assert!(t.jump.iter().all(|&j| j == 0.0));
        assert!(t.transition.iter().all(|&(_, g)| g == 0.0));
    }

    #[test]
    fn regime_only_value_keeps_only_gamma() {
        // v(t, y, c) = 10 c: flat in y, so δ = 0, J = 0, and
        // γ^{i,j} = B^{-1}(v(j) - v(i) + δ^{i,j})
        let model = regime_model();
        let v = ClosureValueFunction {
            value: Box::new(|_, _, c| 10.0 * c as f64),
            gradient: Box::new(|_, _, _, out| out.fill(0.0)),
            hessian: Box::new(|_, _, _, out| out.fill(0.0)),
        };
        let bank = 1.25;
        let t = representation_triple(
            &model,
            &DividendSpec::zero(1.0),
            &v,
            0.2,
            &[90.0],
            1,
            bank,
        )
        .unwrap();
        assert_eq!(t.brownian[0], 0.0);
        assert!(t.jump.iter().all(|&j| j.abs() < 1e-15));
        assert_eq!(t.transition.len(), 1);
        let (j, gamma) = t.transition[0];
        assert_eq!(j, 2);
        assert_relative_eq!(gamma, (20.0 - 10.0) / bank, max_relative = 1e-13);
    }

    #[test]
    fn adjustment_pass_throughs() {
        let model = regime_model();
        let v = ClosureValueFunction {
            value: Box::new(|_, y, c| y[0] * 0.5 + c as f64),
            gradient: Box::new(|_, _, _, out| out[0] = 0.5),
            hessian: Box::new(|_, _, _, out| out.fill(0.0)),
        };
        let hat = representation_triple(
            &model,
            &DividendSpec::zero(1.0),
            &v,
            0.2,
            &[90.0],
            1,
            1.0,
        )
        .unwrap();

        // zero loadings: identity
        let sd = SemimartingaleDividendSpec::zeroed("null", 1.0);
        let adj = semimartingale_adjust(&sd, &hat, &model, 0.2, &[90.0], 1, 1.0);
        assert_eq!(adj.brownian, hat.brownian);
        assert_eq!(adj.jump, hat.jump);
        assert_eq!(adj.transition, hat.transition);

        // zero hat, δ^D = B w: output δ = w
        let zero_hat = RepresentationTriple {
            brownian: DVector::zeros(1),
            jump: vec![0.0; hat.jump.len()],
            transition: vec![(2, 0.0)],
        };
        let bank = 1.7;
        let mut sd = SemimartingaleDividendSpec::zeroed("brownian", 1.0);
        let w = 0.9;
        sd.brownian_loading = Box::new(move |_, _, _, out| out[0] = bank * w);
        let adj = semimartingale_adjust(&sd, &zero_hat, &model, 0.2, &[90.0], 1, bank);
        assert_relative_eq!(adj.brownian[0], w, max_relative = 1e-14);
    }
}
