//! The extended generator of the coupled state/rating process.

use crate::error::Result;
use crate::model::MarketModel;
use crate::pide::ValueFunction;

/// Applies the generator
///
/// ```text
/// A_t v(z, c) = ∇v μ_Y + ½ Tr(a_Y ∇²v)
///             + ∫ (v(t, z + F_Y(x), c) - v(t, z, c) - ∇v F_Y(x)) ν(dx)
///             + Σ_{c'≠c} (v(t, z + ρ^{c,c'}, c') - v(t, z, c) - ∇v ρ^{c,c'}) λ^{c,c'}
/// ```
///
/// at `(u, z, c)`, with `a_Y = σ_Y σ_Yᵀ`.
pub fn apply_generator(
    model: &MarketModel,
    v: &dyn ValueFunction,
    u: f64,
    z: &[f64],
    c: usize,
) -> Result<f64> {
    let dim = model.dims.state();
    let mut grad = vec![0.0; dim];
    v.gradient(u, z, c, &mut grad)?;
    let mut hess = nalgebra::DMatrix::zeros(dim, dim);
    v.hessian(u, z, c, &mut hess)?;

    let mut mu = vec![0.0; dim];
    model.drift_into(u, z, c, &mut mu);
    let sigma = model.diffusion(u, z, c);
    let a = &sigma * sigma.transpose();

    let mut acc = 0.0;
    for i in 0..dim {
        acc += grad[i] * mu[i];
        for j in 0..dim {
            acc += 0.5 * a[(i, j)] * hess[(j, i)];
        }
    }

    let v0 = v.value(u, z, c)?;

    if !model.levy.is_empty() {
        let mut shift = vec![0.0; dim];
        let mut shifted = vec![0.0; dim];
        // not a closure: ? propagation out of the integrand
        for atom in model.levy.nodes() {
            model.jump_into(u, z, c, &atom.point, &mut shift);
            for i in 0..dim {
                shifted[i] = z[i] + shift[i];
            }
            let vj = v.value(u, &shifted, c)?;
            let grad_dot: f64 = grad.iter().zip(shift.iter()).map(|(g, s)| g * s).sum();
            acc += atom.weight * (vj - v0 - grad_dot);
        }
    }

    let mut rho = vec![0.0; dim];
    let mut shifted = vec![0.0; dim];
    for j in model.regimes.labels() {
        if j == c {
            continue;
        }
        let lam = model.intensity(u, z, c, j);
        if lam == 0.0 {
            continue;
        }
        model.regime_jump_into(u, z, c, j, &mut rho);
        for i in 0..dim {
            shifted[i] = z[i] + rho[i];
        }
        let vj = v.value(u, &shifted, j)?;
        let grad_dot: f64 = grad.iter().zip(rho.iter()).map(|(g, s)| g * s).sum();
        acc += lam * (vj - v0 - grad_dot);
    }

    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClosureDynamics, LevyMeasure, MarketModel, ModelDims, RegimeSet};
    use crate::pide::ClosureValueFunction;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn model_with(
        dynamics: ClosureDynamics,
        levy: LevyMeasure,
        regimes: usize,
        factors: usize,
    ) -> MarketModel {
        MarketModel::new(
            "gen-test",
            RegimeSet::new(regimes).unwrap(),
            ModelDims {
                assets: 1,
                factors,
                wiener: 1,
                levy: 1,
            },
            levy,
            10.0,
            Arc::new(dynamics),
        )
        .unwrap()
    }

    #[test]
    fn constant_function_maps_to_zero() {
        let mut dyns = ClosureDynamics::zeroed();
        dyns.drift = Box::new(|_, _, _, out| out[0] = 1.3);
        dyns.diffusion = Box::new(|_, _, _, out| out[(0, 0)] = 0.4);
        dyns.jump_coeff = Box::new(|_, _, _, x, out| out[0] = x[0]);
        dyns.regime_jump = Box::new(|_, _, _, _, out| out[0] = 0.2);
        dyns.intensity = Box::new(|_, _, _, _| 2.0);
        let model = model_with(
            dyns,
            LevyMeasure::atoms_1d(&[(0.3, 0.4)]).unwrap(),
            2,
            0,
        );
        let v = ClosureValueFunction::constant(7.0);
        let got = apply_generator(&model, &v, 0.1, &[5.0], 1).unwrap();
        assert_relative_eq!(got, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn linear_function_picks_up_drift_only() {
        // v = βᵀ z, no jumps, no switching: A v = βᵀ μ_Y
        let beta = [2.0, -1.5];
        let mut dyns = ClosureDynamics::zeroed();
        dyns.drift = Box::new(|_, z, _, out| {
            out[0] = 0.3 * z[0];
            out[1] = -0.7;
        });
        dyns.diffusion = Box::new(|_, _, _, out| {
            out[(0, 0)] = 0.9;
            out[(1, 0)] = 0.2;
        });
        let model = model_with(dyns, LevyMeasure::none(), 1, 1);
        let v = ClosureValueFunction {
            value: Box::new(move |_, z, _| beta[0] * z[0] + beta[1] * z[1]),
            gradient: Box::new(move |_, _, _, out| out.copy_from_slice(&beta)),
            hessian: Box::new(|_, _, _, out| out.fill(0.0)),
        };
        let z = [4.0, 1.0];
        let got = apply_generator(&model, &v, 0.0, &z, 1).unwrap();
        assert_relative_eq!(got, 2.0 * (0.3 * 4.0) + (-1.5) * (-0.7), max_relative = 1e-13);
    }

    #[test]
    fn quadratic_with_atoms_matches_symbolic_expansion() {
        // v = z² in 1d, atom ν = {(0.3, w = 0.4)}, F = z (e^{0.3} - 1),
        // μ = 0.1 z, σ = 0.25 z, no switching. Symbolically:
        //   A v = 0.1 z · 2z + ½ (0.25 z)² · 2
        //        + w [ (z + F)² - z² - 2z F ]          (quadratic: = w F²)
        let f_fac = 0.3f64.exp() - 1.0;
        let mut dyns = ClosureDynamics::zeroed();
        dyns.drift = Box::new(|_, z, _, out| out[0] = 0.1 * z[0]);
        dyns.diffusion = Box::new(|_, z, _, out| out[(0, 0)] = 0.25 * z[0]);
        dyns.jump_coeff = Box::new(move |_, z, _, x, out| {
            out[0] = z[0] * ((x[0]).exp() - 1.0);
        });
        let model = model_with(dyns, LevyMeasure::atoms_1d(&[(0.3, 0.4)]).unwrap(), 1, 0);
        let v = ClosureValueFunction {
            value: Box::new(|_, z, _| z[0] * z[0]),
            gradient: Box::new(|_, z, _, out| out[0] = 2.0 * z[0]),
            hessian: Box::new(|_, _, _, out| out[(0, 0)] = 2.0),
        };
        let z = 3.0;
        let got = apply_generator(&model, &v, 0.0, &[z], 1).unwrap();
        let expect = 0.1 * z * 2.0 * z + 0.5 * (0.25 * z).powi(2) * 2.0 + 0.4 * (z * f_fac).powi(2);
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }
}
