//! PIDE solver integration checks against independent references.

mod common;

use riskmin::model::{preset_dividend, preset_model, ClosureDividend, DividendSpec, MarketModel};
use riskmin::pide::{
    apply_generator, solve_pide, Axis, PideOptions, QueryMode, SpatialGrid, ValueField,
};
use std::sync::Arc;

fn grid_1d(lo: f64, hi: f64, n: usize) -> SpatialGrid {
    SpatialGrid::new(vec![Axis::new(lo, hi, n, false).unwrap()]).unwrap()
}

fn bs_model(sigma: f64, rate: f64) -> MarketModel {
    preset_model(
        "black_scholes",
        &serde_json::json!({"sigma": sigma, "rate": rate}),
    )
    .unwrap()
    .0
}

#[test]
fn constants_are_preserved_to_machine_precision() {
    // h ≡ 1, g = δ = r = 0: every level stays exactly 1 through the jump
    // and regime coupling terms.
    let (model, _) = preset_model(
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
    let bond = preset_dividend("bond", &serde_json::json!({"maturity": 1.0}), &model).unwrap();
    let grid = grid_1d(1.0, 400.0, 120);
    let (field, _) = solve_pide(&model, &bond, &grid, &PideOptions { n_time_steps: 50 }).unwrap();
    for level in 0..=50 {
        for c in 1..=2 {
            for node in 0..120 {
                assert!(
                    (field.at(level, c, node) - 1.0).abs() <= 1e-12,
                    "v = {} at level {level}",
                    field.at(level, c, node)
                );
            }
        }
    }
}

#[test]
fn pure_discount_bond_is_exact() {
    // h ≡ 1, r constant: v(t) = e^{-r (T-t)} uniformly.
    let model = bs_model(0.2, 0.05);
    let bond = preset_dividend("bond", &serde_json::json!({"maturity": 1.0}), &model).unwrap();
    let grid = grid_1d(0.0, 400.0, 100);
    let (field, _) =
        solve_pide(&model, &bond, &grid, &PideOptions { n_time_steps: 1000 }).unwrap();
    for level in [0, 250, 500, 999] {
        let t = field.tgrid.node(level);
        let expect = (-0.05 * (1.0 - t)).exp();
        for node in [0, 50, 99] {
            let v = field.at(level, 1, node);
            assert!(
                (v - expect).abs() < 1e-6,
                "v(t = {t}) = {v}, expect {expect}"
            );
        }
    }
}

#[test]
fn black_scholes_call_within_half_percent() {
    let model = bs_model(0.2, 0.0);
    let call = preset_dividend(
        "call",
        &serde_json::json!({"strike": 100.0, "maturity": 1.0}),
        &model,
    )
    .unwrap();
    let grid = grid_1d(0.0, 400.0, 401); // strike on a node
    let (field, stats) =
        solve_pide(&model, &call, &grid, &PideOptions { n_time_steps: 400 }).unwrap();
    assert!(stats.warnings.is_empty());
    let v = field.value_at(0.0, &[100.0], 1, QueryMode::Strict).unwrap();
    let (reference, _) = common::bs_call(100.0, 100.0, 0.2, 0.0, 1.0);
    let rel = (v - reference).abs() / reference;
    assert!(
        rel < 0.005,
        "pide {v:.6} vs closed form {reference:.6} (rel {rel:.2e})"
    );
}

#[test]
fn merton_jump_call_within_one_percent() {
    let (mass, mean, std) = (0.3, -0.1, 0.15);
    let (model, _) = preset_model(
        "merton_jump",
        &serde_json::json!({
            "sigma": 0.2, "rate": 0.0,
            "jump_mass": mass, "jump_mean": mean, "jump_std": std,
        }),
    )
    .unwrap();
    let call = preset_dividend(
        "call",
        &serde_json::json!({"strike": 100.0, "maturity": 1.0}),
        &model,
    )
    .unwrap();
    let grid = grid_1d(0.0, 1000.0, 1001);
    let (field, _) =
        solve_pide(&model, &call, &grid, &PideOptions { n_time_steps: 800 }).unwrap();
    let v = field.value_at(0.0, &[100.0], 1, QueryMode::Strict).unwrap();
    let reference = common::merton_call(100.0, 100.0, 0.2, 0.0, 1.0, mass, mean, std);
    let rel = (v - reference).abs() / reference;
    assert!(
        rel < 0.01,
        "pide {v:.6} vs series {reference:.6} (rel {rel:.2e})"
    );
}

#[test]
fn comparison_principle_on_desk_fixtures() {
    // pointwise ordered payoffs produce pointwise ordered fields
    let model = bs_model(0.2, 0.0);
    let grid = grid_1d(0.0, 300.0, 101);
    let lower = preset_dividend(
        "call",
        &serde_json::json!({"strike": 110.0, "maturity": 1.0}),
        &model,
    )
    .unwrap();
    let upper_div = {
        let mut d = ClosureDividend::terminal_only(|y, _| (y[0] - 100.0f64).max(0.0));
        d.rate = Box::new(|_, _, _| 0.5);
        DividendSpec::new("call-plus-rate", 1.0, 1, Arc::new(d))
    };
    let opts = PideOptions { n_time_steps: 200 };
    let (lo, _) = solve_pide(&model, &lower, &grid, &opts).unwrap();
    let (hi, _) = solve_pide(&model, &upper_div, &grid, &opts).unwrap();
    for level in 0..=200 {
        for node in 0..101 {
            assert!(
                hi.at(level, 1, node) - lo.at(level, 1, node) >= -1e-8,
                "ordering violated at level {level}, node {node}"
            );
        }
    }
}

#[test]
fn regime_sheets_decouple_when_lambda_is_zero() {
    let (coupled, _) = preset_model(
        "exp_levy_regime",
        &serde_json::json!({
            "regimes": 2,
            "sigma": [0.15, 0.35],
            "rate": [0.0, 0.0],
            "rho": [[0.0, -0.05], [0.05, 0.0]],
            "lambda": [[0.0, 0.0], [0.0, 0.0]],
        }),
    )
    .unwrap();
    let call = preset_dividend(
        "call",
        &serde_json::json!({"strike": 100.0, "maturity": 1.0}),
        &coupled,
    )
    .unwrap();
    let grid = grid_1d(0.0, 400.0, 201);
    let opts = PideOptions { n_time_steps: 200 };
    let (two_sheet, _) = solve_pide(&coupled, &call, &grid, &opts).unwrap();

    for (c, sigma) in [(1usize, 0.15), (2usize, 0.35)] {
        let single = bs_model(sigma, 0.0);
        let call1 = preset_dividend(
            "call",
            &serde_json::json!({"strike": 100.0, "maturity": 1.0}),
            &single,
        )
        .unwrap();
        let (one_sheet, _) = solve_pide(&single, &call1, &grid, &opts).unwrap();
        for level in [0, 100, 200] {
            for node in (0..201).step_by(20) {
                let a = two_sheet.at(level, c, node);
                let b = one_sheet.at(level, 1, node);
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs().max(1.0),
                    "sheet {c} differs from single-regime solve at level {level}"
                );
            }
        }
    }
}

#[test]
fn coarse_explicit_part_warns_and_nonfinite_terminal_diverges() {
    let (model, _) = preset_model(
        "exp_levy_regime",
        &serde_json::json!({
            "regimes": 2,
            "sigma": [0.15, 0.35],
            "rate": [0.0, 0.0],
            "rho": [[0.0, -0.05], [0.05, 0.0]],
            "lambda": [[0.0, 12.0], [12.0, 0.0]],
        }),
    )
    .unwrap();
    let bond = preset_dividend("bond", &serde_json::json!({"maturity": 1.0}), &model).unwrap();
    let grid = grid_1d(1.0, 400.0, 64);
    let (_, stats) = solve_pide(&model, &bond, &grid, &PideOptions { n_time_steps: 10 }).unwrap();
    assert!(stats.explicit_bound > 1.0);
    assert!(!stats.warnings.is_empty());

    // non-finite data overflows within a few backward levels
    let huge = DividendSpec::new(
        "overflow",
        1.0,
        1,
        Arc::new(ClosureDividend::terminal_only(|_, _| f64::MAX)),
    );
    let err = solve_pide(&model, &huge, &grid, &PideOptions { n_time_steps: 50 }).unwrap_err();
    assert!(
        matches!(err, riskmin::Error::SolverDiverged { .. }),
        "{err:?}"
    );
}

#[test]
fn pide_residual_shrinks_under_refinement() {
    // plug the solved field back into the generator and difference in time:
    // |(∂_t + A - r) v + g + Σ δ λ| must shrink with resolution
    let model = bs_model(0.2, 0.0);
    let bump = preset_dividend(
        "gaussian_bump",
        &serde_json::json!({"center": 100.0, "width": 20.0, "maturity": 0.5}),
        &model,
    )
    .unwrap();
    let residual = |n_space: usize, n_time: usize| -> f64 {
        let grid = grid_1d(0.0, 300.0, n_space + 1);
        let (field, _) =
            solve_pide(&model, &bump, &grid, &PideOptions { n_time_steps: n_time }).unwrap();
        let dt = field.tgrid.dt();
        let mut worst = 0.0f64;
        for level in (2..n_time - 2).step_by((n_time / 8).max(1)) {
            let t = field.tgrid.node(level);
            for s in [60.0, 80.0, 100.0, 120.0, 140.0] {
                let v_up = field
                    .value_at(t + dt, &[s], 1, QueryMode::Strict)
                    .unwrap();
                let v_dn = field
                    .value_at(t - dt, &[s], 1, QueryMode::Strict)
                    .unwrap();
                let dv_dt = (v_up - v_dn) / (2.0 * dt);
                let gen = apply_generator(&model, &field, t, &[s], 1).unwrap();
                worst = worst.max((dv_dt + gen).abs());
            }
        }
        worst
    };
    let coarse = residual(75, 50);
    let fine = residual(150, 200);
    assert!(
        fine < 0.6 * coarse,
        "residual did not shrink: coarse {coarse:.3e}, fine {fine:.3e}"
    );
}

#[test]
fn smooth_payoff_convergence_orders() {
    // time order >= 1 against a tiny-step reference on the same spatial
    // grid; space order >= 2 against a dense lognormal quadrature reference
    let model = bs_model(0.2, 0.0);
    let bump = preset_dividend(
        "gaussian_bump",
        &serde_json::json!({"center": 100.0, "width": 20.0, "maturity": 0.5}),
        &model,
    )
    .unwrap();
    let solve_at = |n_space: usize, n_time: usize| -> f64 {
        let grid = grid_1d(0.0, 300.0, n_space + 1);
        let (field, _) =
            solve_pide(&model, &bump, &grid, &PideOptions { n_time_steps: n_time }).unwrap();
        field.value_at(0.0, &[100.0], 1, QueryMode::Strict).unwrap()
    };

    // -- order in time
    let v_ref = solve_at(600, 4096);
    let e1 = (solve_at(600, 16) - v_ref).abs();
    let e2 = (solve_at(600, 32) - v_ref).abs();
    let e3 = (solve_at(600, 64) - v_ref).abs();
    let order_t = ((e1 / e2).ln() / 2f64.ln()).min((e2 / e3).ln() / 2f64.ln());
    assert!(
        order_t >= 1.0 - 0.15,
        "time order {order_t:.2} (errors {e1:.2e}, {e2:.2e}, {e3:.2e})"
    );

    // -- order in space
    let exact = common::gbm_expectation(100.0, 0.2, 0.5, |s| {
        (-0.5 * ((s - 100.0) / 20.0) * ((s - 100.0) / 20.0)).exp()
    });
    let err_h = |n_space: usize| (solve_at(n_space, 4096) - exact).abs();
    let h1 = err_h(40);
    let h2 = err_h(80);
    let h3 = err_h(160);
    let order_h = ((h1 / h2).ln() / 2f64.ln()).min((h2 / h3).ln() / 2f64.ln());
    assert!(
        order_h >= 2.0 - 0.25,
        "space order {order_h:.2} (errors {h1:.2e}, {h2:.2e}, {h3:.2e})"
    );
}
