//! Numerical checks of the standing model assumptions on a probe sample.
//!
//! Checks are reported, never thrown: a model that violates the martingale
//! drift restriction is still simulatable (and the martingale diagnostics
//! will flag it downstream).

use serde::Serialize;

use super::{DividendSpec, MarketModel};

/// Probe points `(u, z, c)` on which assumptions are spot-checked.
#[derive(Debug, Clone)]
pub struct SamplePlan {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub regimes: Vec<usize>,
}

impl SamplePlan {
    /// Probes spanning `[0, horizon]` and a box around `y0` (0.25x to 4x on
    /// positive coordinates, symmetric shifts elsewhere), in every regime.
    pub fn default_for(model: &MarketModel, horizon: f64, y0: &[f64]) -> SamplePlan {
        let times = vec![0.0, 0.25 * horizon, 0.5 * horizon, 0.75 * horizon, horizon];
        let mut states = Vec::new();
        for &scale in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let state: Vec<f64> = y0
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        v * scale
                    } else {
                        v + (scale - 1.0)
                    }
                })
                .collect();
            states.push(state);
        }
        SamplePlan {
            times,
            states,
            regimes: model.regimes.labels().collect(),
        }
    }

    fn probes(&self) -> impl Iterator<Item = (f64, &Vec<f64>, usize)> {
        self.times.iter().flat_map(move |&u| {
            self.states
                .iter()
                .flat_map(move |z| self.regimes.iter().map(move |&c| (u, z, c)))
        })
    }
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Probe `(u, z, c)` witnessing the worst case.
    pub worst_probe: Option<(f64, Vec<f64>, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const DRIFT_REL_TOL: f64 = 1e-10;

/// Checks the martingale drift restriction, the linear-growth bound, the
/// intensity bound and Lévy square-integrability at the probe points.
pub fn validate_model(model: &MarketModel, plan: &SamplePlan) -> ValidationReport {
    let mut checks = Vec::new();
    let d = model.dims.assets;
    let n_state = model.dims.state();

    // Martingale restriction: μ_S(u, z, c) = s ∘ r(u, z, c) componentwise.
    {
        let mut worst: f64 = 0.0;
        let mut worst_probe = None;
        let mut mu = vec![0.0; n_state];
        for (u, z, c) in plan.probes() {
            model.drift_into(u, z, c, &mut mu);
            let r = model.short_rate(u, z, c);
            for k in 0..d {
                let want = z[k] * r;
                let scale = mu[k].abs().max(want.abs()).max(1e-12);
                let rel = (mu[k] - want).abs() / scale;
                if rel > worst {
                    worst = rel;
                    worst_probe = Some((u, z.clone(), c));
                }
            }
        }
        checks.push(AssumptionCheck {
            name: "martingale_drift_restriction".into(),
            passed: worst <= DRIFT_REL_TOL,
            detail: format!("max relative deviation of mu_S from s*r: {worst:.3e}"),
            worst_probe,
        });
    }

    // Linear growth: |μ|² + |σ|² + ∫|F|²ν + Σ|ρ|² <= K (1 + |z|²); the
    // constant is reported as the max probe ratio.
    {
        let mut k_hat: f64 = 0.0;
        let mut worst_probe = None;
        let mut finite = true;
        let mut mu = vec![0.0; n_state];
        let mut buf = vec![0.0; n_state];
        let mut sigma = nalgebra::DMatrix::zeros(n_state, model.dims.wiener);
        for (u, z, c) in plan.probes() {
            model.drift_into(u, z, c, &mut mu);
            model.diffusion_into(u, z, c, &mut sigma);
            let mut lhs = mu.iter().map(|v| v * v).sum::<f64>()
                + sigma.iter().map(|v| v * v).sum::<f64>();
            let jump_sq = model.levy.integrate(|x| {
                model.jump_into(u, z, c, x, &mut buf);
                buf.iter().map(|v| v * v).sum::<f64>()
            });
            match jump_sq {
                Ok(v) => lhs += v,
                Err(_) => {
                    finite = false;
                    worst_probe = Some((u, z.clone(), c));
                    continue;
                }
            }
            for (i, j) in model.regimes.pairs() {
                model.regime_jump_into(u, z, i, j, &mut buf);
                lhs += buf.iter().map(|v| v * v).sum::<f64>();
            }
            let rhs = 1.0 + z.iter().map(|v| v * v).sum::<f64>();
            let ratio = lhs / rhs;
            if !ratio.is_finite() {
                finite = false;
            }
            if ratio > k_hat {
                k_hat = ratio;
                worst_probe = Some((u, z.clone(), c));
            }
        }
        checks.push(AssumptionCheck {
            name: "linear_growth".into(),
            passed: finite && k_hat.is_finite(),
            detail: format!("reported growth constant K = {k_hat:.6e}"),
            worst_probe,
        });
    }

    // Bounded intensities: λ^{i,j}(u, z) <= declared bound, and nonnegative.
    {
        let mut worst: f64 = 0.0;
        let mut worst_probe = None;
        let mut nonneg = true;
        for (u, z, c) in plan.probes() {
            for j in model.regimes.labels() {
                if j == c {
                    continue;
                }
                let lam = model.intensity(u, z, c, j);
                if lam < 0.0 || !lam.is_finite() {
                    nonneg = false;
                    worst_probe = Some((u, z.clone(), c));
                }
                if lam > worst {
                    worst = lam;
                    worst_probe = Some((u, z.clone(), c));
                }
            }
        }
        let passed = nonneg && worst <= model.lambda_bound * (1.0 + 1e-12) + 1e-300;
        checks.push(AssumptionCheck {
            name: "intensity_bound".into(),
            passed,
            detail: format!(
                "max probe intensity {worst:.6e} vs declared bound {:.6e}",
                model.lambda_bound
            ),
            worst_probe,
        });
    }

    // Lévy measure square-integrability on its node set.
    {
        let ok = model.levy.validate().is_ok();
        checks.push(AssumptionCheck {
            name: "levy_square_integrability".into(),
            passed: ok,
            detail: format!(
                "node table: {} nodes, total mass {:.6e}",
                model.levy.nodes().len(),
                model.levy.total_mass()
            ),
            worst_probe: None,
        });
    }

    ValidationReport {
        model: model.name.clone(),
        checks,
    }
}

/// Spot-checks the integrability of a semimartingale payment stream: all
/// five loadings must be finite at the probe points (the discounted
/// square-integrability bounds reduce to this on a finite sample).
pub fn validate_semimartingale_dividend(
    sd: &crate::model::SemimartingaleDividendSpec,
    model: &MarketModel,
    plan: &SamplePlan,
) -> AssumptionCheck {
    let mut worst_probe = None;
    let mut finite = true;
    let mut brownian = vec![0.0; model.dims.wiener];
    for (u, z, c) in plan.probes() {
        let mut acc = (sd.terminal)(z, c).powi(2) + (sd.rate)(u, z, c).powi(2);
        (sd.brownian_loading)(u, z, c, &mut brownian);
        acc += brownian.iter().map(|v| v * v).sum::<f64>();
        for atom in model.levy.nodes() {
            acc += atom.weight * (sd.jump_loading)(u, z, c, &atom.point).powi(2);
        }
        for (i, j) in model.regimes.pairs() {
            acc += (sd.transition_loading)(u, z, i, j).powi(2);
        }
        if !acc.is_finite() {
            finite = false;
            worst_probe = Some((u, z.clone(), c));
        }
    }
    AssumptionCheck {
        name: "semimartingale_dividend_integrability".into(),
        passed: finite,
        detail: if finite {
            "all loadings finite at the probe points".into()
        } else {
            "non-finite loading".into()
        },
        worst_probe,
    }
}

/// Spot-checks the payment-stream growth bound
/// `|h|² + |g|² + Σ |δ^{i,j}|² <= K (1 + |z|^{2m})` for the declared `m`.
pub fn validate_dividend(
    dividend: &DividendSpec,
    model: &MarketModel,
    plan: &SamplePlan,
) -> AssumptionCheck {
    let mut k_hat: f64 = 0.0;
    let mut worst_probe = None;
    let m2 = 2.0 * dividend.growth_order as f64;
    for (u, z, c) in plan.probes() {
        let mut lhs = dividend.terminal(z, c).powi(2) + dividend.rate(u, z, c).powi(2);
        for (i, j) in model.regimes.pairs() {
            lhs += dividend.transition(u, z, i, j).powi(2);
        }
        let z2: f64 = z.iter().map(|v| v * v).sum();
        let rhs = 1.0 + z2.powf(0.5 * m2);
        let ratio = lhs / rhs;
        if ratio > k_hat || !ratio.is_finite() {
            k_hat = ratio;
            worst_probe = Some((u, z.clone(), c));
        }
    }
    AssumptionCheck {
        name: "dividend_growth".into(),
        passed: k_hat.is_finite(),
        detail: format!(
            "reported growth constant K = {k_hat:.6e} at order m = {}",
            dividend.growth_order
        ),
        worst_probe,
    }
}
