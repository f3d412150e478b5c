//! Attainability of arbitrary square-integrable payment streams.
//!
//! With a finite-support jump measure `supp ν = {x_1, …, x_q}`, every
//! square-integrable stream is attainable when the loading matrix
//!
//! ```text
//! L^i = [ σ | F(x_1) … F(x_q) | ρ^{i,1} … ρ^{i,K} (j≠i) ]      (d × (n + q + K - 1))
//! ```
//!
//! has full column rank `n + q + K - 1` in every regime `i` (a probe-based
//! check here: "attainable" means full rank at every probe). A necessary
//! condition is `d >= n + q + K - 1`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;
use crate::model::{MarketModel, SamplePlan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Attainability {
    Attainable,
    NotAttainable,
    /// Cannot be decided by the rank test (e.g. the jump measure does not
    /// have finite support).
    Indeterminate(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct RankProbe {
    pub t: f64,
    pub z: Vec<f64>,
    pub regime: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttainabilityReport {
    pub verdict: Attainability,
    pub required_rank: usize,
    /// `d >= n + q + K - 1`
    pub dimension_sufficient: bool,
    pub probes: Vec<RankProbe>,
}

pub fn attainability_check(model: &MarketModel, plan: &SamplePlan) -> Result<AttainabilityReport> {
    let d = model.dims.assets;
    let n_w = model.dims.wiener;
    let k = model.regimes.count();

    if !model.levy.is_finite_support() {
        return Ok(AttainabilityReport {
            verdict: Attainability::Indeterminate(
                "jump measure does not have finite support; the rank test does not apply".into(),
            ),
            required_rank: 0,
            dimension_sufficient: false,
            probes: Vec::new(),
        });
    }
    let q = model.levy.nodes().len();
    let required = n_w + q + k - 1;
    let dimension_sufficient = d >= required;

    let mut probes = Vec::new();
    let mut all_full = true;
    let dim = model.dims.state();
    let mut fbuf = vec![0.0; dim];
    for &t in &plan.times {
        for z in &plan.states {
            for &i in &plan.regimes {
                let mut loading = DMatrix::zeros(d, required);
                let sigma = model.diffusion(t, z, i);
                for a in 0..d {
                    for w in 0..n_w {
                        loading[(a, w)] = sigma[(a, w)];
                    }
                }
                for (qi, atom) in model.levy.nodes().iter().enumerate() {
                    model.jump_into(t, z, i, &atom.point, &mut fbuf);
                    for a in 0..d {
                        loading[(a, n_w + qi)] = fbuf[a];
                    }
                }
                let mut col = n_w + q;
                for j in model.regimes.labels() {
                    if j == i {
                        continue;
                    }
                    model.regime_jump_into(t, z, i, j, &mut fbuf);
                    for a in 0..d {
                        loading[(a, col)] = fbuf[a];
                    }
                    col += 1;
                }
                let rank = numerical_rank(&loading);
                if rank < required {
                    all_full = false;
                }
                probes.push(RankProbe {
                    t,
                    z: z.clone(),
                    regime: i,
                    rank,
                });
            }
        }
    }

    let verdict = if dimension_sufficient && all_full {
        Attainability::Attainable
    } else {
        Attainability::NotAttainable
    };
    Ok(AttainabilityReport {
        verdict,
        required_rank: required,
        dimension_sufficient,
        probes,
    })
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = 1e-12 * smax * m.nrows().max(m.ncols()) as f64;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}
