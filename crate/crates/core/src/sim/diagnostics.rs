//! Pathwise bookkeeping and martingale sanity checks.

use serde::Serialize;

use super::{mean_se, EnsembleSpec, Path};
use crate::error::Result;
use crate::model::MarketModel;

/// Counting processes `H^{i,j}` and compensated martingales
/// `M^{i,j} = H^{i,j} - ∫ 1_i(C_v-) λ^{i,j}(v, Y_v-) dv` along one path,
/// with the compensator accumulated by the left-endpoint rule.
#[derive(Debug, Clone)]
pub struct TransitionProcesses {
    /// Ordered pairs `(i, j)`, `i != j`, in `RegimeSet::pairs` order.
    pub pairs: Vec<(usize, usize)>,
    /// `h[pair][node]`
    pub h: Vec<Vec<f64>>,
    /// `m[pair][node]`
    pub m: Vec<Vec<f64>>,
}

pub fn transition_processes(model: &MarketModel, path: &Path) -> TransitionProcesses {
    let pairs: Vec<_> = model.regimes.pairs().collect();
    let n_nodes = path.grid.n_nodes();
    let dt = path.grid.dt();
    let mut h = vec![vec![0.0; n_nodes]; pairs.len()];
    let mut m = vec![vec![0.0; n_nodes]; pairs.len()];

    for k in 0..path.grid.n_steps() {
        let t = path.grid.node(k);
        let y = path.state(k);
        let c = path.regimes[k];
        let fired = path.transition_in_step(k);
        for (pi, &(i, j)) in pairs.iter().enumerate() {
            let mut h_next = h[pi][k];
            if let Some(ev) = fired {
                if ev.from == i && ev.to == j {
                    h_next += 1.0;
                }
            }
            let comp = if c == i { model.intensity(t, y, i, j) * dt } else { 0.0 };
            h[pi][k + 1] = h_next;
            m[pi][k + 1] = m[pi][k] + (h_next - h[pi][k]) - comp;
        }
    }

    TransitionProcesses { pairs, h, m }
}

/// Recomputes the bank account `B_u = exp(Σ r(t_k, R_k, C_k) Δt)` from the
/// stored states (left-endpoint rule); `B_{t0} = 1`.
pub fn bank_account(model: &MarketModel, path: &Path) -> Vec<f64> {
    let mut bank = Vec::with_capacity(path.grid.n_nodes());
    let dt = path.grid.dt();
    let mut acc = 0.0;
    bank.push(1.0);
    for k in 0..path.grid.n_steps() {
        acc += model.short_rate(path.grid.node(k), path.state(k), path.regimes[k]) * dt;
        bank.push(acc.exp());
    }
    bank
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleFlag {
    pub quantity: String,
    pub mean: f64,
    pub se: f64,
    pub flagged: bool,
}

/// Terminal-mean diagnostics: discounted traded assets `S*_T - S*_0` and the
/// compensated transition martingales `M^{i,j}_T` should average zero; any
/// `|mean| > 3 SE` is flagged.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub n_paths: usize,
    pub entries: Vec<MartingaleFlag>,
}

impl DiagnosticReport {
    pub fn flagged(&self) -> bool {
        self.entries.iter().any(|e| e.flagged)
    }
}

pub fn martingale_diagnostic(spec: &EnsembleSpec) -> Result<DiagnosticReport> {
    let d = spec.model.dims.assets;
    let pairs: Vec<_> = spec.model.regimes.pairs().collect();
    let model = spec.model.clone();

    let per_path: Vec<Vec<f64>> = spec.map_paths(|p| {
        let n = p.grid.n_steps();
        let mut row = Vec::with_capacity(d + pairs.len());
        for k in 0..d {
            let s_star_t = p.state(n)[k] / p.bank[n];
            let s_star_0 = p.state(0)[k] / p.bank[0];
            row.push(s_star_t - s_star_0);
        }
        let tp = transition_processes(&model, p);
        for pi in 0..pairs.len() {
            row.push(tp.m[pi][n]);
        }
        Ok(row)
    })?;

    let mut entries = Vec::new();
    let mut column = vec![0.0; per_path.len()];
    for k in 0..d {
        for (r, row) in per_path.iter().enumerate() {
            column[r] = row[k];
        }
        let (mean, se) = mean_se(&column);
        entries.push(MartingaleFlag {
            quantity: format!("discounted_asset_{}", k + 1),
            mean,
            se,
            flagged: mean.abs() > 3.0 * se,
        });
    }
    for (pi, &(i, j)) in pairs.iter().enumerate() {
        for (r, row) in per_path.iter().enumerate() {
            column[r] = row[d + pi];
        }
        let (mean, se) = mean_se(&column);
        entries.push(MartingaleFlag {
            quantity: format!("transition_martingale_{i}_{j}"),
            mean,
            se,
            flagged: mean.abs() > 3.0 * se && se > 0.0,
        });
    }

    Ok(DiagnosticReport {
        n_paths: spec.n_paths,
        entries,
    })
}
