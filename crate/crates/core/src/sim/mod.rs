//! Euler–Maruyama simulation of the coupled state/rating process.
//!
//! Per step, with coefficients frozen at the left endpoint `(t_k, Y_k, C_k)`:
//! Gaussian increments drive the Wiener part; the jump measure is simulated
//! as a compound Poisson process with the total mass of the (truncated) Lévy
//! measure and marks drawn from the normalized node table; compensators of
//! both the jump measure and the rating transitions are folded into the
//! drift. Rating transitions are thinned against `λ^{i,j}(t_k, Y_k)` with at
//! most one transition per step, taking effect at the right node; the switch
//! jump `ρ_Y^{i,j}` is applied to the pre-switch (left-limit) state.
//!
//! Paths are deterministic functions of `(master seed, path index)`: per-path
//! generators are independent ChaCha streams, so ensembles are bit-identical
//! regardless of how many worker threads simulate them.

pub mod diagnostics;
pub mod export;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::MarketModel;

pub use diagnostics::{
    bank_account, martingale_diagnostic, transition_processes, DiagnosticReport, MartingaleFlag,
    TransitionProcesses,
};
pub use export::{write_paths_csv, write_transitions_csv};

/// Uniform time grid on `[t0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t0 < t_end) || n_steps == 0 {
            return Err(Error::InvalidSpec(
                "time grid needs t0 < t_end and at least one step".into(),
            ));
        }
        Ok(TimeGrid { t0, t_end, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.t_end
        } else {
            self.t0 + (self.t_end - self.t0) * (k as f64 / self.n_steps as f64)
        }
    }
}

/// A Poisson-measure jump: fired during `step`, at continuous time `time`,
/// with mark `x`.
#[derive(Debug, Clone)]
pub struct JumpEvent {
    pub time: f64,
    pub step: usize,
    pub mark: Vec<f64>,
}

/// A rating transition fired during `step`, taking effect at node `step + 1`.
#[derive(Debug, Clone, Copy)]
pub struct TransitionEvent {
    pub time: f64,
    pub step: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimWarning {
    /// Total transition intensity times step exceeded 0.5 at some node.
    StepTooCoarse { time: f64, intensity_dt: f64 },
}

/// One simulated trajectory of `(Y, C, B)` with full jump and transition
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct Path {
    pub index: usize,
    pub grid: TimeGrid,
    pub dim: usize,
    pub wiener: usize,
    /// Node states, row-major `n_nodes × dim`.
    pub states: Vec<f64>,
    pub regimes: Vec<usize>,
    /// Bank account along the path, `B_{t0} = 1`.
    pub bank: Vec<f64>,
    /// Wiener increments, row-major `n_steps × wiener`.
    pub dw: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub transitions: Vec<TransitionEvent>,
    pub warnings: Vec<SimWarning>,
}

impl Path {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn dw_at(&self, k: usize) -> &[f64] {
        &self.dw[k * self.wiener..(k + 1) * self.wiener]
    }

    /// Marks of jumps fired during step `k`.
    pub fn jumps_in_step(&self, k: usize) -> impl Iterator<Item = &JumpEvent> {
        self.jumps.iter().filter(move |j| j.step == k)
    }

    pub fn transition_in_step(&self, k: usize) -> Option<&TransitionEvent> {
        self.transitions.iter().find(|t| t.step == k)
    }
}

/// Ensemble specification: everything needed to (re)produce the paths.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub model: MarketModel,
    pub y0: Vec<f64>,
    pub c0: usize,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    /// Antithetic pairing: paths `(2k, 2k+1)` share one generator stream
    /// with the Gaussian increments of the odd path negated.
    pub antithetic: bool,
}

/// A materialized ensemble. For large path counts prefer
/// [`EnsembleSpec::map_paths`], which streams one path per worker.
#[derive(Debug)]
pub struct PathEnsemble {
    pub spec: EnsembleSpec,
    pub paths: Vec<Path>,
}

impl EnsembleSpec {
    pub fn new(
        model: MarketModel,
        y0: Vec<f64>,
        c0: usize,
        grid: TimeGrid,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        if y0.len() != model.dims.state() {
            return Err(Error::InvalidSpec(format!(
                "initial state has dimension {}, model needs {}",
                y0.len(),
                model.dims.state()
            )));
        }
        if !model.regimes.contains(c0) {
            return Err(Error::InvalidSpec(format!("initial regime {c0} out of range")));
        }
        if n_paths == 0 {
            return Err(Error::InvalidSpec("need at least one path".into()));
        }
        Ok(EnsembleSpec {
            model,
            y0,
            c0,
            grid,
            n_paths,
            seed,
            antithetic: false,
        })
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    /// Simulates path `index` from scratch; bit-identical for fixed
    /// `(seed, index)`.
    pub fn simulate_one(&self, index: usize) -> Result<Path> {
        let sampler = MarkSampler::new(&self.model);
        self.simulate_with_sampler(index, &sampler)
    }

    fn simulate_with_sampler(&self, index: usize, sampler: &MarkSampler) -> Result<Path> {
        let (stream, negate) = if self.antithetic {
            (index / 2, index % 2 == 1)
        } else {
            (index, false)
        };
        simulate_path(
            &self.model,
            &self.y0,
            self.c0,
            &self.grid,
            self.seed,
            index,
            stream,
            negate,
            sampler,
        )
    }

    /// Materializes the whole ensemble (paths in index order).
    pub fn simulate(&self) -> Result<PathEnsemble> {
        let paths = self.map_paths(|p| Ok(p.clone()))?;
        Ok(PathEnsemble {
            spec: self.clone(),
            paths,
        })
    }

    /// Applies `f` to every path, one transient path per worker, and returns
    /// the results in path-index order. The ordered collection makes every
    /// downstream reduction independent of thread scheduling.
    pub fn map_paths<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&Path) -> Result<T> + Sync,
    {
        let sampler = MarkSampler::new(&self.model);
        (0..self.n_paths)
            .into_par_iter()
            .map(|i| {
                let path = self.simulate_with_sampler(i, &sampler)?;
                f(&path)
            })
            .collect()
    }
}

/// Draws marks from the normalized node table of the model's Lévy measure,
/// so simulation and quadrature share one and the same discrete measure.
pub struct MarkSampler {
    cumulative: Vec<f64>,
    points: Vec<Vec<f64>>,
    total: f64,
}

impl MarkSampler {
    pub fn new(model: &MarketModel) -> Self {
        let nodes = model.levy.nodes();
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut points = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        for a in nodes {
            acc += a.weight;
            cumulative.push(acc);
            points.push(a.point.clone());
        }
        MarkSampler {
            cumulative,
            points,
            total: acc,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> &[f64] {
        let u: f64 = rng.random::<f64>() * self.total;
        let idx = self.cumulative.partition_point(|&c| c < u);
        &self.points[idx.min(self.points.len() - 1)]
    }
}

fn path_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64 + 1);
    rng
}

#[allow(clippy::too_many_arguments)]
fn simulate_path(
    model: &MarketModel,
    y0: &[f64],
    c0: usize,
    grid: &TimeGrid,
    seed: u64,
    index: usize,
    stream: usize,
    negate_gaussians: bool,
    sampler: &MarkSampler,
) -> Result<Path> {
    let dim = model.dims.state();
    let r_w = model.dims.wiener;
    let n_steps = grid.n_steps();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let gauss_sign = if negate_gaussians { -1.0 } else { 1.0 };
    let mut rng = path_rng(seed, stream);

    let mut path = Path {
        index,
        grid: *grid,
        dim,
        wiener: r_w,
        states: Vec::with_capacity(grid.n_nodes() * dim),
        regimes: Vec::with_capacity(grid.n_nodes()),
        bank: Vec::with_capacity(grid.n_nodes()),
        dw: vec![0.0; n_steps * r_w],
        jumps: Vec::new(),
        transitions: Vec::new(),
        warnings: Vec::new(),
    };
    path.states.extend_from_slice(y0);
    path.regimes.push(c0);
    path.bank.push(1.0);

    let jump_mass = sampler.total_mass();
    // Next arrival of the compound Poisson jump clock.
    let mut next_jump = if jump_mass > 0.0 {
        grid.t0() + rng.sample::<f64, _>(Exp1) / jump_mass
    } else {
        f64::INFINITY
    };

    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; dim];
    let mut c = c0;
    let mut bank = 1.0;
    let mut drift = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut sigma = nalgebra::DMatrix::zeros(dim, r_w);
    let mut jump_buf = vec![0.0; dim];
    let mut coarse_warned = false;

    for k in 0..n_steps {
        let t = grid.node(k);
        let t_next = grid.node(k + 1);

        // Bank account accrues on left-endpoint values.
        bank *= (model.short_rate(t, &y, c) * dt).exp();

        model.effective_drift_into(t, &y, c, &mut drift, &mut scratch)?;
        model.diffusion_into(t, &y, c, &mut sigma);

        y_new.copy_from_slice(&y);
        for (i, yi) in y_new.iter_mut().enumerate() {
            *yi += drift[i] * dt;
        }
        for w in 0..r_w {
            let z: f64 = rng.sample(StandardNormal);
            let dw = gauss_sign * sqrt_dt * z;
            path.dw[k * r_w + w] = dw;
            for i in 0..dim {
                y_new[i] += sigma[(i, w)] * dw;
            }
        }

        // Poisson-measure jumps inside (t, t_next]; marks from the shared
        // node table, jump coefficient frozen at the left endpoint.
        while next_jump <= t_next {
            let mark = sampler.draw(&mut rng).to_vec();
            model.jump_into(t, &y, c, &mark, &mut jump_buf);
            for i in 0..dim {
                y_new[i] += jump_buf[i];
            }
            path.jumps.push(JumpEvent {
                time: next_jump,
                step: k,
                mark,
            });
            next_jump += rng.sample::<f64, _>(Exp1) / jump_mass;
        }

        // Rating transition by thinning; at most one per step, effective at
        // the right node. The switch jump sees the pre-switch state.
        let total_lambda = model.total_intensity(t, &y, c);
        if total_lambda > 0.0 {
            let p_any = total_lambda * dt;
            if p_any > 0.5 && !coarse_warned {
                path.warnings.push(SimWarning::StepTooCoarse {
                    time: t,
                    intensity_dt: p_any,
                });
                coarse_warned = true;
            }
            let u: f64 = rng.random();
            if u < p_any {
                let mut acc = 0.0;
                let mut target = c;
                for j in model.regimes.labels() {
                    if j == c {
                        continue;
                    }
                    acc += model.intensity(t, &y, c, j) * dt;
                    if u < acc {
                        target = j;
                        break;
                    }
                }
                if target == c {
                    // Rounding on the channel boundary: attribute to the last
                    // channel with positive intensity.
                    for j in model.regimes.labels().rev() {
                        if j != c && model.intensity(t, &y, c, j) > 0.0 {
                            target = j;
                            break;
                        }
                    }
                }
                if target != c {
                    model.regime_jump_into(t_next, &y_new, c, target, &mut jump_buf);
                    for i in 0..dim {
                        y_new[i] += jump_buf[i];
                    }
                    path.transitions.push(TransitionEvent {
                        time: t_next,
                        step: k,
                        from: c,
                        to: target,
                    });
                    c = target;
                }
            }
        }

        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::PathBlowup {
                path: index,
                time: t_next,
            });
        }

        std::mem::swap(&mut y, &mut y_new);
        path.states.extend_from_slice(&y);
        path.regimes.push(c);
        path.bank.push(bank);
    }

    Ok(path)
}

/// Mean and standard error of a sample, reduced sequentially in index order.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
