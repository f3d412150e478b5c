//! Market and claim specifications.
//!
//! A [`MarketModel`] bundles the coefficient functions of the state SDE
//!
//! ```text
//! dY_u = μ_Y(u, Y, C) du + σ_Y(u, Y, C) dW_u + ∫ F_Y(u, Y, C, x) Π̃(dx, du)
//!        + Σ_{i≠j} ρ_Y^{i,j}(u, Y) 1_i(C_u-) (dN^{i,j} - λ^{i,j}(u, Y) du)
//! ```
//!
//! together with the rating set, dimensions, the Lévy measure of `Π` and a
//! declared bound on the transition intensities. The first `d` components of
//! `Y` are traded assets `S`, the remaining `p` are non-traded factors `R`.
//! The bank account follows `dB = r(u, R, C) B du`, and the drift of traded
//! assets is restricted to `μ_S = S ∘ r` so that discounted prices are
//! martingales.
//!
//! All specifications are immutable after construction and safe to share
//! across worker threads; coefficient evaluations must be pure.

pub mod dividend;
pub mod levy;
pub mod presets;
pub mod validate;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
pub use dividend::{ClosureDividend, DividendSpec, DividendStream, SemimartingaleDividendSpec};
pub use levy::{gauss_legendre, LevyAtom, LevyMeasure, QuadratureOptions};
pub use presets::{preset_dividend, preset_model, preset_names};
pub use validate::{
    validate_dividend, validate_model, validate_semimartingale_dividend, AssumptionCheck,
    SamplePlan, ValidationReport,
};

/// Rating/regime labels `1..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeSet {
    count: usize,
}

impl RegimeSet {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidSpec("regime count must be >= 1".into()));
        }
        Ok(RegimeSet { count })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, c: usize) -> bool {
        (1..=self.count).contains(&c)
    }

    /// Labels `1..=K`.
    pub fn labels(&self) -> impl DoubleEndedIterator<Item = usize> {
        1..=self.count
    }

    /// Ordered pairs `(i, j)` with `i != j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let k = self.count;
        (1..=k).flat_map(move |i| (1..=k).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// Index of the ordered pair `(i, j)` in a flat `K·(K-1)` layout.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && self.contains(i) && self.contains(j));
        (i - 1) * (self.count - 1) + if j > i { j - 2 } else { j - 1 }
    }

    pub fn pair_count(&self) -> usize {
        self.count * (self.count - 1)
    }
}

/// Dimensions of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Traded assets `d`.
    pub assets: usize,
    /// Non-traded factors `p`.
    pub factors: usize,
    /// Driving Wiener dimension.
    pub wiener: usize,
    /// Dimension of the Lévy mark space.
    pub levy: usize,
}

impl ModelDims {
    pub fn state(&self) -> usize {
        self.assets + self.factors
    }
}

/// Coefficient functions of the state SDE. Implementations must be pure.
///
/// `z` is the full state vector `(s, r)` of length `d + p`; `c` is a regime
/// label in `1..=K`.
pub trait Dynamics: Send + Sync {
    /// Short rate `r(u, r, c)`; `factors` is the factor block of the state.
    fn short_rate(&self, u: f64, factors: &[f64], c: usize) -> f64;

    /// Drift `μ_Y(u, z, c)` written into `out` (length `d + p`).
    fn drift(&self, u: f64, z: &[f64], c: usize, out: &mut [f64]);

    /// Diffusion `σ_Y(u, z, c)`, a `(d+p) × r_W` matrix written into `out`.
    fn diffusion(&self, u: f64, z: &[f64], c: usize, out: &mut DMatrix<f64>);

    /// Jump coefficient `F_Y(u, z, c, x)` written into `out`.
    fn jump_coeff(&self, u: f64, z: &[f64], c: usize, x: &[f64], out: &mut [f64]);

    /// Regime-switch jump `ρ_Y^{i,j}(u, z)` written into `out`.
    fn regime_jump(&self, u: f64, z: &[f64], i: usize, j: usize, out: &mut [f64]);

    /// Transition intensity `λ^{i,j}(u, z) >= 0`.
    fn intensity(&self, u: f64, z: &[f64], i: usize, j: usize) -> f64;

    /// Whether `F_Y(u, z, c, ·)` is independent of `u`. Lets the PIDE solver
    /// cache jump-shift stencils across time levels.
    fn time_invariant_jumps(&self) -> bool {
        false
    }

    /// Optional fast path for `∫ F_Y(u, z, c, x) ν(dx)`; returns `false` to
    /// fall back to node-table integration.
    fn jump_compensator(&self, _u: f64, _z: &[f64], _c: usize, _out: &mut [f64]) -> bool {
        false
    }
}

/// Coefficient hook built from closures, for custom models and tests.
#[allow(clippy::type_complexity)]
pub struct ClosureDynamics {
    pub short_rate: Box<dyn Fn(f64, &[f64], usize) -> f64 + Send + Sync>,
    pub drift: Box<dyn Fn(f64, &[f64], usize, &mut [f64]) + Send + Sync>,
    pub diffusion: Box<dyn Fn(f64, &[f64], usize, &mut DMatrix<f64>) + Send + Sync>,
    pub jump_coeff: Box<dyn Fn(f64, &[f64], usize, &[f64], &mut [f64]) + Send + Sync>,
    pub regime_jump: Box<dyn Fn(f64, &[f64], usize, usize, &mut [f64]) + Send + Sync>,
    pub intensity: Box<dyn Fn(f64, &[f64], usize, usize) -> f64 + Send + Sync>,
    pub time_invariant_jumps: bool,
}

impl ClosureDynamics {
    /// All-zero coefficients; override fields as needed.
    pub fn zeroed() -> Self {
        ClosureDynamics {
            short_rate: Box::new(|_, _, _| 0.0),
            drift: Box::new(|_, _, _, out| out.fill(0.0)),
            diffusion: Box::new(|_, _, _, out| out.fill(0.0)),
            jump_coeff: Box::new(|_, _, _, _, out| out.fill(0.0)),
            regime_jump: Box::new(|_, _, _, _, out| out.fill(0.0)),
            intensity: Box::new(|_, _, _, _| 0.0),
            time_invariant_jumps: true,
        }
    }
}

impl Dynamics for ClosureDynamics {
    fn short_rate(&self, u: f64, factors: &[f64], c: usize) -> f64 {
        (self.short_rate)(u, factors, c)
    }
    fn drift(&self, u: f64, z: &[f64], c: usize, out: &mut [f64]) {
        (self.drift)(u, z, c, out)
    }
    fn diffusion(&self, u: f64, z: &[f64], c: usize, out: &mut DMatrix<f64>) {
        (self.diffusion)(u, z, c, out)
    }
    fn jump_coeff(&self, u: f64, z: &[f64], c: usize, x: &[f64], out: &mut [f64]) {
        (self.jump_coeff)(u, z, c, x, out)
    }
    fn regime_jump(&self, u: f64, z: &[f64], i: usize, j: usize, out: &mut [f64]) {
        (self.regime_jump)(u, z, i, j, out)
    }
    fn intensity(&self, u: f64, z: &[f64], i: usize, j: usize) -> f64 {
        (self.intensity)(u, z, i, j)
    }
    fn time_invariant_jumps(&self) -> bool {
        self.time_invariant_jumps
    }
}

/// A fully specified market: the single source of truth for one market.
#[derive(Clone)]
pub struct MarketModel {
    pub name: String,
    pub regimes: RegimeSet,
    pub dims: ModelDims,
    pub levy: LevyMeasure,
    /// Declared bound for all `λ^{i,j}` over the working domain.
    pub lambda_bound: f64,
    dynamics: Arc<dyn Dynamics>,
}

impl std::fmt::Debug for MarketModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MarketModel")
            .field("name", &self.name)
            .field("regimes", &self.regimes.count())
            .field("dims", &self.dims)
            .field("levy_nodes", &self.levy.nodes().len())
            .field("lambda_bound", &self.lambda_bound)
            .finish()
    }
}

impl MarketModel {
    pub fn new(
        name: impl Into<String>,
        regimes: RegimeSet,
        dims: ModelDims,
        levy: LevyMeasure,
        lambda_bound: f64,
        dynamics: Arc<dyn Dynamics>,
    ) -> Result<Self> {
        levy.validate()?;
        if !levy.is_empty() && levy.dim() != dims.levy {
            return Err(Error::InvalidSpec(format!(
                "levy measure dimension {} != declared mark dimension {}",
                levy.dim(),
                dims.levy
            )));
        }
        if dims.assets == 0 {
            return Err(Error::InvalidSpec("need at least one traded asset".into()));
        }
        Ok(MarketModel {
            name: name.into(),
            regimes,
            dims,
            levy,
            lambda_bound,
            dynamics,
        })
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn short_rate(&self, u: f64, z: &[f64], c: usize) -> f64 {
        self.dynamics.short_rate(u, &z[self.dims.assets..], c)
    }

    pub fn drift_into(&self, u: f64, z: &[f64], c: usize, out: &mut [f64]) {
        self.dynamics.drift(u, z, c, out);
    }

    pub fn diffusion_into(&self, u: f64, z: &[f64], c: usize, out: &mut DMatrix<f64>) {
        self.dynamics.diffusion(u, z, c, out);
    }

    pub fn diffusion(&self, u: f64, z: &[f64], c: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dims.state(), self.dims.wiener);
        self.dynamics.diffusion(u, z, c, &mut m);
        m
    }

    pub fn jump_into(&self, u: f64, z: &[f64], c: usize, x: &[f64], out: &mut [f64]) {
        self.dynamics.jump_coeff(u, z, c, x, out);
    }

    pub fn regime_jump_into(&self, u: f64, z: &[f64], i: usize, j: usize, out: &mut [f64]) {
        self.dynamics.regime_jump(u, z, i, j, out);
    }

    pub fn intensity(&self, u: f64, z: &[f64], i: usize, j: usize) -> f64 {
        self.dynamics.intensity(u, z, i, j)
    }

    /// Total exit intensity `Σ_{j≠c} λ^{c,j}(u, z)`.
    pub fn total_intensity(&self, u: f64, z: &[f64], c: usize) -> f64 {
        self.regimes
            .labels()
            .filter(|&j| j != c)
            .map(|j| self.dynamics.intensity(u, z, c, j))
            .sum()
    }

    /// `∫ F_Y(u, z, c, x) ν(dx)`, using the dynamics' fast path if present.
    pub fn levy_compensator_into(&self, u: f64, z: &[f64], c: usize, out: &mut [f64]) -> Result<()> {
        if self.dynamics.jump_compensator(u, z, c, out) {
            return Ok(());
        }
        let dyn_ref = &self.dynamics;
        self.levy
            .integrate_vec(out, |x, buf| dyn_ref.jump_coeff(u, z, c, x, buf))
    }

    /// Effective Euler drift: `μ_Y - ∫ F_Y ν - Σ_{j≠c} ρ_Y^{c,j} λ^{c,j}`,
    /// i.e. the drift once both compensated noise terms are split off.
    /// `scratch` must have length `d + p`.
    pub fn effective_drift_into(
        &self,
        u: f64,
        z: &[f64],
        c: usize,
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<()> {
        self.dynamics.drift(u, z, c, out);
        if !self.levy.is_empty() {
            self.levy_compensator_into(u, z, c, scratch)?;
            for (o, b) in out.iter_mut().zip(scratch.iter()) {
                *o -= b;
            }
        }
        for j in self.regimes.labels() {
            if j == c {
                continue;
            }
            let lam = self.dynamics.intensity(u, z, c, j);
            if lam > 0.0 {
                self.dynamics.regime_jump(u, z, c, j, scratch);
                for (o, b) in out.iter_mut().zip(scratch.iter()) {
                    *o -= lam * b;
                }
            }
        }
        Ok(())
    }
}
