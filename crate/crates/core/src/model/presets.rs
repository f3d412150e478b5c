//! Registry of parametric market and payment-stream families.
//!
//! Model families:
//! - `black_scholes`: single regime, pure diffusion, `dS = S (r dt + σ dW)`
//! - `merton_jump`: single regime exponential Lévy, Gaussian jump sizes
//! - `exp_levy_regime`: regime-switching exponential Lévy,
//!   `dS = S_-(r(c) dt + σ(c) dW + ∫ (e^{σ(c) x} - 1) Π̃ + Σ (e^{ρ^{i,j}} - 1) dM^{i,j})`
//! - `stochvol_exp_levy`: exponential Lévy with a diffusive volatility factor
//! - `semi_markov_exp_levy`: exponential Lévy where transition intensities
//!   depend on the time-since-last-switch clock factor
//!   `dR¹ = dt - Σ R¹_- 1_i(C_-) dN^{i,j}`
//!
//! Parameters arrive as JSON values (the CLI feeds parsed TOML/JSON straight
//! through); each family deserializes its own typed parameter struct.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::dividend::{ClosureDividend, DividendSpec};
use super::levy::LevyMeasure;
use super::{Dynamics, MarketModel, ModelDims, RegimeSet};
use crate::error::{Error, Result};

pub fn preset_names() -> &'static [&'static str] {
    &[
        "black_scholes",
        "merton_jump",
        "exp_levy_regime",
        "stochvol_exp_levy",
        "semi_markov_exp_levy",
    ]
}

pub fn dividend_names() -> &'static [&'static str] {
    &[
        "call",
        "put",
        "bond",
        "annuity",
        "rating_call",
        "gaussian_bump",
        "compensated_transition",
    ]
}

/// Builds a preset market model. Returns the model and, for families that
/// carry a natural claim, its payment stream (none of the current families
/// do).
pub fn preset_model(
    name: &str,
    params: &serde_json::Value,
) -> Result<(MarketModel, Option<DividendSpec>)> {
    let model = match name {
        "black_scholes" => black_scholes(parse(name, params)?)?,
        "merton_jump" => merton_jump(parse(name, params)?)?,
        "exp_levy_regime" => exp_levy_regime(parse(name, params)?)?,
        "stochvol_exp_levy" => stochvol_exp_levy(parse(name, params)?)?,
        "semi_markov_exp_levy" => semi_markov_exp_levy(parse(name, params)?)?,
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok((model, None))
}

fn parse<T: serde::de::DeserializeOwned>(family: &str, params: &serde_json::Value) -> Result<T> {
    serde_json::from_value(params.clone())
        .map_err(|e| Error::invalid_params(family, e.to_string()))
}

fn square_matrix(family: &str, name: &str, m: &[Vec<f64>], k: usize) -> Result<()> {
    if m.len() != k || m.iter().any(|row| row.len() != k) {
        return Err(Error::invalid_params(
            family,
            format!("{name} must be a {k}x{k} matrix"),
        ));
    }
    Ok(())
}

fn check_nonnegative(family: &str, name: &str, m: &[Vec<f64>]) -> Result<()> {
    if m.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid_params(
            family,
            format!("{name} entries must be finite and nonnegative"),
        ));
    }
    Ok(())
}

fn gaussian_levy(
    family: &str,
    mass: f64,
    mean: f64,
    std: f64,
) -> Result<LevyMeasure> {
    if mass == 0.0 {
        return Ok(LevyMeasure::none());
    }
    if mass < 0.0 || std <= 0.0 {
        return Err(Error::invalid_params(
            family,
            "jump_mass must be >= 0 and jump_std > 0",
        ));
    }
    LevyMeasure::gaussian_1d(mass, mean, std)
}

/// Numerical surrogate for `∫_{|x|>1} e^{a x} ν(dx) < ∞`: on the node table,
/// contributions of the outer shells must decay. Divergent exponential
/// moments show up as geometrically growing shell sums.
fn exp_moment_converges(levy: &LevyMeasure, a: f64) -> bool {
    if levy.is_empty() || levy.is_finite_support() {
        return true;
    }
    let nodes = levy.nodes();
    let rmax = nodes
        .iter()
        .map(|n| n.point[0].abs())
        .fold(0.0f64, f64::max);
    if rmax <= 1.0 {
        return true;
    }
    let shell = |lo: f64, hi: f64| -> f64 {
        nodes
            .iter()
            .filter(|n| {
                let r = n.point[0].abs();
                r > lo && r <= hi
            })
            .map(|n| n.weight * (a * n.point[0]).exp())
            .sum()
    };
    let r0 = 1.0f64.max(0.6 * rmax);
    let s1 = shell(r0, 0.5 * (r0 + rmax));
    let s2 = shell(0.5 * (r0 + rmax), rmax);
    s2.is_finite() && s1.is_finite() && s2 <= s1.max(1e-300)
}

// ---------------------------------------------------------------------------
// black_scholes
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlackScholesParams {
    sigma: f64,
    rate: f64,
}

struct BlackScholesDynamics {
    sigma: f64,
    rate: f64,
}

impl Dynamics for BlackScholesDynamics {
    fn short_rate(&self, _u: f64, _factors: &[f64], _c: usize) -> f64 {
        self.rate
    }
    fn drift(&self, _u: f64, z: &[f64], _c: usize, out: &mut [f64]) {
        out[0] = self.rate * z[0];
    }
    fn diffusion(&self, _u: f64, z: &[f64], _c: usize, out: &mut DMatrix<f64>) {
        out[(0, 0)] = self.sigma * z[0];
    }
    fn jump_coeff(&self, _u: f64, _z: &[f64], _c: usize, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn regime_jump(&self, _u: f64, _z: &[f64], _i: usize, _j: usize, out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn intensity(&self, _u: f64, _z: &[f64], _i: usize, _j: usize) -> f64 {
        0.0
    }
    fn time_invariant_jumps(&self) -> bool {
        true
    }
}

fn black_scholes(p: BlackScholesParams) -> Result<MarketModel> {
    if p.sigma < 0.0 {
        return Err(Error::invalid_params("black_scholes", "sigma must be >= 0"));
    }
    MarketModel::new(
        "black_scholes",
        RegimeSet::new(1)?,
        ModelDims {
            assets: 1,
            factors: 0,
            wiener: 1,
            levy: 1,
        },
        LevyMeasure::none(),
        0.0,
        Arc::new(BlackScholesDynamics {
            sigma: p.sigma,
            rate: p.rate,
        }),
    )
}

// ---------------------------------------------------------------------------
// exponential Lévy with regime switching (covers merton_jump with K = 1)
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MertonParams {
    sigma: f64,
    rate: f64,
    jump_mass: f64,
    jump_mean: f64,
    jump_std: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpLevyRegimeParams {
    regimes: usize,
    /// Diffusive loading `σ(c)` per regime; also the jump-exponent loading
    /// unless `jump_loading` overrides it.
    sigma: Vec<f64>,
    /// Short rate per regime.
    rate: Vec<f64>,
    /// Log jump sizes `ρ^{i,j}` of the asset at an `i -> j` switch.
    rho: Vec<Vec<f64>>,
    /// Constant transition intensities `λ^{i,j}`.
    lambda: Vec<Vec<f64>>,
    #[serde(default)]
    jump_mass: f64,
    #[serde(default)]
    jump_mean: f64,
    #[serde(default = "default_jump_std")]
    jump_std: f64,
    /// Per-regime coefficient `β(c)` in the jump factor `e^{β(c) x} - 1`;
    /// defaults to `sigma`.
    #[serde(default)]
    jump_loading: Option<Vec<f64>>,
    /// Growth order used in the exponential-moment admissibility check.
    #[serde(default = "default_growth_order")]
    growth_order: u32,
}

fn default_jump_std() -> f64 {
    0.1
}
fn default_growth_order() -> u32 {
    1
}

/// `dS = S_-(r(c) dt + σ(c) dW + ∫ (e^{β(c)x} - 1) Π̃ + Σ (e^{ρ^{i,j}} - 1) dM^{i,j})`.
struct ExpLevyRegimeDynamics {
    sigma: Vec<f64>,
    rate: Vec<f64>,
    jump_loading: Vec<f64>,
    rho_factor: Vec<Vec<f64>>, // e^{ρ^{i,j}} - 1
    lambda: Vec<Vec<f64>>,
    /// Precomputed `κ(c) = ∫ (e^{β(c)x} - 1) ν(dx)` on the node table.
    kappa: Vec<f64>,
}

impl Dynamics for ExpLevyRegimeDynamics {
    fn short_rate(&self, _u: f64, _factors: &[f64], c: usize) -> f64 {
        self.rate[c - 1]
    }
    fn drift(&self, _u: f64, z: &[f64], c: usize, out: &mut [f64]) {
        out[0] = self.rate[c - 1] * z[0];
    }
    fn diffusion(&self, _u: f64, z: &[f64], c: usize, out: &mut DMatrix<f64>) {
        out[(0, 0)] = self.sigma[c - 1] * z[0];
    }
    fn jump_coeff(&self, _u: f64, z: &[f64], c: usize, x: &[f64], out: &mut [f64]) {
        out[0] = z[0] * ((self.jump_loading[c - 1] * x[0]).exp() - 1.0);
    }
    fn regime_jump(&self, _u: f64, z: &[f64], i: usize, j: usize, out: &mut [f64]) {
        out[0] = z[0] * self.rho_factor[i - 1][j - 1];
    }
    fn intensity(&self, _u: f64, _z: &[f64], i: usize, j: usize) -> f64 {
        self.lambda[i - 1][j - 1]
    }
    fn time_invariant_jumps(&self) -> bool {
        true
    }
    fn jump_compensator(&self, _u: f64, z: &[f64], c: usize, out: &mut [f64]) -> bool {
        out[0] = z[0] * self.kappa[c - 1];
        true
    }
}

fn merton_jump(p: MertonParams) -> Result<MarketModel> {
    // classic convention: the jump factor is e^x itself
    let q = ExpLevyRegimeParams {
        regimes: 1,
        sigma: vec![p.sigma],
        rate: vec![p.rate],
        rho: vec![vec![0.0]],
        lambda: vec![vec![0.0]],
        jump_mass: p.jump_mass,
        jump_mean: p.jump_mean,
        jump_std: p.jump_std,
        jump_loading: Some(vec![1.0]),
        growth_order: 1,
    };
    let mut m = exp_levy_regime(q)?;
    m.name = "merton_jump".into();
    Ok(m)
}

fn exp_levy_regime(p: ExpLevyRegimeParams) -> Result<MarketModel> {
    let family = "exp_levy_regime";
    let k = p.regimes;
    let regimes = RegimeSet::new(k)?;
    if p.sigma.len() != k || p.rate.len() != k {
        return Err(Error::invalid_params(family, "sigma/rate need one entry per regime"));
    }
    square_matrix(family, "rho", &p.rho, k)?;
    square_matrix(family, "lambda", &p.lambda, k)?;
    check_nonnegative(family, "lambda", &p.lambda)?;
    let levy = gaussian_levy(family, p.jump_mass, p.jump_mean, p.jump_std)?;
    let jump_loading = p.jump_loading.unwrap_or_else(|| p.sigma.clone());
    if jump_loading.len() != k {
        return Err(Error::invalid_params(family, "jump_loading needs one entry per regime"));
    }
    for (i, &s) in jump_loading.iter().enumerate() {
        if !exp_moment_converges(&levy, 2.0 * p.growth_order as f64 * s) {
            return Err(Error::invalid_params(
                family,
                format!("levy measure has divergent exponential moment for regime {}", i + 1),
            ));
        }
    }
    let kappa = jump_loading
        .iter()
        .map(|&s| levy.integrate(|x| (s * x[0]).exp() - 1.0))
        .collect::<Result<Vec<_>>>()?;
    let lambda_bound = p.lambda.iter().flatten().cloned().fold(0.0, f64::max);
    let rho_factor = p
        .rho
        .iter()
        .map(|row| row.iter().map(|&r| r.exp() - 1.0).collect())
        .collect();
    MarketModel::new(
        family,
        regimes,
        ModelDims {
            assets: 1,
            factors: 0,
            wiener: 1,
            levy: 1,
        },
        levy,
        lambda_bound,
        Arc::new(ExpLevyRegimeDynamics {
            sigma: p.sigma,
            rate: p.rate,
            jump_loading,
            rho_factor,
            lambda: p.lambda,
            kappa,
        }),
    )
}

// ---------------------------------------------------------------------------
// stochastic-volatility exponential Lévy
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StochVolParams {
    regimes: usize,
    /// Base volatility per regime; effective loading is
    /// `Σ(r, c) = sigma0(c) (1 + alpha tanh(r))`.
    sigma0: Vec<f64>,
    #[serde(default)]
    alpha: f64,
    /// Factor mean reversion `dR = kappa (theta - R) dt + xi dW̃`.
    kappa: f64,
    theta: f64,
    xi: f64,
    /// Correlation between the asset and factor Brownian drivers.
    #[serde(default)]
    rho_corr: f64,
    rate: Vec<f64>,
    /// Log asset jump `P^{i,j}` at a regime switch.
    p_jump: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    #[serde(default)]
    jump_mass: f64,
    #[serde(default)]
    jump_mean: f64,
    #[serde(default = "default_jump_std")]
    jump_std: f64,
}

struct StochVolDynamics {
    sigma0: Vec<f64>,
    alpha: f64,
    kappa: f64,
    theta: f64,
    xi: f64,
    rho_corr: f64,
    rate: Vec<f64>,
    p_factor: Vec<Vec<f64>>, // e^{P^{i,j}} - 1
    lambda: Vec<Vec<f64>>,
    /// κ(Σ) = ∫ (e^{Σ x} - 1) ν(dx) tabulated over the reachable Σ range.
    kappa_table: Option<KappaTable>,
}

struct KappaTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl KappaTable {
    fn build(levy: &LevyMeasure, lo: f64, hi: f64, samples: usize) -> Result<Self> {
        let step = (hi - lo) / (samples - 1) as f64;
        let values = (0..samples)
            .map(|k| {
                let s = lo + k as f64 * step;
                levy.integrate(|x| (s * x[0]).exp() - 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KappaTable { lo, step, values })
    }

    fn eval(&self, s: f64) -> f64 {
        let t = ((s - self.lo) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let k = (t as usize).min(self.values.len() - 2);
        let w = t - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}

impl StochVolDynamics {
    fn vol_loading(&self, r: f64, c: usize) -> f64 {
        self.sigma0[c - 1] * (1.0 + self.alpha * r.tanh())
    }
}

impl Dynamics for StochVolDynamics {
    fn short_rate(&self, _u: f64, _factors: &[f64], c: usize) -> f64 {
        self.rate[c - 1]
    }
    fn drift(&self, _u: f64, z: &[f64], c: usize, out: &mut [f64]) {
        out[0] = self.rate[c - 1] * z[0];
        out[1] = self.kappa * (self.theta - z[1]);
    }
    fn diffusion(&self, _u: f64, z: &[f64], c: usize, out: &mut DMatrix<f64>) {
        let vol = self.vol_loading(z[1], c);
        out[(0, 0)] = vol * z[0];
        out[(0, 1)] = 0.0;
        out[(1, 0)] = self.xi * self.rho_corr;
        out[(1, 1)] = self.xi * (1.0 - self.rho_corr * self.rho_corr).sqrt();
    }
    fn jump_coeff(&self, _u: f64, z: &[f64], c: usize, x: &[f64], out: &mut [f64]) {
        let vol = self.vol_loading(z[1], c);
        out[0] = z[0] * ((vol * x[0]).exp() - 1.0);
        out[1] = 0.0;
    }
    fn regime_jump(&self, _u: f64, z: &[f64], i: usize, j: usize, out: &mut [f64]) {
        out[0] = z[0] * self.p_factor[i - 1][j - 1];
        out[1] = 0.0;
    }
    fn intensity(&self, _u: f64, _z: &[f64], i: usize, j: usize) -> f64 {
        self.lambda[i - 1][j - 1]
    }
    fn time_invariant_jumps(&self) -> bool {
        true
    }
    fn jump_compensator(&self, _u: f64, z: &[f64], c: usize, out: &mut [f64]) -> bool {
        match &self.kappa_table {
            Some(t) => {
                out[0] = z[0] * t.eval(self.vol_loading(z[1], c));
                out[1] = 0.0;
                true
            }
            None => {
                out[0] = 0.0;
                out[1] = 0.0;
                true
            }
        }
    }
}

fn stochvol_exp_levy(p: StochVolParams) -> Result<MarketModel> {
    let family = "stochvol_exp_levy";
    let k = p.regimes;
    let regimes = RegimeSet::new(k)?;
    if p.sigma0.len() != k || p.rate.len() != k {
        return Err(Error::invalid_params(family, "sigma0/rate need one entry per regime"));
    }
    if p.alpha.abs() >= 1.0 {
        return Err(Error::invalid_params(family, "|alpha| must be < 1"));
    }
    if p.rho_corr.abs() > 1.0 {
        return Err(Error::invalid_params(family, "|rho_corr| must be <= 1"));
    }
    square_matrix(family, "p_jump", &p.p_jump, k)?;
    square_matrix(family, "lambda", &p.lambda, k)?;
    check_nonnegative(family, "lambda", &p.lambda)?;
    let levy = gaussian_levy(family, p.jump_mass, p.jump_mean, p.jump_std)?;
    let sig_max = p.sigma0.iter().cloned().fold(0.0, f64::max) * (1.0 + p.alpha.abs());
    if !exp_moment_converges(&levy, 2.0 * sig_max) {
        return Err(Error::invalid_params(
            family,
            "levy measure has divergent exponential moment at the maximal volatility loading",
        ));
    }
    let kappa_table = if levy.is_empty() {
        None
    } else {
        Some(KappaTable::build(&levy, -1.05 * sig_max, 1.05 * sig_max, 512)?)
    };
    let lambda_bound = p.lambda.iter().flatten().cloned().fold(0.0, f64::max);
    let p_factor = p
        .p_jump
        .iter()
        .map(|row| row.iter().map(|&r| r.exp() - 1.0).collect())
        .collect();
    MarketModel::new(
        family,
        regimes,
        ModelDims {
            assets: 1,
            factors: 1,
            wiener: 2,
            levy: 1,
        },
        levy,
        lambda_bound,
        Arc::new(StochVolDynamics {
            sigma0: p.sigma0,
            alpha: p.alpha,
            kappa: p.kappa,
            theta: p.theta,
            xi: p.xi,
            rho_corr: p.rho_corr,
            rate: p.rate,
            p_factor,
            lambda: p.lambda,
            kappa_table,
        }),
    )
}

// ---------------------------------------------------------------------------
// semi-Markov regime switching
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SemiMarkovParams {
    regimes: usize,
    sigma: Vec<f64>,
    rate: Vec<f64>,
    /// Intensities `λ^{i,j}(clock) = base + slope (1 - e^{-clock})`.
    lambda_base: Vec<Vec<f64>>,
    lambda_slope: Vec<Vec<f64>>,
    #[serde(default)]
    jump_mass: f64,
    #[serde(default)]
    jump_mean: f64,
    #[serde(default = "default_jump_std")]
    jump_std: f64,
}

/// Exponential Lévy asset plus the time-since-last-switch clock factor:
/// between switches the clock grows at unit rate, at a switch it resets to
/// zero (`ρ_R^{i,j} = -R¹_-`). The asset itself does not jump at switches.
struct SemiMarkovDynamics {
    sigma: Vec<f64>,
    rate: Vec<f64>,
    lambda_base: Vec<Vec<f64>>,
    lambda_slope: Vec<Vec<f64>>,
    kappa: Vec<f64>,
}

impl SemiMarkovDynamics {
    fn lambda(&self, clock: f64, i: usize, j: usize) -> f64 {
        self.lambda_base[i - 1][j - 1]
            + self.lambda_slope[i - 1][j - 1] * (1.0 - (-clock.max(0.0)).exp())
    }

    fn total_lambda(&self, clock: f64, c: usize) -> f64 {
        let k = self.sigma.len();
        (1..=k)
            .filter(|&j| j != c)
            .map(|j| self.lambda(clock, c, j))
            .sum()
    }
}

impl Dynamics for SemiMarkovDynamics {
    fn short_rate(&self, _u: f64, _factors: &[f64], c: usize) -> f64 {
        self.rate[c - 1]
    }
    fn drift(&self, _u: f64, z: &[f64], c: usize, out: &mut [f64]) {
        out[0] = self.rate[c - 1] * z[0];
        // Clock drift in compensated form: the -R Σλ part cancels against the
        // compensator of the reset jumps, leaving unit growth between switches.
        out[1] = 1.0 - z[1] * self.total_lambda(z[1], c);
    }
    fn diffusion(&self, _u: f64, z: &[f64], c: usize, out: &mut DMatrix<f64>) {
        out[(0, 0)] = self.sigma[c - 1] * z[0];
        out[(1, 0)] = 0.0;
    }
    fn jump_coeff(&self, _u: f64, z: &[f64], c: usize, x: &[f64], out: &mut [f64]) {
        out[0] = z[0] * ((self.sigma[c - 1] * x[0]).exp() - 1.0);
        out[1] = 0.0;
    }
    fn regime_jump(&self, _u: f64, z: &[f64], _i: usize, _j: usize, out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = -z[1];
    }
    fn intensity(&self, _u: f64, z: &[f64], i: usize, j: usize) -> f64 {
        self.lambda(z[1], i, j)
    }
    fn time_invariant_jumps(&self) -> bool {
        true
    }
    fn jump_compensator(&self, _u: f64, z: &[f64], c: usize, out: &mut [f64]) -> bool {
        out[0] = z[0] * self.kappa[c - 1];
        out[1] = 0.0;
        true
    }
}

fn semi_markov_exp_levy(p: SemiMarkovParams) -> Result<MarketModel> {
    let family = "semi_markov_exp_levy";
    let k = p.regimes;
    let regimes = RegimeSet::new(k)?;
    if p.sigma.len() != k || p.rate.len() != k {
        return Err(Error::invalid_params(family, "sigma/rate need one entry per regime"));
    }
    square_matrix(family, "lambda_base", &p.lambda_base, k)?;
    square_matrix(family, "lambda_slope", &p.lambda_slope, k)?;
    check_nonnegative(family, "lambda_base", &p.lambda_base)?;
    check_nonnegative(family, "lambda_slope", &p.lambda_slope)?;
    let levy = gaussian_levy(family, p.jump_mass, p.jump_mean, p.jump_std)?;
    for &s in &p.sigma {
        if !exp_moment_converges(&levy, 2.0 * s) {
            return Err(Error::invalid_params(
                family,
                "levy measure has divergent exponential moment",
            ));
        }
    }
    let kappa = p
        .sigma
        .iter()
        .map(|&s| levy.integrate(|x| (s * x[0]).exp() - 1.0))
        .collect::<Result<Vec<_>>>()?;
    let lambda_bound = p
        .lambda_base
        .iter()
        .zip(&p.lambda_slope)
        .flat_map(|(b, s)| b.iter().zip(s).map(|(&b, &s)| b + s))
        .fold(0.0, f64::max);
    MarketModel::new(
        family,
        regimes,
        ModelDims {
            assets: 1,
            factors: 1,
            wiener: 1,
            levy: 1,
        },
        levy,
        lambda_bound,
        Arc::new(SemiMarkovDynamics {
            sigma: p.sigma,
            rate: p.rate,
            lambda_base: p.lambda_base,
            lambda_slope: p.lambda_slope,
            kappa,
        }),
    )
}

// ---------------------------------------------------------------------------
// payment-stream families
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VanillaParams {
    strike: f64,
    maturity: f64,
    #[serde(default = "default_asset")]
    asset: usize,
}

fn default_asset() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BondParams {
    maturity: f64,
    #[serde(default = "default_notional")]
    notional: f64,
}

fn default_notional() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnuityParams {
    maturity: f64,
    rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingCallParams {
    strike: f64,
    maturity: f64,
    #[serde(default = "default_asset")]
    asset: usize,
    /// Lump payment matrix `δ^{i,j}`, zero diagonal.
    transition: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianBumpParams {
    center: f64,
    width: f64,
    maturity: f64,
    #[serde(default = "default_asset")]
    asset: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompensatedTransitionParams {
    from: usize,
    to: usize,
    maturity: f64,
}

/// Builds a preset payment stream for `model`.
pub fn preset_dividend(
    name: &str,
    params: &serde_json::Value,
    model: &MarketModel,
) -> Result<DividendSpec> {
    match name {
        "call" => {
            let p: VanillaParams = parse(name, params)?;
            let k = asset_index(name, p.asset, model)?;
            Ok(DividendSpec::new(
                "call",
                p.maturity,
                1,
                Arc::new(ClosureDividend::terminal_only(move |y, _| {
                    (y[k] - p.strike).max(0.0)
                })),
            ))
        }
        "put" => {
            let p: VanillaParams = parse(name, params)?;
            let k = asset_index(name, p.asset, model)?;
            Ok(DividendSpec::new(
                "put",
                p.maturity,
                1,
                Arc::new(ClosureDividend::terminal_only(move |y, _| {
                    (p.strike - y[k]).max(0.0)
                })),
            ))
        }
        "bond" => {
            let p: BondParams = parse(name, params)?;
            Ok(DividendSpec::new(
                "bond",
                p.maturity,
                1,
                Arc::new(ClosureDividend::terminal_only(move |_, _| p.notional)),
            ))
        }
        "annuity" => {
            let p: AnnuityParams = parse(name, params)?;
            let mut d = ClosureDividend::zeroed();
            d.rate = Box::new(move |_, _, _| p.rate);
            Ok(DividendSpec::new("annuity", p.maturity, 1, Arc::new(d)))
        }
        "rating_call" => {
            let p: RatingCallParams = parse(name, params)?;
            let k = asset_index(name, p.asset, model)?;
            square_matrix(name, "transition", &p.transition, model.regimes.count())?;
            let strike = p.strike;
            let table = p.transition;
            let mut d = ClosureDividend::terminal_only(move |y, _| (y[k] - strike).max(0.0));
            d.transition = Box::new(move |_, _, i, j| table[i - 1][j - 1]);
            Ok(DividendSpec::new("rating_call", p.maturity, 1, Arc::new(d)))
        }
        "gaussian_bump" => {
            let p: GaussianBumpParams = parse(name, params)?;
            let k = asset_index(name, p.asset, model)?;
            if p.width <= 0.0 {
                return Err(Error::invalid_params(name, "width must be > 0"));
            }
            Ok(DividendSpec::new(
                "gaussian_bump",
                p.maturity,
                1,
                Arc::new(ClosureDividend::terminal_only(move |y, _| {
                    (-0.5 * ((y[k] - p.center) / p.width).powi(2)).exp()
                })),
            ))
        }
        // Pays 1 at each `from -> to` transition and charges the compensator
        // as a negative rate, so the discounted cumulated payments form a
        // zero-mean martingale (value identically zero).
        "compensated_transition" => {
            let p: CompensatedTransitionParams = parse(name, params)?;
            if !model.regimes.contains(p.from) || !model.regimes.contains(p.to) || p.from == p.to {
                return Err(Error::invalid_params(name, "need valid from != to regimes"));
            }
            let m = model.clone();
            let (from, to) = (p.from, p.to);
            let mut d = ClosureDividend::zeroed();
            d.transition = Box::new(move |_, _, i, j| if i == from && j == to { 1.0 } else { 0.0 });
            d.rate = Box::new(move |u, y, c| {
                if c == from {
                    -m.intensity(u, y, from, to)
                } else {
                    0.0
                }
            });
            Ok(DividendSpec::new(
                "compensated_transition",
                p.maturity,
                1,
                Arc::new(d),
            ))
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

fn asset_index(family: &str, asset: usize, model: &MarketModel) -> Result<usize> {
    if asset == 0 || asset > model.dims.assets {
        return Err(Error::invalid_params(
            family,
            format!("asset index {asset} out of range 1..={}", model.dims.assets),
        ));
    }
    Ok(asset - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn black_scholes_is_degenerate_single_regime() {
        let (m, d) = preset_model(
            "black_scholes",
            &serde_json::json!({"sigma": 0.2, "rate": 0.0}),
        )
        .unwrap();
        assert!(d.is_none());
        assert_eq!(m.regimes.count(), 1);
        assert!(m.levy.is_empty());
        assert_eq!(m.total_intensity(0.0, &[100.0], 1), 0.0);
        let mut mu = [0.0];
        m.drift_into(0.0, &[100.0], 1, &mut mu);
        assert_eq!(mu[0], 0.0);
    }

    #[test]
    fn exp_levy_regime_switch_jump_factors() {
        let (m, _) = preset_model(
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
        let s = 100.0;
        let mut jump = [0.0];
        m.regime_jump_into(0.0, &[s], 1, 2, &mut jump);
        assert_relative_eq!((s + jump[0]) / s, (-0.05f64).exp(), max_relative = 1e-14);
        m.regime_jump_into(0.0, &[s], 2, 1, &mut jump);
        assert_relative_eq!((s + jump[0]) / s, (0.05f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn exp_levy_discounted_drift_vanishes() {
        // Discounted drift μ_S - s r must be identically zero, probed on a grid.
        let (m, _) = preset_model(
            "exp_levy_regime",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.15, 0.35],
                "rate": [0.02, 0.07],
                "rho": [[0.0, -0.05], [0.05, 0.0]],
                "lambda": [[0.0, 1.0], [1.0, 0.0]],
                "jump_mass": 0.2,
                "jump_mean": -0.1,
                "jump_std": 0.15,
            }),
        )
        .unwrap();
        let mut mu = [0.0];
        for c in 1..=2 {
            for s in [1.0, 50.0, 100.0, 400.0] {
                for u in [0.0, 0.5, 1.0] {
                    m.drift_into(u, &[s], c, &mut mu);
                    let r = m.short_rate(u, &[s], c);
                    assert_relative_eq!(mu[0], s * r, max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn semi_markov_clock_reset_coefficients() {
        let (m, _) = preset_model(
            "semi_markov_exp_levy",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.2, 0.3],
                "rate": [0.0, 0.0],
                "lambda_base": [[0.0, 0.5], [0.5, 0.0]],
                "lambda_slope": [[0.0, 1.0], [1.0, 0.0]],
            }),
        )
        .unwrap();
        let z = [100.0, 0.7];
        let mut jump = [0.0, 0.0];
        m.regime_jump_into(0.0, &z, 1, 2, &mut jump);
        assert_eq!(jump, [0.0, -0.7]);
        // Effective clock drift (compensators removed) is exactly one.
        let mut mu = [0.0, 0.0];
        let mut scratch = [0.0, 0.0];
        m.effective_drift_into(0.3, &z, 1, &mut mu, &mut scratch).unwrap();
        assert_relative_eq!(mu[1], 1.0, max_relative = 1e-14);
        // Intensity is bounded by the declared bound.
        assert!(m.intensity(0.0, &[100.0, 1e6], 1, 2) <= m.lambda_bound);
    }

    #[test]
    fn unknown_and_invalid_params_rejected() {
        assert!(matches!(
            preset_model("no_such_model", &serde_json::json!({})),
            Err(Error::UnknownPreset(_))
        ));
        assert!(preset_model("black_scholes", &serde_json::json!({"sigma": 0.2})).is_err());
        assert!(preset_model(
            "black_scholes",
            &serde_json::json!({"sigma": 0.2, "rate": 0.0, "bogus": 1})
        )
        .is_err());
        // lambda matrix shape mismatch
        assert!(preset_model(
            "exp_levy_regime",
            &serde_json::json!({
                "regimes": 2,
                "sigma": [0.1, 0.2],
                "rate": [0.0, 0.0],
                "rho": [[0.0, 0.0], [0.0, 0.0]],
                "lambda": [[0.0, 1.0]],
            })
        )
        .is_err());
    }

    #[test]
    fn divergent_exponential_moment_is_detected() {
        // Two-sided exponential density with rate 1: ∫ e^{2x} ν(dx) diverges,
        // so sigma = 1 with growth order 1 must be rejected.
        let opts = crate::model::levy::QuadratureOptions {
            eps: 1e-6,
            lo: -12.0,
            hi: 12.0,
            panels: 48,
            points_per_panel: 16,
        };
        let levy = LevyMeasure::from_density_1d(|x| 0.5 * (-x.abs()).exp(), &opts).unwrap();
        assert!(!exp_moment_converges(&levy, 2.0));
        assert!(exp_moment_converges(&levy, 0.3));
        let gauss = LevyMeasure::gaussian_1d(0.3, -0.1, 0.15).unwrap();
        assert!(exp_moment_converges(&gauss, 2.0));
    }

    #[test]
    fn dividend_presets() {
        let (m, _) = preset_model(
            "black_scholes",
            &serde_json::json!({"sigma": 0.2, "rate": 0.0}),
        )
        .unwrap();
        let call = preset_dividend(
            "call",
            &serde_json::json!({"strike": 100.0, "maturity": 1.0}),
            &m,
        )
        .unwrap();
        assert_eq!(call.terminal(&[110.0], 1), 10.0);
        assert_eq!(call.terminal(&[90.0], 1), 0.0);
        assert_eq!(call.rate(0.5, &[90.0], 1), 0.0);
        assert!(preset_dividend("call", &serde_json::json!({"maturity": 1.0}), &m).is_err());
        assert!(preset_dividend("nope", &serde_json::json!({}), &m).is_err());
    }
}
