//! Payment streams (dividend processes).
//!
//! The standard rating-sensitive stream pays a terminal amount `h(Y_T, C_T)`,
//! a continuous rate `g(u, Y, C)` and lump transition payments
//! `δ^{i,j}(u, Y)` whenever the rating moves from `i` to `j`:
//!
//! ```text
//! D_t = h(Y_T, C_T) 1_{t>=T} + ∫_0^t g(u, Y_u-, C_u-) du + Σ_{i≠j} ∫_0^t δ^{i,j}(u, Y_u-) dH^{i,j}_u
//! ```

use std::sync::Arc;

/// Coefficient functions of a payment stream. Implementations must be pure.
pub trait DividendStream: Send + Sync {
    /// Terminal payment `h(y, c)`.
    fn terminal(&self, y: &[f64], c: usize) -> f64;
    /// Payment rate `g(u, y, c)` per unit time.
    fn rate(&self, u: f64, y: &[f64], c: usize) -> f64;
    /// Lump payment `δ^{i,j}(u, y)` at an `i -> j` rating transition.
    fn transition(&self, u: f64, y: &[f64], i: usize, j: usize) -> f64;
}

/// A payment stream with maturity and declared polynomial growth order `m`
/// (used by the spot-check `|h|² + |g|² + Σ|δ^{i,j}|² <= K (1 + |z|^{2m})`).
#[derive(Clone)]
pub struct DividendSpec {
    pub name: String,
    pub maturity: f64,
    pub growth_order: u32,
    stream: Arc<dyn DividendStream>,
}

impl std::fmt::Debug for DividendSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DividendSpec")
            .field("name", &self.name)
            .field("maturity", &self.maturity)
            .field("growth_order", &self.growth_order)
            .finish()
    }
}

impl DividendSpec {
    pub fn new(
        name: impl Into<String>,
        maturity: f64,
        growth_order: u32,
        stream: Arc<dyn DividendStream>,
    ) -> Self {
        DividendSpec {
            name: name.into(),
            maturity,
            growth_order: growth_order.max(1),
            stream,
        }
    }

    pub fn terminal(&self, y: &[f64], c: usize) -> f64 {
        self.stream.terminal(y, c)
    }

    pub fn rate(&self, u: f64, y: &[f64], c: usize) -> f64 {
        self.stream.rate(u, y, c)
    }

    pub fn transition(&self, u: f64, y: &[f64], i: usize, j: usize) -> f64 {
        self.stream.transition(u, y, i, j)
    }

    /// The zero stream (no payments).
    pub fn zero(maturity: f64) -> Self {
        DividendSpec::new("zero", maturity, 1, Arc::new(ClosureDividend::zeroed()))
    }
}

/// Payment stream assembled from closures.
#[allow(clippy::type_complexity)]
pub struct ClosureDividend {
    pub terminal: Box<dyn Fn(&[f64], usize) -> f64 + Send + Sync>,
    pub rate: Box<dyn Fn(f64, &[f64], usize) -> f64 + Send + Sync>,
    pub transition: Box<dyn Fn(f64, &[f64], usize, usize) -> f64 + Send + Sync>,
}

impl ClosureDividend {
    pub fn zeroed() -> Self {
        ClosureDividend {
            terminal: Box::new(|_, _| 0.0),
            rate: Box::new(|_, _, _| 0.0),
            transition: Box::new(|_, _, _, _| 0.0),
        }
    }

    /// Terminal-only payoff `h(y, c)`.
    pub fn terminal_only(h: impl Fn(&[f64], usize) -> f64 + Send + Sync + 'static) -> Self {
        let mut d = Self::zeroed();
        d.terminal = Box::new(h);
        d
    }
}

impl DividendStream for ClosureDividend {
    fn terminal(&self, y: &[f64], c: usize) -> f64 {
        (self.terminal)(y, c)
    }
    fn rate(&self, u: f64, y: &[f64], c: usize) -> f64 {
        (self.rate)(u, y, c)
    }
    fn transition(&self, u: f64, y: &[f64], i: usize, j: usize) -> f64 {
        (self.transition)(u, y, i, j)
    }
}

/// Semimartingale payment stream
///
/// ```text
/// D_t = ξ^D 1_{t>=T} + ∫ g^D du + ∫ (δ^D)ᵀ dW + ∫∫ J^D(x) Π̃(dx, du) + Σ ∫ γ^{D,i,j} dM^{i,j}
/// ```
///
/// specified through coefficient functions of `(u, y, c)`. The martingale
/// loadings shift the representation triple of the claim; see
/// [`crate::hedge::semimartingale_adjust`].
#[allow(clippy::type_complexity)]
pub struct SemimartingaleDividendSpec {
    pub name: String,
    pub maturity: f64,
    /// Terminal payment `ξ^D(y, c)`.
    pub terminal: Box<dyn Fn(&[f64], usize) -> f64 + Send + Sync>,
    /// Absolutely continuous rate `g^D(u, y, c)`.
    pub rate: Box<dyn Fn(f64, &[f64], usize) -> f64 + Send + Sync>,
    /// Brownian loading `δ^D(u, y, c)`, written into a slice of length `r_W`.
    pub brownian_loading: Box<dyn Fn(f64, &[f64], usize, &mut [f64]) + Send + Sync>,
    /// Jump loading `J^D(u, y, c, x)`.
    pub jump_loading: Box<dyn Fn(f64, &[f64], usize, &[f64]) -> f64 + Send + Sync>,
    /// Transition loading `γ^{D,i,j}(u, y)`.
    pub transition_loading: Box<dyn Fn(f64, &[f64], usize, usize) -> f64 + Send + Sync>,
}

impl SemimartingaleDividendSpec {
    pub fn zeroed(name: impl Into<String>, maturity: f64) -> Self {
        SemimartingaleDividendSpec {
            name: name.into(),
            maturity,
            terminal: Box::new(|_, _| 0.0),
            rate: Box::new(|_, _, _| 0.0),
            brownian_loading: Box::new(|_, _, _, out| out.fill(0.0)),
            jump_loading: Box::new(|_, _, _, _| 0.0),
            transition_loading: Box::new(|_, _, _, _| 0.0),
        }
    }
}
