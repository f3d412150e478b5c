//! Quadratic hedging on jump-diffusion markets with rating/regime switching.
//!
//! The library prices and hedges dividend streams on a market whose state is
//! a multidimensional jump diffusion `Y = (S, R)` (traded assets and
//! non-traded factors) coupled to a finite-state rating process `C`:
//!
//! ```text
//! dY_u = μ_Y du + σ_Y dW_u + ∫ F_Y(x) Π̃(dx, du) + Σ_{i≠j} ρ_Y^{i,j} 1_i(C_u-) (dN^{i,j} - λ^{i,j} du)
//! dC_u = Σ_{i≠j} (j - i) 1_i(C_u-) dN^{i,j}
//! ```
//!
//! Discounted asset prices are martingales and the risk-minimizing strategy
//! for a payment stream solves the pointwise linear system `G φ = A`, where
//! `G` is the density of predictable covariation of discounted prices and
//! `A` couples that density to the Galtchouk–Kunita–Watanabe representation
//! of the discounted cumulated payments.
//!
//! Modules:
//! - [`model`]: market/claim specifications, Lévy measures, presets, validation
//! - [`sim`]: path simulation of `(Y, C, B)` with jump and transition logs
//! - [`pide`]: backward IMEX solver for the coupled pricing PIDE system
//! - [`hedge`]: Gram matrix, GKW triple, minimum-norm strategies, risk reports
//! - [`mc`]: Monte Carlo value estimator used as an independent cross-check

pub mod error;
pub mod hedge;
pub mod mc;
pub mod model;
pub mod pide;
pub mod sim;

pub use error::{Error, Result};
