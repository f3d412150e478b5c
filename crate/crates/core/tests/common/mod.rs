//! Shared closed-form oracles for the integration suites. Everything here is
//! independent of the engine's numerical paths: closed formulas, dense
//! quadrature and scalar ODE solutions only.

#![allow(dead_code)]

use statrs::function::erf::erf;

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Black–Scholes call price and delta.
pub fn bs_call(s: f64, k: f64, sigma: f64, r: f64, t: f64) -> (f64, f64) {
    if t <= 0.0 || sigma <= 0.0 {
        let p = (s - k).max(0.0);
        return (p, if s > k { 1.0 } else { 0.0 });
    }
    let sq = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / sq;
    let d2 = d1 - sq;
    let price = s * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2);
    (price, norm_cdf(d1))
}

/// Call price in the exponential jump-diffusion model with Gaussian jump
/// sizes (`ν = mass · N(mean, std²)`), by the classical conditioning series
/// truncated when terms become negligible.
pub fn merton_call(
    s: f64,
    k: f64,
    sigma: f64,
    r: f64,
    t: f64,
    mass: f64,
    mean: f64,
    std: f64,
) -> f64 {
    let kappa = (mean + 0.5 * std * std).exp() - 1.0;
    let lam_prime = mass * (1.0 + kappa);
    let mut price = 0.0;
    let mut weight = (-lam_prime * t).exp(); // n = 0 term
    for n in 0..60u32 {
        if n > 0 {
            weight *= lam_prime * t / n as f64;
        }
        let sigma_n = (sigma * sigma + n as f64 * std * std / t).sqrt();
        let r_n = r - mass * kappa + n as f64 * (1.0 + kappa).ln() / t;
        let (bs, _) = bs_call(s, k, sigma_n, r_n, t);
        price += weight * bs;
        if weight < 1e-14 && n as f64 > lam_prime * t {
            break;
        }
    }
    price
}

/// Occupation of state 1 for a two-state chain with constant intensities:
/// `p1(t)` starting from `p1(0) = p0`.
pub fn chain_p1(p0: f64, lam12: f64, lam21: f64, t: f64) -> f64 {
    let total = lam12 + lam21;
    if total == 0.0 {
        return p0;
    }
    let pi1 = lam21 / total;
    pi1 + (p0 - pi1) * (-total * t).exp()
}

/// Expected number of 1 -> 2 transitions on `[0, T]`:
/// `∫_0^T λ12 p1(t) dt` in closed form.
pub fn chain_expected_transitions_12(p0: f64, lam12: f64, lam21: f64, t_end: f64) -> f64 {
    let total = lam12 + lam21;
    if total == 0.0 {
        return lam12 * p0 * t_end;
    }
    let pi1 = lam21 / total;
    lam12 * (pi1 * t_end + (p0 - pi1) * (1.0 - (-total * t_end).exp()) / total)
}

/// `E[payoff(S_T)]` for driftless geometric Brownian motion by dense
/// Gauss–Hermite style quadrature over the standard normal.
pub fn gbm_expectation(s0: f64, sigma: f64, t: f64, payoff: impl Fn(f64) -> f64) -> f64 {
    let n = 20_001;
    let (lo, hi) = (-10.0, 10.0);
    let h = (hi - lo) / (n - 1) as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let z = lo + i as f64 * h;
        let s = s0 * (-0.5 * sigma * sigma * t + sigma * t.sqrt() * z).exp();
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * payoff(s) * norm_pdf(z);
    }
    acc * h
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn bs_reference_value() {
        // at-the-money, sigma = 0.2, r = 0, T = 1
        let (price, delta) = bs_call(100.0, 100.0, 0.2, 0.0, 1.0);
        assert!((price - 7.9656).abs() < 5e-4, "price {price}");
        assert!((delta - norm_cdf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn merton_reduces_to_bs_without_jumps() {
        let m = merton_call(100.0, 100.0, 0.2, 0.0, 1.0, 0.0, 0.0, 0.1);
        let (bs, _) = bs_call(100.0, 100.0, 0.2, 0.0, 1.0);
        assert!((m - bs).abs() < 1e-10);
    }

    #[test]
    fn gbm_quadrature_matches_bs() {
        // trapezoid on a kinked integrand: ~1e-6 accuracy, plenty for the
        // tolerances this oracle backs
        let q = gbm_expectation(100.0, 0.2, 1.0, |s| (s - 100.0f64).max(0.0));
        let (bs, _) = bs_call(100.0, 100.0, 0.2, 0.0, 1.0);
        assert!((q - bs).abs() < 1e-5, "{q} vs {bs}");
    }
}
