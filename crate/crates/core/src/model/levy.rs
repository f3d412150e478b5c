//! Lévy measure representations and numerical integration against them.
//!
//! Two representations are supported: an exact finite-atom measure
//! `ν = Σ w_k δ_{x_k}` and a density discretized on a quadrature node table.
//! Both expose integration as a weighted sum over nodes, so the simulator,
//! the PIDE solver and the hedging formulas all consume one and the same
//! discrete measure.

use crate::error::{Error, Result};

/// One support point of a (discretized) Lévy measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyAtom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Quadrature discretization of an absolutely continuous Lévy density.
///
/// Node weights already include the density factor, so integration is a
/// plain weighted sum. Jumps with `|x| < eps` are truncated and dropped (no
/// diffusion correction); `cutoff` is the large-jump truncation radius.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub nodes: Vec<LevyAtom>,
    pub eps: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone)]
enum LevyKind {
    FiniteAtoms(Vec<LevyAtom>),
    Quadrature(QuadratureTable),
}

/// A Lévy measure on `R^n`, either with finite support or discretized.
#[derive(Debug, Clone)]
pub struct LevyMeasure {
    dim: usize,
    kind: LevyKind,
}

/// Options for building a quadrature table from a 1-d density.
#[derive(Debug, Clone)]
pub struct QuadratureOptions {
    /// Small-jump truncation radius; nodes with `|x| < eps` are dropped.
    pub eps: f64,
    /// Integration domain is `[lo, hi]` minus `(-eps, eps)`.
    pub lo: f64,
    pub hi: f64,
    /// Number of equal panels over the domain.
    pub panels: usize,
    /// Gauss–Legendre points per panel.
    pub points_per_panel: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            eps: 1e-6,
            lo: -2.0,
            hi: 2.0,
            panels: 16,
            points_per_panel: 16,
        }
    }
}

impl LevyMeasure {
    /// The zero measure (no jumps).
    pub fn none() -> Self {
        LevyMeasure {
            dim: 1,
            kind: LevyKind::FiniteAtoms(Vec::new()),
        }
    }

    pub fn finite_atoms(dim: usize, atoms: Vec<LevyAtom>) -> Result<Self> {
        let m = LevyMeasure {
            dim,
            kind: LevyKind::FiniteAtoms(atoms),
        };
        m.validate()?;
        Ok(m)
    }

    /// Convenience constructor for scalar atoms `(x_k, w_k)`.
    pub fn atoms_1d(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::finite_atoms(
            1,
            atoms
                .iter()
                .map(|&(x, w)| LevyAtom {
                    point: vec![x],
                    weight: w,
                })
                .collect(),
        )
    }

    /// Discretizes a 1-d density by composite Gauss–Legendre quadrature.
    pub fn from_density_1d<F>(density: F, opts: &QuadratureOptions) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        if !(opts.lo < opts.hi) || opts.eps < 0.0 || opts.panels == 0 || opts.points_per_panel < 2 {
            return Err(Error::InvalidSpec(
                "quadrature options: need lo < hi, eps >= 0, panels > 0, >= 2 points".into(),
            ));
        }
        let (gl_x, gl_w) = gauss_legendre(opts.points_per_panel);
        let mut nodes = Vec::new();
        let width = (opts.hi - opts.lo) / opts.panels as f64;
        for p in 0..opts.panels {
            let a = opts.lo + p as f64 * width;
            let b = a + width;
            for (&xi, &wi) in gl_x.iter().zip(gl_w.iter()) {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                if x.abs() < opts.eps {
                    continue;
                }
                let f = density(x);
                if !f.is_finite() || f < 0.0 {
                    return Err(Error::NumericalDomain {
                        context: "levy density".into(),
                        point: vec![x],
                    });
                }
                let w = 0.5 * (b - a) * wi * f;
                if w > 0.0 {
                    nodes.push(LevyAtom {
                        point: vec![x],
                        weight: w,
                    });
                }
            }
        }
        let m = LevyMeasure {
            dim: 1,
            kind: LevyKind::Quadrature(QuadratureTable {
                nodes,
                eps: opts.eps,
                cutoff: opts.hi.abs().max(opts.lo.abs()),
            }),
        };
        m.validate()?;
        Ok(m)
    }

    /// Gaussian jump-size density with total mass `mass`:
    /// `ν(dx) = mass · N(mean, std²)(dx)` truncated to `mean ± 10·std`.
    pub fn gaussian_1d(mass: f64, mean: f64, std: f64) -> Result<Self> {
        if mass < 0.0 || std <= 0.0 {
            return Err(Error::InvalidSpec(
                "gaussian levy measure needs mass >= 0 and std > 0".into(),
            ));
        }
        if mass == 0.0 {
            return Ok(Self::none());
        }
        let norm = mass / (std * (2.0 * std::f64::consts::PI).sqrt());
        let opts = QuadratureOptions {
            eps: 1e-6,
            lo: mean - 10.0 * std,
            hi: mean + 10.0 * std,
            panels: 24,
            points_per_panel: 16,
        };
        Self::from_density_1d(
            |x| norm * (-0.5 * ((x - mean) / std).powi(2)).exp(),
            &opts,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nodes().is_empty()
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(self.kind, LevyKind::FiniteAtoms(_))
    }

    /// Unified node view: exact atoms, or quadrature nodes with effective
    /// weights. Integration, mark sampling and jump stencils all run off
    /// this one table.
    pub fn nodes(&self) -> &[LevyAtom] {
        match &self.kind {
            LevyKind::FiniteAtoms(a) => a,
            LevyKind::Quadrature(q) => &q.nodes,
        }
    }

    /// Total mass `ν(R^n)` of the (truncated) measure.
    pub fn total_mass(&self) -> f64 {
        self.nodes().iter().map(|a| a.weight).sum()
    }

    /// `∫ f(x) ν(dx)` as a weighted sum over the node table.
    pub fn integrate<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut acc = 0.0;
        for atom in self.nodes() {
            let v = f(&atom.point);
            if !v.is_finite() {
                return Err(Error::NumericalDomain {
                    context: "levy integrand".into(),
                    point: atom.point.clone(),
                });
            }
            acc += atom.weight * v;
        }
        Ok(acc)
    }

    /// Vector-valued integral `∫ f(x) ν(dx) ∈ R^k`, accumulated into `out`.
    pub fn integrate_vec<F>(&self, out: &mut [f64], mut f: F) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for atom in self.nodes() {
            buf.fill(0.0);
            f(&atom.point, &mut buf);
            for (o, b) in out.iter_mut().zip(buf.iter()) {
                if !b.is_finite() {
                    return Err(Error::NumericalDomain {
                        context: "levy integrand (vector)".into(),
                        point: atom.point.clone(),
                    });
                }
                *o += atom.weight * b;
            }
        }
        Ok(())
    }

    /// Structural checks: positive weights, distinct atoms, square
    /// integrability `∫ |x|² ∧ 1 ν(dx) < ∞` evaluated on the node set.
    pub fn validate(&self) -> Result<()> {
        let nodes = self.nodes();
        for a in nodes {
            if a.point.len() != self.dim {
                return Err(Error::InvalidSpec(format!(
                    "levy atom dimension {} != measure dimension {}",
                    a.point.len(),
                    self.dim
                )));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidSpec(
                    "levy atom weights must be strictly positive and finite".into(),
                ));
            }
            if a.point.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("levy atom point must be finite".into()));
            }
        }
        if let LevyKind::FiniteAtoms(atoms) = &self.kind {
            for (k, a) in atoms.iter().enumerate() {
                for b in atoms.iter().skip(k + 1) {
                    if a.point == b.point {
                        return Err(Error::InvalidSpec(format!(
                            "duplicate levy atom at {:?}",
                            a.point
                        )));
                    }
                }
            }
        }
        let sq = self
            .nodes()
            .iter()
            .map(|a| {
                let n2: f64 = a.point.iter().map(|v| v * v).sum();
                a.weight * n2.min(1.0)
            })
            .sum::<f64>();
        if !sq.is_finite() {
            return Err(Error::InvalidSpec(
                "levy measure fails square-integrability on its node set".into(),
            ));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre polynomial. Deterministic to double precision.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Asymptotic initial guess for the i-th root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            // p0 = P_n(z); derivative via the standard recurrence.
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p0 / dp;
            if (z - z1).abs() < 1e-15 {
                let dp = {
                    let (mut p0, mut p1) = (1.0f64, 0.0f64);
                    for j in 0..n {
                        let p2 = p1;
                        p1 = p0;
                        p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
                    }
                    n as f64 * (z * p0 - p1) / (z * z - 1.0)
                };
                x[i] = -z;
                x[n - 1 - i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                w[n - 1 - i] = w[i];
                break;
            }
        }
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_atom_weighted_sum() {
        let m = LevyMeasure::atoms_1d(&[(1.0, 0.5)]).unwrap();
        let v = m.integrate(|x| x[0]).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn zero_integrand_is_zero() {
        let m = LevyMeasure::gaussian_1d(0.3, -0.1, 0.15).unwrap();
        assert_eq!(m.integrate(|_| 0.0).unwrap(), 0.0);
        let m = LevyMeasure::atoms_1d(&[(0.3, 0.4), (-0.2, 0.1)]).unwrap();
        assert_eq!(m.integrate(|_| 0.0).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_matches_dense_trapezoid_oracle() {
        // Independent oracle: dense trapezoid rule on [-2, 2] with 1e5 points.
        let (mass, mean, std) = (0.3, -0.1, 0.15);
        let norm = mass / (std * (2.0 * std::f64::consts::PI).sqrt());
        let density = |x: f64| norm * (-0.5 * ((x - mean) / std).powi(2)).exp();
        let f = |x: f64| (x.exp() - 1.0).powi(2);
        let n = 100_000usize;
        let (a, b) = (-2.0, 2.0);
        let h = (b - a) / n as f64;
        let mut oracle = 0.5 * (density(a) * f(a) + density(b) * f(b));
        for k in 1..n {
            let x = a + k as f64 * h;
            oracle += density(x) * f(x);
        }
        oracle *= h;

        let m = LevyMeasure::gaussian_1d(mass, mean, std).unwrap();
        let got = m.integrate(|x| (x[0].exp() - 1.0).powi(2)).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-6);
    }

    #[test]
    fn non_finite_integrand_reports_node() {
        let m = LevyMeasure::atoms_1d(&[(1.0, 0.5), (2.0, 0.25)]).unwrap();
        let err = m
            .integrate(|x| if x[0] > 1.5 { f64::NAN } else { 1.0 })
            .unwrap_err();
        match err {
            Error::NumericalDomain { point, .. } => assert_eq!(point, vec![2.0]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_weights_and_duplicates() {
        assert!(LevyMeasure::atoms_1d(&[(1.0, 0.0)]).is_err());
        assert!(LevyMeasure::atoms_1d(&[(1.0, -0.5)]).is_err());
        assert!(LevyMeasure::atoms_1d(&[(1.0, 0.5), (1.0, 0.2)]).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is integrated exactly by 8-point GL
        let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert_relative_eq!(num, 2.0 / 15.0, max_relative = 1e-13);
        let sum_w: f64 = w.iter().sum();
        assert_relative_eq!(sum_w, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn total_mass_of_gaussian_measure() {
        let m = LevyMeasure::gaussian_1d(0.3, -0.1, 0.15).unwrap();
        assert_relative_eq!(m.total_mass(), 0.3, max_relative = 1e-9);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn atom_measure() -> impl Strategy<Value = LevyMeasure> {
            proptest::collection::vec((-2.0f64..2.0, 0.01f64..2.0), 1..6).prop_filter_map(
                "distinct atoms",
                |atoms| {
                    let mut pts: Vec<f64> = atoms.iter().map(|a| a.0).collect();
                    pts.sort_by(f64::total_cmp);
                    pts.dedup();
                    if pts.len() != atoms.len() {
                        return None;
                    }
                    LevyMeasure::atoms_1d(&atoms).ok()
                },
            )
        }

        proptest! {
            // integration is linear in the integrand: exact for atoms
            #[test]
            fn linear_in_the_integrand_atoms(m in atom_measure(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let f = |x: &[f64]| (x[0] * 1.3).sin();
                let g = |x: &[f64]| x[0] * x[0] - 0.5;
                let combined = m.integrate(|x| a * f(x) + b * g(x)).unwrap();
                let split = a * m.integrate(f).unwrap() + b * m.integrate(g).unwrap();
                let scale = combined.abs().max(split.abs()).max(1e-12);
                prop_assert!((combined - split).abs() <= 1e-12 * scale);
            }

            #[test]
            fn linear_in_the_integrand_quadrature(a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let m = LevyMeasure::gaussian_1d(0.3, -0.1, 0.15).unwrap();
                let f = |x: &[f64]| x[0].exp() - 1.0;
                let g = |x: &[f64]| x[0].cos();
                let combined = m.integrate(|x| a * f(x) + b * g(x)).unwrap();
                let split = a * m.integrate(f).unwrap() + b * m.integrate(g).unwrap();
                let scale = combined.abs().max(split.abs()).max(1e-9);
                prop_assert!((combined - split).abs() <= 1e-12 * scale);
            }
        }
    }
}
