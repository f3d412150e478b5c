//! Minimum-norm solution of the symmetric PSD system `G φ = A`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub phi: DVector<f64>,
    /// `‖G φ - A‖`. The right-hand side lies in the range of `G` when the
    /// value function is exact; discretization can push it out, which shows
    /// up here instead of as an error.
    pub residual: f64,
    pub rank: usize,
}

/// Relative eigenvalue cutoff below which directions count as null space.
pub const RANK_REL_THRESHOLD: f64 = 1e-12;

/// Moore–Penrose solve by eigendecomposition: eigenvalues below
/// `1e-12 · λ_max` are truncated (ties resolve toward lower rank), so `φ`
/// is the minimum-norm least-squares solution.
pub fn min_norm_solve(g: &DMatrix<f64>, a: &DVector<f64>) -> MinNormSolution {
    let d = a.len();
    debug_assert_eq!(g.nrows(), d);
    if d == 1 {
        let gg = g[(0, 0)];
        let (phi, rank) = if gg > 0.0 && gg.is_finite() {
            (a[0] / gg, 1)
        } else {
            (0.0, 0)
        };
        let residual = (gg * phi - a[0]).abs();
        return MinNormSolution {
            phi: DVector::from_element(1, phi),
            residual,
            rank,
        };
    }

    let sym = (g + g.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = RANK_REL_THRESHOLD * lambda_max;
    let mut phi = DVector::zeros(d);
    let mut rank = 0;
    for k in 0..d {
        let lam = eig.eigenvalues[k];
        if lam > cutoff && lam > 0.0 {
            rank += 1;
            let q = eig.eigenvectors.column(k);
            let coef = q.dot(a) / lam;
            phi += q * coef;
        }
    }
    let residual = (&sym * &phi - a).norm();
    MinNormSolution { phi, residual, rank }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn identity_system() {
        let g = DMatrix::identity(3, 3);
        let a = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let s = min_norm_solve(&g, &a);
        assert_eq!(s.rank, 3);
        assert!(s.residual < 1e-14);
        for k in 0..3 {
            assert_relative_eq!(s.phi[k], a[k], max_relative = 1e-13);
        }
    }

    #[test]
    fn null_direction_gets_zero_weight() {
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.0]));
        let a = DVector::from_column_slice(&[2.0, 0.0]);
        let s = min_norm_solve(&g, &a);
        assert_eq!(s.rank, 1);
        assert_relative_eq!(s.phi[0], 2.0, max_relative = 1e-13);
        assert_eq!(s.phi[1], 0.0);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn inconsistent_rhs_reports_residual_not_error() {
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.0]));
        let a = DVector::from_column_slice(&[2.0, 3.0]);
        let s = min_norm_solve(&g, &a);
        assert_relative_eq!(s.residual, 3.0, max_relative = 1e-12);
        assert_eq!(s.phi[1], 0.0);
    }

    #[test]
    fn rank_deficient_recovers_min_norm_preimage_vs_svd_oracle() {
        // random PSD G of rank 3 in dimension 4; A = G w lies in the range
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let b = DMatrix::from_fn(4, 3, |_, _| rng.random::<f64>() - 0.5);
        let g = &b * b.transpose(); // rank 3 PSD
        let w = DVector::from_fn(4, |_, _| rng.random::<f64>() - 0.5);
        let a = &g * &w;
        let s = min_norm_solve(&g, &a);
        assert_eq!(s.rank, 3);
        assert!(s.residual < 1e-10 * a.norm());
        // independent dense-SVD pseudo-inverse oracle
        let svd = g.clone().svd(true, true);
        let pinv = svd.pseudo_inverse(1e-12).unwrap();
        let oracle = &pinv * &a;
        assert!((&s.phi - &oracle).norm() < 1e-10, "{:?} vs {:?}", s.phi, oracle);
    }

    #[test]
    fn scalar_fast_path() {
        let g = DMatrix::from_element(1, 1, 4.0);
        let a = DVector::from_element(1, 2.0);
        let s = min_norm_solve(&g, &a);
        assert_eq!(s.phi[0], 0.5);
        assert_eq!(s.rank, 1);
        let g0 = DMatrix::from_element(1, 1, 0.0);
        let s0 = min_norm_solve(&g0, &a);
        assert_eq!(s0.phi[0], 0.0);
        assert_eq!(s0.rank, 0);
        assert_eq!(s0.residual, 2.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // for consistent systems the solve is exact and the solution has
            // no component in the null space of G
            #[test]
            fn consistent_system_is_solved_with_min_norm(
                entries in proptest::collection::vec(-1.0f64..1.0, 12),
                w in proptest::collection::vec(-2.0f64..2.0, 4),
            ) {
                let b = DMatrix::from_column_slice(4, 3, &entries);
                let g = &b * b.transpose();
                let a = &g * DVector::from_column_slice(&w);
                let s = min_norm_solve(&g, &a);
                prop_assert!(s.residual <= 1e-9 * a.norm().max(1e-12), "residual {}", s.residual);
                // minimum norm: φ lies in the range of G
                let back = &g * min_norm_solve(&g, &(&g * &s.phi)).phi;
                prop_assert!((&g * &s.phi - back).norm() <= 1e-8 * s.phi.norm().max(1e-12));
            }
        }
    }
}
