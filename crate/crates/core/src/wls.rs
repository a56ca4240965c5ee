//! Normal-equation solver for the weighted least-squares M-step.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Diagonally scaled condition number above which ridge jitter is added.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Jitter added to the diagonal, relative to `trace / d`.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Solution {
    pub beta: DVector<f64>,
    /// Ridge jitter was added to reach a usable system.
    pub jittered: bool,
}

/// Condition number of `D G D` with `D = diag(G)^{-1/2}`; infinite when
/// the scaled matrix is not positive definite.
pub fn scaled_condition(gram: &DMatrix<f64>) -> f64 {
    let d = gram.nrows();
    if d == 0 {
        return 1.0;
    }
    if (0..d).any(|i| !(gram[(i, i)] > 0.0)) {
        return f64::INFINITY;
    }
    let scale = DVector::from_fn(d, |i, _| gram[(i, i)].sqrt().recip());
    let scaled = DMatrix::from_fn(d, d, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `G β = b` for a symmetric positive semi-definite `G`.
///
/// The system is equilibrated by its diagonal before the Cholesky solve.
/// When the scaled condition estimate exceeds [`CONDITION_LIMIT`],
/// `RIDGE_SCALE · trace(G)/d` is added to the diagonal first.
pub fn solve_normal_equations(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Solution {
    let d = gram.nrows();
    let mut system = gram.clone();
    let mut jittered = false;
    if scaled_condition(&system) > CONDITION_LIMIT {
        let trace = system.trace();
        let bump = if trace > 0.0 { RIDGE_SCALE * trace / d as f64 } else { RIDGE_SCALE };
        for i in 0..d {
            system[(i, i)] += bump;
        }
        jittered = true;
    }
    let scale = DVector::from_fn(d, |i, _| {
        let v = system[(i, i)];
        if v > 0.0 {
            v.sqrt().recip()
        } else {
            1.0
        }
    });
    let scaled = DMatrix::from_fn(d, d, |i, j| system[(i, j)] * scale[i] * scale[j]);
    let scaled_rhs = rhs.component_mul(&scale);
    let z = match scaled.clone().cholesky() {
        Some(chol) => chol.solve(&scaled_rhs),
        None => {
            jittered = true;
            scaled
                .svd(true, true)
                .solve(&scaled_rhs, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(d))
        }
    };
    Solution {
        beta: z.component_mul(&scale),
        jittered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_conditioned_system_is_solved_exactly() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let s = solve_normal_equations(&g, &b);
        assert!(!s.jittered);
        assert!((&g * &s.beta - b).norm() < 1e-14);
    }

    #[test]
    fn rank_deficient_system_gets_jitter() {
        // one observation, two unknowns
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let g = x.transpose() * &x;
        let b = x.transpose() * DVector::from_vec(vec![3.0]);
        assert!(scaled_condition(&g).is_infinite());
        let s = solve_normal_equations(&g, &b);
        assert!(s.jittered);
        assert!(s.beta.iter().all(|v| v.is_finite()));
        // the jittered solution still reproduces the single observation
        assert!(((&x * &s.beta)[0] - 3.0).abs() < 1e-6);
    }
}
