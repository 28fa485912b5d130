//! Operator 2-norm of a matrix-free linear map by Lanczos on A*A.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{vec_norm, C64};

/// A square linear map given by its action and adjoint action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64>;
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// ‖A‖₂ from the top Ritz value of A*A. Full reorthogonalisation, seeded start vector.
pub fn operator_norm(op: &dyn LinearOperator, rel_tol: f64) -> f64 {
    let n = op.dim();
    if n == 0 {
        return 0.0;
    }
    let max_steps = n.min(400);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut q: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let nq = vec_norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut estimate = 0.0f64;
    for step in 0..max_steps {
        let mut w = op.apply_adjoint(&op.apply(&q));
        let alpha = dot(&q, &w).re;
        basis.push(q.clone());
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= proj * bi);
            }
        }
        let beta = vec_norm(&w);
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imax, theta) = eig.eigenvalues.iter().cloned().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
            if v > acc.1 {
                (i, v)
            } else {
                acc
            }
        });
        let residual = beta * eig.eigenvectors[(k - 1, imax)].abs();
        estimate = theta.max(0.0);
        if residual <= rel_tol * theta.abs().max(f64::MIN_POSITIVE) || beta <= 1e-300 || step + 1 == n {
            break;
        }
        betas.push(beta);
        q = w.into_iter().map(|v| v / beta).collect();
    }
    estimate.sqrt()
}
