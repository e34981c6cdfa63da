use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
#[allow(unused_imports)]
use crate::float::*;

/// `maximize vᴴRv subject to ‖v‖₂ ≤ 1` for Hermitian `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenProblem {
    r: Vec<Complex64>,
    n: usize,
}

impl EigenProblem {
    pub fn new(r: &Tensor) -> Result<Self> {
        let r = r.to_complex();
        let n = match r.shape() {
            [a, b] if a == b => *a,
            [a, b] => return Err(Error::dim("eigen matrix columns", *a, *b)),
            s => return Err(Error::dim("eigen matrix rank", 2, s.len())),
        };
        if !r.is_hermitian(1e-9) {
            return Err(Error::domain("matrix is not Hermitian"));
        }
        Ok(Self { r: r.as_complex()?.to_vec(), n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.r
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.r.chunks_exact(self.n).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `vᴴRv` (real for Hermitian `R`).
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        self.apply(v).iter().zip(v).map(|(rv, vi)| (vi.conj() * rv).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Top eigenpair by power iteration on `R + ‖R‖_F I`.
///
/// The shift makes the spectrum nonnegative so the iteration targets the
/// algebraically largest eigenvalue. Converged means the Rayleigh quotient
/// moved by at most `tol·max(1, |λ|)` and the residual `‖Rv − λv‖` is at
/// most `sqrt(tol)·‖R‖_F`. The returned vector has unit norm and its first
/// nonzero entry is real and positive.
pub fn power_iteration(problem: &EigenProblem, iters: usize, tol: f64) -> Result<(f64, Vec<Complex64>)> {
    if iters == 0 {
        return Err(Error::domain("iters must be at least 1"));
    }
    let n = problem.n;
    let fro = problem.frobenius_norm();
    if n == 0 {
        return Err(Error::domain("empty matrix"));
    }
    if fro == 0.0 {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[0] = Complex64::new(1.0, 0.0);
        return Ok((0.0, v));
    }
    // deterministic start with no special alignment to coordinate axes
    let mut v: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * (i as f64 + 1.0))).collect();
    normalize(&mut v);
    let mut lambda = problem.quadratic_form(&v);
    let mut change = f64::INFINITY;
    for _ in 0..iters {
        let rv = problem.apply(&v);
        let mut next: Vec<Complex64> = rv.iter().zip(&v).map(|(a, b)| a + b * fro).collect();
        normalize(&mut next);
        let next_lambda = problem.quadratic_form(&next);
        change = (next_lambda - lambda).abs();
        v = next;
        lambda = next_lambda;
        let residual = problem
            .apply(&v)
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if change <= tol * lambda.abs().max(1.0) && residual <= tol.sqrt() * fro {
            fix_sign(&mut v);
            return Ok((lambda, v));
        }
    }
    Err(Error::Convergence { iterations: iters, last_change: change })
}

/// Rotates the global phase so the first nonzero entry is real and
/// positive (for real problems this is a sign flip).
fn fix_sign(v: &mut [Complex64]) {
    if let Some(first) = v.iter().find(|x| x.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}
