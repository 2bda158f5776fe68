//! Largest singular value of a stack of skew circulant blocks.
//!
//! For `C = [circ(a_0); ...; circ(a_{k-1})]` the Gram matrix `C^T C` is itself
//! skew circulant, `circ(sum_i adj(a_i) * a_i)`, so a power-iteration step is a
//! single negacyclic product.

use crate::error::{Error, Result};
use crate::ring::{adjoint, negacyclic_mul_acc, negacyclic_mul_acc_f64, RingElement};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;

/// Coefficients of `g = sum_i adj(a_i) a_i`, the polynomial with `circ(g) = C^T C`.
pub fn gram_polynomial(blocks: &[RingElement]) -> Vec<i64> {
    let n = blocks.first().map_or(0, RingElement::n);
    let mut g = vec![0i64; n];
    for a in blocks {
        negacyclic_mul_acc(&adjoint(a.coeffs()), a.coeffs(), &mut g);
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIteration {
    pub eigenvalue: f64,
    pub iterations: usize,
}

/// Dominant eigenvalue of the symmetric positive semidefinite matrix `circ(g)`.
///
/// Starts from the normalized all-ones vector and stops when successive
/// Rayleigh quotients agree to `tol` relative.
pub fn dominant_eigenvalue(g: &[f64], tol: f64, max_iter: usize) -> Result<PowerIteration> {
    let n = g.len();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    if g.iter().all(|&x| x == 0.0) {
        return Ok(PowerIteration {
            eigenvalue: 0.0,
            iterations: 0,
        });
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        w.iter_mut().for_each(|x| *x = 0.0);
        negacyclic_mul_acc_f64(g, &v, &mut w);
        let rq: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(PowerIteration {
                eigenvalue: 0.0,
                iterations: it,
            });
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (rq - prev).abs() <= tol * rq.abs() {
            return Ok(PowerIteration {
                eigenvalue: rq,
                iterations: it,
            });
        }
        prev = rq;
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge within {max_iter} steps"
    )))
}

/// `sigma_1` of the stacked skew circulant matrix of `blocks`.
pub fn largest_singular_value(blocks: &[RingElement]) -> Result<f64> {
    let g: Vec<f64> = gram_polynomial(blocks).into_iter().map(|x| x as f64).collect();
    Ok(dominant_eigenvalue(&g, DEFAULT_TOLERANCE, MAX_ITERATIONS)?
        .eigenvalue
        .max(0.0)
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::skew_circulant;

    #[test]
    fn gram_polynomial_matches_matrix_product() {
        let a = RingElement::new(vec![1, -1, 0, 2, 0, 0, 1, -1]).unwrap();
        let b = RingElement::new(vec![0, 1, 1, 0, -1, 0, 0, 1]).unwrap();
        let g = skew_circulant(&RingElement::new(gram_polynomial(&[a.clone(), b.clone()])).unwrap());
        let (ma, mb) = (skew_circulant(&a), skew_circulant(&b));
        for i in 0..8 {
            for j in 0..8 {
                let want: i64 = (0..8)
                    .map(|r| ma.get(r, i) * ma.get(r, j) + mb.get(r, i) * mb.get(r, j))
                    .sum();
                assert_eq!(g.get(i, j), want);
            }
        }
    }

    #[test]
    fn identity_and_zeta() {
        assert!((largest_singular_value(&[RingElement::one(16)]).unwrap() - 1.0).abs() < 1e-12);
        let z = RingElement::zeta(16);
        assert!((largest_singular_value(&[z]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(largest_singular_value(&[RingElement::zero(8)]).unwrap(), 0.0);
    }
}
