//! Arithmetic in `Z[x]/(x^n + 1)` and its real analogue.
//!
//! Multiplication is the O(n^2) schoolbook rule. For `u = sum u_i x^i` and
//! `v = sum v_j x^j` the product has coefficients
//! `w_l = sum_{i+j = l mod n} eps(i,j) u_i v_j`, where `eps` is `-1` exactly
//! when `i + j >= n`. The same product is `u * V^T` with `V` the skew
//! circulant matrix of `v` (see [`SkewCirculantMatrix`]).

use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest coefficient magnitude accepted by [`RingElement::new`].
pub const COEFF_LIMIT: i128 = 1 << 62;

/// An element of `Z[x]/(x^n + 1)` stored as its coefficient vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct RingElement {
    coeffs: Vec<i64>,
}

impl TryFrom<Vec<i64>> for RingElement {
    type Error = Error;

    fn try_from(coeffs: Vec<i64>) -> Result<Self> {
        RingElement::new(coeffs)
    }
}

impl From<RingElement> for Vec<i64> {
    fn from(r: RingElement) -> Self {
        r.coeffs
    }
}

impl RingElement {
    pub fn new(coeffs: Vec<i64>) -> Result<Self> {
        check_degree(coeffs.len())?;
        if let Some(&bad) = coeffs.iter().find(|c| (**c as i128).abs() >= COEFF_LIMIT) {
            return Err(Error::CoefficientOverflow { value: bad as i128 });
        }
        Ok(RingElement { coeffs })
    }

    /// Builds an element without validation. `coeffs.len()` must be a power of two.
    pub(crate) fn from_vec_unchecked(coeffs: Vec<i64>) -> Self {
        debug_assert!(coeffs.len().is_power_of_two());
        RingElement { coeffs }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_vec_unchecked(vec![0; n])
    }

    pub fn one(n: usize) -> Self {
        Self::monomial(n, 0, 1)
    }

    /// `coeff * x^power`, reduced by `x^n = -1`.
    pub fn monomial(n: usize, power: usize, coeff: i64) -> Self {
        let mut c = vec![0; n];
        let sign = if (power / n) % 2 == 1 { -1 } else { 1 };
        c[power % n] = sign * coeff;
        Self::from_vec_unchecked(c)
    }

    /// `1 + x^{n/2}`.
    pub fn zeta(n: usize) -> Self {
        let mut c = vec![0; n];
        c[0] = 1;
        c[n / 2] += 1;
        Self::from_vec_unchecked(c)
    }

    /// `1 - x^{n/2}`.
    pub fn zeta_star(n: usize) -> Self {
        let mut c = vec![0; n];
        c[0] = 1;
        c[n / 2] -= 1;
        Self::from_vec_unchecked(c)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<i64> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn inf_norm(&self) -> i64 {
        inf_norm(&self.coeffs)
    }

    pub fn l2_norm_sq(&self) -> i128 {
        l2_norm_sq(&self.coeffs)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.l2_norm_sq() as f64).sqrt()
    }

    pub fn scale(&self, k: i64) -> Self {
        Self::from_vec_unchecked(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// Negacyclic product, failing on mismatched degrees.
    pub fn mul(&self, other: &RingElement) -> Result<RingElement> {
        ring_mul(self, other)
    }

    /// Product reduced into the centered residue system used for `modulus`
    /// (see [`center_mod`]). Operands are reduced first so the accumulation
    /// cannot overflow for any in-scope modulus.
    pub fn mul_mod(&self, other: &RingElement, modulus: i64) -> Result<RingElement> {
        check_same(self, other)?;
        let a: Vec<i64> = self.coeffs.iter().map(|&c| center_mod(c, modulus)).collect();
        let b: Vec<i64> = other.coeffs.iter().map(|&c| center_mod(c, modulus)).collect();
        let n = a.len();
        let mut acc = vec![0i128; n];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            let ai = ai as i128;
            for (j, &bj) in b.iter().enumerate() {
                let l = i + j;
                if l < n {
                    acc[l] += ai * bj as i128;
                } else {
                    acc[l - n] -= ai * bj as i128;
                }
            }
        }
        let m = modulus as i128;
        Ok(Self::from_vec_unchecked(
            acc.into_iter()
                .map(|x| center_mod_wide(x, m) as i64)
                .collect(),
        ))
    }

    /// Coefficientwise reduction into the centered residues of `modulus`.
    pub fn reduce(&self, modulus: i64) -> RingElement {
        Self::from_vec_unchecked(self.coeffs.iter().map(|&c| center_mod(c, modulus)).collect())
    }

    /// Multiplication by `x` (a negacyclic rotation).
    pub fn mul_x(&self) -> RingElement {
        let n = self.n();
        let mut c = Vec::with_capacity(n);
        c.push(-self.coeffs[n - 1]);
        c.extend_from_slice(&self.coeffs[..n - 1]);
        Self::from_vec_unchecked(c)
    }

    /// The element whose skew circulant matrix is the transpose of this one's:
    /// `(a_0, -a_{n-1}, ..., -a_1)`.
    pub fn adjoint(&self) -> RingElement {
        Self::from_vec_unchecked(adjoint(&self.coeffs))
    }

    /// `(1 + x^{n/2}) * u`.
    pub fn zeta_mul(&self) -> RingElement {
        Self::from_vec_unchecked(zeta_mul(&self.coeffs))
    }

    /// `(1 - x^{n/2}) * u`.
    pub fn zeta_star_mul(&self) -> RingElement {
        Self::from_vec_unchecked(zeta_star_mul(&self.coeffs))
    }
}

impl Add for &RingElement {
    type Output = RingElement;

    fn add(self, rhs: &RingElement) -> RingElement {
        assert_eq!(self.n(), rhs.n(), "ring degree mismatch");
        RingElement::from_vec_unchecked(
            self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        )
    }
}

impl Sub for &RingElement {
    type Output = RingElement;

    fn sub(self, rhs: &RingElement) -> RingElement {
        assert_eq!(self.n(), rhs.n(), "ring degree mismatch");
        RingElement::from_vec_unchecked(
            self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        )
    }
}

impl Neg for &RingElement {
    type Output = RingElement;

    fn neg(self) -> RingElement {
        RingElement::from_vec_unchecked(self.coeffs.iter().map(|c| -c).collect())
    }
}

fn check_degree(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(())
}

fn check_same(u: &RingElement, v: &RingElement) -> Result<()> {
    if u.n() != v.n() {
        return Err(Error::Dimension {
            expected: u.n(),
            got: v.n(),
        });
    }
    Ok(())
}

/// Negacyclic product `u * v`.
pub fn ring_mul(u: &RingElement, v: &RingElement) -> Result<RingElement> {
    check_same(u, v)?;
    let mut out = vec![0; u.n()];
    negacyclic_mul_acc(&u.coeffs, &v.coeffs, &mut out);
    Ok(RingElement::from_vec_unchecked(out))
}

/// `out += a * b` in `Z[x]/(x^n + 1)`. All three slices must have length n.
#[inline]
pub fn negacyclic_mul_acc(a: &[i64], b: &[i64], out: &mut [i64]) {
    let n = a.len();
    debug_assert!(b.len() == n && out.len() == n);
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        let (lo, hi) = out.split_at_mut(i);
        // x^i * b: b_j lands at i+j, wrapping with a sign flip.
        // Unit coefficients (all of a small secret) avoid the multiply.
        match ai {
            1 => {
                add_into(hi, &b[..n - i]);
                sub_into(lo, &b[n - i..]);
            }
            -1 => {
                sub_into(hi, &b[..n - i]);
                add_into(lo, &b[n - i..]);
            }
            _ => {
                for (o, &bj) in hi.iter_mut().zip(&b[..n - i]) {
                    *o += ai * bj;
                }
                for (o, &bj) in lo.iter_mut().zip(&b[n - i..]) {
                    *o -= ai * bj;
                }
            }
        }
    }
}

#[inline(always)]
fn add_into(out: &mut [i64], x: &[i64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += v;
    }
}

#[inline(always)]
fn sub_into(out: &mut [i64], x: &[i64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o -= v;
    }
}

/// `out += a * b` for real coefficient vectors.
#[inline]
pub fn negacyclic_mul_acc_f64(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = a.len();
    debug_assert!(b.len() == n && out.len() == n);
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let (lo, hi) = out.split_at_mut(i);
        for (o, &bj) in hi.iter_mut().zip(&b[..n - i]) {
            *o += ai * bj;
        }
        for (o, &bj) in lo.iter_mut().zip(&b[n - i..]) {
            *o -= ai * bj;
        }
    }
}

pub fn inf_norm(a: &[i64]) -> i64 {
    a.iter().map(|c| c.abs()).max().unwrap_or(0)
}

pub fn l2_norm_sq(a: &[i64]) -> i128 {
    a.iter().map(|&c| (c as i128) * (c as i128)).sum()
}

/// Euclidean norm of the concatenation of several ring elements.
pub fn l2_norm<'a>(parts: impl IntoIterator<Item = &'a RingElement>) -> f64 {
    let sq: i128 = parts.into_iter().map(RingElement::l2_norm_sq).sum();
    (sq as f64).sqrt()
}

pub fn adjoint(a: &[i64]) -> Vec<i64> {
    let n = a.len();
    let mut out = Vec::with_capacity(n);
    out.push(a[0]);
    out.extend(a[1..].iter().rev().map(|c| -c));
    out
}

pub fn zeta_mul(u: &[i64]) -> Vec<i64> {
    let h = u.len() / 2;
    let (lo, hi) = u.split_at(h);
    let mut out = Vec::with_capacity(u.len());
    out.extend(lo.iter().zip(hi).map(|(a, b)| a - b));
    out.extend(lo.iter().zip(hi).map(|(a, b)| a + b));
    out
}

pub fn zeta_star_mul(u: &[i64]) -> Vec<i64> {
    let h = u.len() / 2;
    let (lo, hi) = u.split_at(h);
    let mut out = Vec::with_capacity(u.len());
    out.extend(lo.iter().zip(hi).map(|(a, b)| a + b));
    out.extend(lo.iter().zip(hi).map(|(a, b)| b - a));
    out
}

/// Centered representative of `x` modulo `m`.
///
/// Odd `m` maps into `{-(m-1)/2, ..., (m-1)/2}`; even `m = 2q` maps into
/// `(-q, q]`.
#[inline]
pub fn center_mod(x: i64, m: i64) -> i64 {
    let r = x.rem_euclid(m);
    if r > m / 2 {
        r - m
    } else {
        r
    }
}

#[inline]
fn center_mod_wide(x: i128, m: i128) -> i128 {
    let r = x.rem_euclid(m);
    if r > m / 2 {
        r - m
    } else {
        r
    }
}

/// Skew circulant matrix of a ring element: column `j` holds `x^j * v`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkewCirculantMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl SkewCirculantMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[i64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn column(&self, col: usize) -> Vec<i64> {
        (0..self.n).map(|r| self.get(r, col)).collect()
    }

    /// `V * x` for an integer column vector.
    pub fn mul_vec(&self, x: &[i64]) -> Vec<i64> {
        (0..self.n)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `u * V^T`, the ring product `u * v` computed through the matrix.
    pub fn left_mul_transpose(&self, u: &[i64]) -> Vec<i64> {
        // (u V^T)_l = sum_j u_j V[l][j]
        self.mul_vec(u)
    }
}

pub fn skew_circulant(v: &RingElement) -> SkewCirculantMatrix {
    let n = v.n();
    let mut entries = vec![0; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = if i >= j {
                v.coeffs[i - j]
            } else {
                -v.coeffs[n + i - j]
            };
        }
    }
    SkewCirculantMatrix { n, entries }
}
