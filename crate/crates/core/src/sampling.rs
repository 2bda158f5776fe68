//! Randomness sources: uniform secrets, challenges, discrete Gaussians over
//! `Z` and `Z^{nk}`, and truncated Cauchy draws.
//!
//! The one-dimensional discrete Gaussian is sampled exactly (to double
//! precision) from a cumulative table. The multivariate sampler draws a
//! continuous `N(center, Sigma)` vector through a cached Cholesky factor and
//! rounds each coordinate, which adds variance 1/12 per coordinate.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::params::Variant;
use crate::ring::{adjoint, negacyclic_mul_acc, RingElement};
use crate::spectral;

/// Relative pivot threshold for the positive-definiteness test.
pub const PIVOT_THRESHOLD: f64 = 1e-9;

/// Coefficients i.i.d. uniform on `[-eta, eta]`.
pub fn sample_uniform_eta<R: Rng + ?Sized>(n: usize, eta: i64, rng: &mut R) -> RingElement {
    if eta == 0 {
        return RingElement::zero(n);
    }
    RingElement::from_vec_unchecked((0..n).map(|_| rng.random_range(-eta..=eta)).collect())
}

/// Coefficients i.i.d. uniform on `[-(q-1)/2, (q-1)/2]`.
pub fn sample_uniform_mod<R: Rng + ?Sized>(n: usize, q: i64, rng: &mut R) -> RingElement {
    sample_uniform_eta(n, (q - 1) / 2, rng)
}

/// A challenge with its first `active` coefficients uniform in `{0, 1}`.
pub fn sample_challenge<R: Rng + ?Sized>(n: usize, active: usize, rng: &mut R) -> RingElement {
    let mut c = vec![0i64; n];
    fill_challenge(&mut c[..active.min(n)], rng);
    RingElement::from_vec_unchecked(c)
}

/// Fills `out` with independent fair bits, 64 per generator call.
#[inline]
pub fn fill_challenge<R: Rng + ?Sized>(out: &mut [i64], rng: &mut R) {
    for chunk in out.chunks_mut(64) {
        let mut bits: u64 = rng.random();
        for c in chunk {
            *c = (bits & 1) as i64;
            bits >>= 1;
        }
    }
}

#[derive(Clone, Debug)]
struct CumulativeTable {
    center: f64,
    lo: i64,
    cdf: Vec<f64>,
}

impl CumulativeTable {
    fn new(sigma: f64, center: f64) -> Self {
        let reach = (13.0 * sigma).ceil() + 2.0;
        let lo = (center - reach).floor() as i64;
        let hi = (center + reach).ceil() as i64;
        // log-weights relative to the nearest integer keep tiny sigma finite
        let log_w: Vec<f64> = (lo..=hi)
            .map(|x| {
                let d = x as f64 - center;
                -d * d / (2.0 * sigma * sigma)
            })
            .collect();
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = w
            .iter()
            .map(|x| {
                acc += x / total;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        CumulativeTable { center, lo, cdf }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&p| p <= u);
        self.lo + idx.min(self.cdf.len() - 1) as i64
    }
}

/// Discrete Gaussian over `Z` with parameter `sigma` (standard deviation of the
/// underlying continuous Gaussian), `Pr[x] ~ exp(-(x - c)^2 / (2 sigma^2))`.
///
/// Tables for the centers passed to [`DiscreteGaussian::with_centers`] are
/// cached; other centers build a table per call.
#[derive(Clone, Debug)]
pub struct DiscreteGaussian {
    sigma: f64,
    tables: Vec<CumulativeTable>,
}

impl DiscreteGaussian {
    pub fn new(sigma: f64) -> Result<Self> {
        Self::with_centers(sigma, &[])
    }

    pub fn with_centers(sigma: f64, centers: &[f64]) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
        }
        Ok(DiscreteGaussian {
            sigma,
            tables: centers.iter().map(|&c| CumulativeTable::new(sigma, c)).collect(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, center: f64, rng: &mut R) -> i64 {
        match self.tables.iter().find(|t| t.center == center) {
            Some(t) => t.sample(rng),
            None => CumulativeTable::new(self.sigma, center).sample(rng),
        }
    }
}

/// One draw from the discrete Gaussian with variance parameter `sigma_sq`.
pub fn sample_discrete_gaussian_1d<R: Rng + ?Sized>(
    sigma_sq: f64,
    center: f64,
    rng: &mut R,
) -> Result<i64> {
    Ok(DiscreteGaussian::new(sigma_sq.sqrt())?.sample(center, rng))
}

/// Packed lower-triangular Cholesky factor, row-major.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    dim: usize,
    packed: Vec<f64>,
    /// The same factor packed by columns: column `j` holds rows `j..dim`.
    columns: Vec<f64>,
}

impl CholeskyFactor {
    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        let start = r * (r + 1) / 2;
        &self.packed[start..start + r + 1]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c > r {
            0.0
        } else {
            self.row(r)[c]
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `Sigma(s, sigma, sigma_u) = sigma^2 I - sigma_u^2 C C^T`, where `C` stacks
/// the skew circulant matrices of the secret blocks (or of `zeta s_i` in the
/// module variant).
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    dim: usize,
    scale: f64,
    entries: Vec<f64>,
    chol: Option<CholeskyFactor>,
}

impl CovarianceMatrix {
    /// Assembles the matrix without factoring it.
    pub fn assemble(blocks: &[RingElement], sigma: f64, sigma_u: f64, variant: Variant) -> Self {
        let eff = effective_blocks(blocks, variant);
        let k = eff.len();
        let n = eff[0].n();
        let dim = n * k;
        let mut entries = vec![0.0; dim * dim];
        let s2 = sigma * sigma;
        let su2 = sigma_u * sigma_u;
        for a in 0..k {
            for b in 0..k {
                // circ(e_a) circ(e_b)^T = circ(e_a * adj(e_b))
                let mut p = vec![0i64; n];
                negacyclic_mul_acc(eff[a].coeffs(), &adjoint(eff[b].coeffs()), &mut p);
                for i in 0..n {
                    for j in 0..n {
                        let circ = if i >= j { p[i - j] } else { -p[n + i - j] };
                        let diag = if a == b && i == j { s2 } else { 0.0 };
                        entries[(a * n + i) * dim + b * n + j] = diag - su2 * circ as f64;
                    }
                }
            }
        }
        CovarianceMatrix {
            dim,
            scale: s2,
            entries,
            chol: None,
        }
    }

    /// Diagonal covariance `sigma^2 I_dim`, with its factor `sigma I` in place.
    pub fn scaled_identity(dim: usize, sigma: f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        let mut packed = vec![0.0; dim * (dim + 1) / 2];
        let mut columns = vec![0.0; packed.len()];
        let mut col_start = 0;
        for i in 0..dim {
            entries[i * dim + i] = sigma * sigma;
            packed[i * (i + 1) / 2 + i] = sigma;
            columns[col_start] = sigma;
            col_start += dim - i;
        }
        CovarianceMatrix {
            dim,
            scale: sigma * sigma,
            entries,
            chol: Some(CholeskyFactor { dim, packed, columns }),
        }
    }

    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let scale = (0..dim).map(|i| entries[i * dim + i]).fold(0.0, f64::max);
        Ok(CovarianceMatrix {
            dim,
            scale,
            entries,
            chol: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim + c]
    }

    pub fn cholesky(&self) -> Option<&CholeskyFactor> {
        self.chol.as_ref()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let max = self.entries.iter().map(|x| x.abs()).fold(0.0, f64::max);
        (0..self.dim).all(|r| {
            (0..r).all(|c| (self.get(r, c) - self.get(c, r)).abs() <= rel_tol * max)
        })
    }

    /// Computes and caches the Cholesky factor. Fails when a pivot drops to
    /// `1e-9 * sigma^2` or below.
    pub fn factor(&mut self) -> Result<()> {
        if self.chol.is_some() {
            return Ok(());
        }
        let d = self.dim;
        let threshold = PIVOT_THRESHOLD * self.scale;
        let mut packed = vec![0.0; d * (d + 1) / 2];
        for i in 0..d {
            let ri = i * (i + 1) / 2;
            for j in 0..=i {
                let rj = j * (j + 1) / 2;
                let dot = dot_lanes(&packed[ri..ri + j], &packed[rj..rj + j]);
                let s = self.entries[i * d + j] - dot;
                if i == j {
                    if s <= threshold || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            "Cholesky pivot {s:.6e} at index {i} is below {threshold:.3e}"
                        )));
                    }
                    packed[ri + i] = s.sqrt();
                } else {
                    packed[ri + j] = s / packed[rj + j];
                }
            }
        }
        let mut columns = Vec::with_capacity(packed.len());
        for j in 0..d {
            columns.extend((j..d).map(|i| packed[i * (i + 1) / 2 + j]));
        }
        self.chol = Some(CholeskyFactor {
            dim: d,
            packed,
            columns,
        });
        Ok(())
    }

    /// Largest absolute entry of `L L^T - Sigma`.
    pub fn cholesky_residual(&self) -> Option<f64> {
        let l = self.chol.as_ref()?;
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..=r {
                let v: f64 = (0..=c).map(|t| l.get(r, t) * l.get(c, t)).sum();
                worst = worst.max((v - self.get(r, c)).abs());
            }
        }
        Some(worst)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Draws `round(center + L g)` into `out`. `scratch` is resized as needed.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        center: Option<&[f64]>,
        rng: &mut R,
        scratch: &mut Vec<f64>,
        out: &mut [i64],
    ) -> Result<()> {
        let l = self
            .chol
            .as_ref()
            .ok_or_else(|| Error::NotPositiveDefinite("covariance has not been factored".into()))?;
        let d = self.dim;
        scratch.resize(2 * d, 0.0);
        let (g, acc) = scratch.split_at_mut(d);
        for x in g.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        match center {
            Some(c) => acc.copy_from_slice(&c[..d]),
            None => acc.fill(0.0),
        }
        lower_matvec_acc(&l.columns, g, acc);
        for (o, y) in out[..d].iter_mut().zip(acc.iter()) {
            *o = y.round() as i64;
        }
        Ok(())
    }
}

/// `acc += L g` for `L` lower triangular, packed by columns. Each `acc[r]`
/// sums its terms in column order, so vector width does not change results.
#[inline(always)]
fn lower_matvec_acc_body(columns: &[f64], g: &[f64], acc: &mut [f64]) {
    let d = g.len();
    let mut start = 0;
    for (j, &gj) in g.iter().enumerate() {
        let col = &columns[start..start + d - j];
        start += d - j;
        for (a, &l) in acc[j..].iter_mut().zip(col) {
            *a += l * gj;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn lower_matvec_acc_avx2(columns: &[f64], g: &[f64], acc: &mut [f64]) {
    lower_matvec_acc_body(columns, g, acc)
}

fn lower_matvec_acc(columns: &[f64], g: &[f64], acc: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2.
            return unsafe { lower_matvec_acc_avx2(columns, g, acc) };
        }
    }
    lower_matvec_acc_body(columns, g, acc)
}

/// Eight-lane dot product.
#[inline(always)]
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Secret blocks as they enter the covariance: `s_i` or `zeta s_i`.
pub fn effective_blocks(blocks: &[RingElement], variant: Variant) -> Vec<RingElement> {
    match variant {
        Variant::Generic => blocks.to_vec(),
        Variant::Module => blocks.iter().map(RingElement::zeta_mul).collect(),
    }
}

/// Builds and factors `Sigma(s, sigma, sigma_u)`.
///
/// The spectral norm of `C` is checked first: when `sigma_u^2 sigma_1(C)^2`
/// clearly exceeds `sigma^2` the matrix is reported non-positive-definite
/// without an O((nk)^3) factorization. Everything else is decided by Cholesky.
pub fn build_covariance(
    blocks: &[RingElement],
    sigma: f64,
    sigma_u: f64,
    variant: Variant,
) -> Result<CovarianceMatrix> {
    if blocks.is_empty() {
        return Err(Error::Domain("secret has no blocks".into()));
    }
    let eff = effective_blocks(blocks, variant);
    let s1 = spectral::largest_singular_value(&eff)?;
    let lambda_min = sigma * sigma - sigma_u * sigma_u * s1 * s1;
    if lambda_min < -1e-6 * sigma * sigma {
        return Err(Error::NotPositiveDefinite(format!(
            "sigma/sigma_u = {:.4} <= sigma_1 = {s1:.4} (smallest eigenvalue {lambda_min:.4e})",
            sigma / sigma_u
        )));
    }
    let mut cov = CovarianceMatrix::assemble(blocks, sigma, sigma_u, variant);
    cov.factor()?;
    Ok(cov)
}

/// One draw from the rounded multivariate Gaussian `round(N(center, Sigma))`.
pub fn sample_multivariate_gaussian<R: Rng + ?Sized>(
    cov: &CovarianceMatrix,
    center: &[f64],
    rng: &mut R,
) -> Result<Vec<i64>> {
    if center.len() != cov.dim() {
        return Err(Error::Dimension {
            expected: cov.dim(),
            got: center.len(),
        });
    }
    let mut out = vec![0; cov.dim()];
    cov.sample_into(Some(center), rng, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// Cauchy `C(alpha, beta)` restricted to `[alpha - L, alpha + L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedCauchy {
    pub alpha: f64,
    pub beta: f64,
    pub half_width: f64,
}

impl TruncatedCauchy {
    pub fn new(alpha: f64, beta: f64, half_width: f64) -> Result<Self> {
        if !(beta > 0.0 && half_width > 0.0) {
            return Err(Error::Domain(format!(
                "truncated Cauchy needs beta > 0 and L > 0 (beta = {beta}, L = {half_width})"
            )));
        }
        Ok(TruncatedCauchy {
            alpha,
            beta,
            half_width,
        })
    }

    /// Inverse-CDF draw.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let theta = (self.half_width / self.beta).atan();
        self.alpha + self.beta * ((2.0 * u - 1.0) * theta).tan()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let theta = (self.half_width / self.beta).atan();
        let t = ((x - self.alpha) / self.beta).atan().clamp(-theta, theta);
        0.5 + t / (2.0 * theta)
    }
}

pub fn sample_truncated_cauchy<R: Rng + ?Sized>(
    alpha: f64,
    beta: f64,
    half_width: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(TruncatedCauchy::new(alpha, beta, half_width)?.sample(rng))
}
