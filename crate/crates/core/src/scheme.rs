//! Key generation, signing and verification for the generic G+G scheme and
//! its module variant, plus the public-key forgery for the module variant.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::error::{Error, Result};
use crate::params::{SchemeParams, Variant};
use crate::ring::{center_mod, l2_norm, negacyclic_mul_acc, RingElement};
use crate::sampling::{
    build_covariance, fill_challenge, sample_uniform_eta, sample_uniform_mod, CovarianceMatrix,
    DiscreteGaussian,
};
use crate::spectral;

/// Keygen gives up after this many rejected candidates.
pub const KEYGEN_RETRY_CAP: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicKey {
    pub variant: Variant,
    /// `m x k` matrix over `R_{2q}`, centered in `(-q, q]`.
    pub a: Vec<Vec<RingElement>>,
    /// `b` before decomposition, centered mod q.
    pub b: Vec<RingElement>,
    /// `A_0`, `m x (k - m - 1)`, centered mod q.
    pub a0: Vec<Vec<RingElement>>,
    /// Module variant only: the uniform offset `a` and the parts `b_0`, `b_1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<RingElement>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<Vec<RingElement>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<Vec<RingElement>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecretKey {
    /// `(1 | s_1 | s_2)`, or `(1 | s_1 | s_2 - b_0)` in the module variant.
    pub s: Vec<RingElement>,
}

impl SecretKey {
    pub fn norm(&self) -> f64 {
        l2_norm(&self.s)
    }

    /// Secret coefficients of blocks `1..k` as a `(k-1) x n` matrix.
    pub fn attack_target(&self) -> Vec<Vec<i64>> {
        self.s[1..].iter().map(|b| b.coeffs().to_vec()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub z: Vec<RingElement>,
    pub c: RingElement,
}

impl Signature {
    pub fn norm(&self) -> f64 {
        l2_norm(&self.z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvalidReason {
    HashMismatch,
    NormExceeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "verdict", content = "reason")]
pub enum Verdict {
    Valid,
    Invalid(InvalidReason),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Valid => write!(f, "valid"),
            Verdict::Invalid(InvalidReason::HashMismatch) => write!(f, "invalid(hash-mismatch)"),
            Verdict::Invalid(InvalidReason::NormExceeded) => write!(f, "invalid(norm-exceeded)"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeygenOptions {
    /// Module variant: reject keys with `sigma_1(zeta s) >= S`.
    pub sigma1_filter: bool,
}

/// Per-coefficient split of `b` into `(b_0, b_1)` with `b_0 + b_1 = b`.
pub fn decompose_b(b: &[i64], d: u8) -> (Vec<i64>, Vec<i64>) {
    if d == 0 {
        return (vec![0; b.len()], b.to_vec());
    }
    b.iter()
        .map(|&x| match x.rem_euclid(4) {
            1 => (x - 1, 1),
            3 => (x + 1, -1),
            _ => (0, x),
        })
        .unzip()
}

fn matvec_mod(rows: &[Vec<RingElement>], x: &[RingElement], modulus: i64) -> Result<Vec<RingElement>> {
    rows.iter()
        .map(|row| {
            let n = x[0].n();
            let mut acc = RingElement::zero(n);
            for (a, s) in row.iter().zip(x) {
                acc = &acc + &a.mul_mod(s, modulus)?;
            }
            Ok(acc.reduce(modulus))
        })
        .collect()
}

/// `q J` as ring elements: `J = (1, 0, ..., 0)` (generic) or `(zeta*, 0, ..., 0)`.
fn j_column(params: &SchemeParams) -> Vec<RingElement> {
    let n = params.n;
    let mut col = vec![RingElement::zero(n); params.m];
    col[0] = match params.variant {
        Variant::Generic => RingElement::one(n),
        Variant::Module => RingElement::zeta_star(n),
    };
    col
}

fn assemble_a(
    params: &SchemeParams,
    first: &[RingElement],
    a0: &[Vec<RingElement>],
) -> Vec<Vec<RingElement>> {
    let two_q = 2 * params.q;
    let n = params.n;
    (0..params.m)
        .map(|r| {
            let mut row = Vec::with_capacity(params.k);
            row.push(first[r].reduce(two_q));
            row.extend(a0[r].iter().map(|e| e.scale(2).reduce(two_q)));
            for c in 0..params.m {
                row.push(if c == r {
                    RingElement::monomial(n, 0, 2)
                } else {
                    RingElement::zero(n)
                });
            }
            row
        })
        .collect()
}

pub fn keygen<R: Rng + ?Sized>(params: &SchemeParams, rng: &mut R) -> Result<(PublicKey, SecretKey)> {
    keygen_with(params, KeygenOptions::default(), rng)
}

pub fn keygen_with<R: Rng + ?Sized>(
    params: &SchemeParams,
    opts: KeygenOptions,
    rng: &mut R,
) -> Result<(PublicKey, SecretKey)> {
    params.validate()?;
    match params.variant {
        Variant::Generic => keygen_generic(params, rng),
        Variant::Module => keygen_module(params, opts, rng),
    }
}

fn keygen_generic<R: Rng + ?Sized>(p: &SchemeParams, rng: &mut R) -> Result<(PublicKey, SecretKey)> {
    let (n, q) = (p.n, p.q);
    let l = p.k - p.m - 1;
    let b_s = p.b_s.unwrap_or(f64::INFINITY);
    let mut s = None;
    for _ in 0..KEYGEN_RETRY_CAP {
        let mut cand = vec![RingElement::one(n)];
        cand.extend((1..p.k).map(|_| sample_uniform_eta(n, p.eta, rng)));
        // a key whose covariance is not positive definite cannot sign at all
        if l2_norm(&cand) < b_s
            && spectral::largest_singular_value(&cand)? < p.sigma / p.sigma_u
        {
            s = Some(cand);
            break;
        }
    }
    let s = s.ok_or_else(|| {
        Error::Infeasible(format!(
            "no secret with ||s|| < B_s = {b_s} and sigma_1(s) < sigma/sigma_u in \
             {KEYGEN_RETRY_CAP} attempts"
        ))
    })?;
    let a0: Vec<Vec<RingElement>> =
        (0..p.m).map(|_| (0..l).map(|_| sample_uniform_mod(n, q, rng)).collect()).collect();
    let (s1, s2) = (&s[1..=l], &s[l + 1..]);
    let b: Vec<RingElement> = matvec_mod(&a0, s1, q)?
        .iter()
        .zip(s2)
        .map(|(x, y)| (x + y).reduce(q))
        .collect();
    let qj = j_column(p);
    let first: Vec<RingElement> =
        b.iter().zip(&qj).map(|(b, j)| &b.scale(-2) + &j.scale(q)).collect();
    let a = assemble_a(p, &first, &a0);
    Ok((
        PublicKey {
            variant: Variant::Generic,
            a,
            b,
            a0,
            offset: None,
            b0: None,
            b1: None,
        },
        SecretKey { s },
    ))
}

fn keygen_module<R: Rng + ?Sized>(
    p: &SchemeParams,
    opts: KeygenOptions,
    rng: &mut R,
) -> Result<(PublicKey, SecretKey)> {
    let (n, q) = (p.n, p.q);
    let l = p.k - p.m - 1;
    for _ in 0..KEYGEN_RETRY_CAP {
        let offset: Vec<RingElement> = (0..p.m).map(|_| sample_uniform_mod(n, q, rng)).collect();
        let a0: Vec<Vec<RingElement>> =
            (0..p.m).map(|_| (0..l).map(|_| sample_uniform_mod(n, q, rng)).collect()).collect();
        let s1: Vec<RingElement> = (0..l).map(|_| sample_uniform_eta(n, p.eta, rng)).collect();
        let s2: Vec<RingElement> = (0..p.m).map(|_| sample_uniform_eta(n, p.eta, rng)).collect();
        let b: Vec<RingElement> = matvec_mod(&a0, &s1, q)?
            .iter()
            .zip(&s2)
            .zip(&offset)
            .map(|((x, y), a)| (&(x + y) + a).reduce(q))
            .collect();
        let (b0, b1): (Vec<RingElement>, Vec<RingElement>) = b
            .iter()
            .map(|bi| {
                let (lo, hi) = decompose_b(bi.coeffs(), p.d);
                (RingElement::from_vec_unchecked(lo), RingElement::from_vec_unchecked(hi))
            })
            .unzip();
        let mut s = vec![RingElement::one(n)];
        s.extend(s1);
        s.extend(s2.iter().zip(&b0).map(|(x, y)| x - y));
        if opts.sigma1_filter {
            if let Some(bound) = p.s_bound {
                let eff: Vec<RingElement> = s.iter().map(RingElement::zeta_mul).collect();
                if spectral::largest_singular_value(&eff)? >= bound {
                    continue;
                }
            }
        }
        let qj = j_column(p);
        let first: Vec<RingElement> = offset
            .iter()
            .zip(&b1)
            .zip(&qj)
            .map(|((a, b1), j)| &(a - b1).scale(2) + &j.scale(q))
            .collect();
        let a = assemble_a(p, &first, &a0);
        return Ok((
            PublicKey {
                variant: Variant::Module,
                a,
                b,
                a0,
                offset: Some(offset),
                b0: Some(b0),
                b1: Some(b1),
            },
            SecretKey { s },
        ));
    }
    Err(Error::Infeasible(format!(
        "no key with sigma_1(zeta s) < S in {KEYGEN_RETRY_CAP} attempts"
    )))
}

/// `A s^T - q J^T mod 2q`; zero exactly when the key equation holds.
pub fn key_equation_residual(params: &SchemeParams, pk: &PublicKey, s: &[RingElement]) -> Result<Vec<RingElement>> {
    let two_q = 2 * params.q;
    let qj = j_column(params);
    Ok(matvec_mod(&pk.a, s, two_q)?
        .iter()
        .zip(&qj)
        .map(|(v, j)| (v - &j.scale(params.q)).reduce(two_q))
        .collect())
}

/// Challenge from SHAKE256 over `v` (coefficients centered in `(-q, q]` as
/// little-endian `i32`, row-major) followed by `msg`. Output bits are read
/// least-significant first within each byte.
pub fn hash_to_challenge(v: &[RingElement], msg: &[u8], params: &SchemeParams) -> RingElement {
    let two_q = 2 * params.q;
    let mut buf = Vec::with_capacity(v.len() * params.n * 4 + msg.len());
    for row in v {
        for &c in row.coeffs() {
            buf.extend_from_slice(&(center_mod(c, two_q) as i32).to_le_bytes());
        }
    }
    buf.extend_from_slice(msg);
    let mut h = Shake256::default();
    h.update(&buf);
    let mut reader = h.finalize_xof();
    let bits = params.challenge_bits();
    let mut bytes = vec![0u8; bits.div_ceil(8)];
    reader.read(&mut bytes);
    let mut c = vec![0i64; params.n];
    for (j, cj) in c.iter_mut().enumerate().take(bits) {
        *cj = ((bytes[j / 8] >> (j % 8)) & 1) as i64;
    }
    RingElement::from_vec_unchecked(c)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignerOptions {
    /// Sample `y` from `sigma^2 I` when `Sigma(s, sigma, sigma_u)` is not
    /// positive definite instead of failing.
    pub diag_fallback: bool,
}

/// Scratch buffers for the signing hot loop.
#[derive(Clone, Debug, Default)]
pub struct SignWorkspace {
    normals: Vec<f64>,
    pub y: Vec<i64>,
    pub u: Vec<i64>,
    pub w: Vec<i64>,
    pub c: Vec<i64>,
    /// `z` flattened block-major, length `nk`.
    pub z: Vec<i64>,
}

impl SignWorkspace {
    pub fn new(n: usize, k: usize) -> Self {
        SignWorkspace {
            normals: vec![0.0; n * k],
            y: vec![0; n * k],
            u: vec![0; n],
            w: vec![0; n],
            c: vec![0; n],
            z: vec![0; n * k],
        }
    }

    pub fn signature(&self, n: usize) -> Signature {
        Signature {
            z: self.z.chunks(n).map(|b| RingElement::from_vec_unchecked(b.to_vec())).collect(),
            c: RingElement::from_vec_unchecked(self.c.clone()),
        }
    }
}

/// Intermediate values of one signing run.
#[derive(Clone, Debug, PartialEq)]
pub struct SignTrace {
    pub y: Vec<RingElement>,
    pub u: RingElement,
    pub v: Vec<RingElement>,
}

/// Signing context holding the factored covariance for one key.
#[derive(Clone, Debug)]
pub struct Signer {
    params: SchemeParams,
    pk: PublicKey,
    s: Vec<Vec<i64>>,
    cov: CovarianceMatrix,
    fallback_used: bool,
    u_sampler: DiscreteGaussian,
}

impl Signer {
    pub fn new(params: &SchemeParams, pk: &PublicKey, sk: &SecretKey, opts: SignerOptions) -> Result<Self> {
        params.validate()?;
        if sk.s.len() != params.k {
            return Err(Error::Dimension {
                expected: params.k,
                got: sk.s.len(),
            });
        }
        let (cov, fallback_used) =
            match build_covariance(&sk.s, params.sigma, params.sigma_u, params.variant) {
                Ok(c) => (c, false),
                Err(Error::NotPositiveDefinite(_)) if opts.diag_fallback => {
                    (CovarianceMatrix::scaled_identity(params.dim(), params.sigma), true)
                }
                Err(e) => return Err(e),
            };
        Ok(Signer {
            params: params.clone(),
            pk: pk.clone(),
            s: sk.s.iter().map(|b| b.coeffs().to_vec()).collect(),
            cov,
            fallback_used,
            u_sampler: DiscreteGaussian::with_centers(params.sigma_u, &[0.0, -0.5, 0.5])?,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.cov
    }

    /// True when `y` is drawn from the diagonal fallback `sigma^2 I`.
    pub fn fallback_used(&self) -> bool {
        self.fallback_used
    }

    pub fn workspace(&self) -> SignWorkspace {
        SignWorkspace::new(self.params.n, self.params.k)
    }

    #[inline]
    fn sample_y<R: Rng + ?Sized>(&self, rng: &mut R, ws: &mut SignWorkspace) -> Result<()> {
        self.cov.sample_into(None, rng, &mut ws.normals, &mut ws.y)
    }

    /// Draws `u` for the challenge in `ws.c` and sets `z = y + w s`, where
    /// `w = 2u + c` (generic) or `zeta u + c` (module).
    #[inline]
    fn finish<R: Rng + ?Sized>(&self, rng: &mut R, ws: &mut SignWorkspace) {
        let n = self.params.n;
        let h = n / 2;
        match self.params.variant {
            Variant::Generic => {
                for j in 0..n {
                    let centre = if ws.c[j] == 0 { 0.0 } else { -0.5 };
                    ws.u[j] = self.u_sampler.sample(centre, rng);
                    ws.w[j] = 2 * ws.u[j] + ws.c[j];
                }
            }
            Variant::Module => {
                // centre -zeta* c / 2, then w = zeta u + c
                for j in 0..n {
                    let zs = if j < h { ws.c[j] + ws.c[j + h] } else { ws.c[j] - ws.c[j - h] };
                    let centre = -(zs as f64) / 2.0;
                    ws.u[j] = self.u_sampler.sample(centre, rng);
                }
                for j in 0..h {
                    ws.w[j] = ws.u[j] - ws.u[j + h] + ws.c[j];
                    ws.w[j + h] = ws.u[j] + ws.u[j + h] + ws.c[j + h];
                }
            }
        }
        ws.z.copy_from_slice(&ws.y);
        for (zi, si) in ws.z.chunks_mut(n).zip(&self.s) {
            negacyclic_mul_acc(si, &ws.w, zi);
        }
    }

    /// Signs with the challenge drawn uniformly instead of hashed. Used by the
    /// attack, where only the distribution of `(z, c)` matters.
    #[inline]
    pub fn sample_unhashed<R: Rng + ?Sized>(&self, rng: &mut R, ws: &mut SignWorkspace) -> Result<()> {
        self.sample_y(rng, ws)?;
        let bits = self.params.challenge_bits();
        ws.c.iter_mut().for_each(|x| *x = 0);
        fill_challenge(&mut ws.c[..bits], rng);
        self.finish(rng, ws);
        Ok(())
    }

    fn commitment(&self, y: &[i64]) -> Result<Vec<RingElement>> {
        let n = self.params.n;
        let y: Vec<RingElement> =
            y.chunks(n).map(|b| RingElement::from_vec_unchecked(b.to_vec())).collect();
        matvec_mod(&self.pk.a, &y, 2 * self.params.q)
    }

    /// Full signing into `ws`, returning the commitment `v = A y mod 2q`.
    pub fn sign_into<R: Rng + ?Sized>(
        &self,
        msg: &[u8],
        rng: &mut R,
        ws: &mut SignWorkspace,
    ) -> Result<Vec<RingElement>> {
        self.sample_y(rng, ws)?;
        let v = self.commitment(&ws.y)?;
        ws.c.copy_from_slice(hash_to_challenge(&v, msg, &self.params).coeffs());
        self.finish(rng, ws);
        Ok(v)
    }

    pub fn sign<R: Rng + ?Sized>(&self, msg: &[u8], rng: &mut R) -> Result<Signature> {
        let mut ws = self.workspace();
        self.sign_into(msg, rng, &mut ws)?;
        Ok(ws.signature(self.params.n))
    }

    pub fn sign_traced<R: Rng + ?Sized>(&self, msg: &[u8], rng: &mut R) -> Result<(Signature, SignTrace)> {
        let mut ws = self.workspace();
        let v = self.sign_into(msg, rng, &mut ws)?;
        let n = self.params.n;
        let trace = SignTrace {
            y: ws.y.chunks(n).map(|b| RingElement::from_vec_unchecked(b.to_vec())).collect(),
            u: RingElement::from_vec_unchecked(ws.u.clone()),
            v,
        };
        Ok((ws.signature(n), trace))
    }
}

/// One-shot signing. Builds and factors the covariance on every call; use a
/// [`Signer`] for repeated signing.
pub fn sign<R: Rng + ?Sized>(
    msg: &[u8],
    pk: &PublicKey,
    sk: &SecretKey,
    params: &SchemeParams,
    rng: &mut R,
) -> Result<Signature> {
    Signer::new(params, pk, sk, SignerOptions::default())?.sign(msg, rng)
}

/// `A z^T - q c J^T mod 2q`.
pub fn recompute_commitment(pk: &PublicKey, sig: &Signature, params: &SchemeParams) -> Result<Vec<RingElement>> {
    let two_q = 2 * params.q;
    let mut v = matvec_mod(&pk.a, &sig.z, two_q)?;
    let cj = match params.variant {
        Variant::Generic => sig.c.clone(),
        Variant::Module => sig.c.zeta_star_mul(),
    };
    v[0] = (&v[0] - &cj.scale(params.q)).reduce(two_q);
    Ok(v)
}

/// Hash-equation half of verification: `H(A z - q c J, msg) = c`.
pub fn hash_equation_holds(msg: &[u8], pk: &PublicKey, sig: &Signature, params: &SchemeParams) -> Result<bool> {
    Ok(hash_to_challenge(&recompute_commitment(pk, sig, params)?, msg, params) == sig.c)
}

pub fn verify(msg: &[u8], pk: &PublicKey, sig: &Signature, params: &SchemeParams) -> Result<Verdict> {
    if sig.z.len() != params.k {
        return Err(Error::Dimension {
            expected: params.k,
            got: sig.z.len(),
        });
    }
    if sig.z.iter().chain(std::iter::once(&sig.c)).any(|e| e.n() != params.n) {
        return Err(Error::Malformed(format!("signature ring degree differs from n = {}", params.n)));
    }
    if !hash_equation_holds(msg, pk, sig, params)? {
        return Ok(Verdict::Invalid(InvalidReason::HashMismatch));
    }
    if sig.norm() > params.norm_bound() {
        return Ok(Verdict::Invalid(InvalidReason::NormExceeded));
    }
    Ok(Verdict::Valid)
}

/// Recovers `(a - b_1) mod q` and `A_0` from the public matrix alone.
pub fn extract_forgery_material(pk: &PublicKey, params: &SchemeParams) -> (Vec<RingElement>, Vec<Vec<RingElement>>) {
    let q = params.q;
    let qj = j_column(params);
    let halve = |e: &RingElement| {
        RingElement::from_vec_unchecked(
            e.reduce(2 * q).coeffs().iter().map(|&x| center_mod(x / 2, q)).collect(),
        )
    };
    let a_bar = pk
        .a
        .iter()
        .zip(&qj)
        .map(|(row, j)| halve(&(&row[0] - &j.scale(q)).reduce(2 * q)))
        .collect();
    let l = params.k - params.m - 1;
    let a0 = pk.a.iter().map(|row| row[1..=l].iter().map(halve).collect()).collect();
    (a_bar, a0)
}

/// A signing key derived from the public key alone, and the signature it produces.
#[derive(Clone, Debug)]
pub struct Forgery {
    pub key: SecretKey,
    pub signature: Signature,
    pub fallback_used: bool,
}

/// Forges a module-variant signature from `pk` alone.
///
/// Sets `s_2' = -a_bar - A_0 s_1' mod q` so that `A (1 | s_1' | s_2')^T = q J^T`
/// modulo `2q`, then signs on the module path (with the diagonal fallback
/// when `Sigma` is not positive definite).
pub fn forge_signature<R: Rng + ?Sized>(
    pk: &PublicKey,
    msg: &[u8],
    params: &SchemeParams,
    rng: &mut R,
) -> Result<Forgery> {
    if params.variant != Variant::Module {
        return Err(Error::InvalidParams("forgery targets the module variant".into()));
    }
    let n = params.n;
    let l = params.k - params.m - 1;
    let (a_bar, a0) = extract_forgery_material(pk, params);
    let s1: Vec<RingElement> = (0..l).map(|_| sample_uniform_eta(n, params.eta, rng)).collect();
    let prod = matvec_mod(&a0, &s1, params.q)?;
    let s2: Vec<RingElement> =
        a_bar.iter().zip(&prod).map(|(a, p)| (-&(a + p)).reduce(params.q)).collect();
    let mut s = vec![RingElement::one(n)];
    s.extend(s1);
    s.extend(s2);
    let key = SecretKey { s };
    let signer = Signer::new(params, pk, &key, SignerOptions { diag_fallback: true })?;
    let signature = signer.sign(msg, rng)?;
    Ok(Forgery {
        key,
        signature,
        fallback_used: signer.fallback_used(),
    })
}
