//! Experiments on the module variant: covariance positive-definiteness,
//! signature-norm invalidity and forgery from the public key.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SchemeParams, Variant};
use crate::rng::{RngStream, WorkerRng};
use crate::sampling::effective_blocks;
use crate::scheme::{
    self, hash_equation_holds, keygen_with, verify, KeygenOptions, SecretKey, Signer, SignerOptions, Verdict,
};
use crate::spectral;

const LABEL_PD: u64 = 0x5044;
const LABEL_INVALID: u64 = 0x4956;
const LABEL_FORGE: u64 = 0x4647;

pub const DEFAULT_PD_TRIALS: u64 = 1000;
pub const DEFAULT_TRIALS: u64 = 100;

fn require_module(params: &SchemeParams) -> Result<()> {
    match params.variant {
        Variant::Module => Ok(()),
        Variant::Generic => Err(Error::InvalidParams("this experiment needs module parameters".into())),
    }
}

/// Runs `f(trial, rng)` for every trial on `workers` threads, each on its own
/// stream, and returns the results in trial order.
fn per_trial<T, F>(trials: u64, seed: u64, label: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut WorkerRng) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| f(t, &mut RngStream::new(seed, t).child(label).rng()))
            .collect()
    })
}

/// Largest singular value of the stacked skew circulant matrix of `zeta s_i`.
pub fn sigma1_zeta_s(key: &SecretKey, params: &SchemeParams) -> Result<f64> {
    require_module(params)?;
    spectral::largest_singular_value(&effective_blocks(&key.s, Variant::Module))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdExperimentReport {
    pub params_digest: String,
    pub trials: u64,
    pub pd_count: u64,
    pub sigma1_mean: f64,
    pub sigma1_sd: f64,
    pub sigma1_min: f64,
    pub sigma1_max: f64,
    pub sigma_over_sigma_u: f64,
    /// The keygen bound `S`, when the set has one.
    pub s_bound: Option<f64>,
    /// Keys with `sigma_1(zeta s) < S`, i.e. those keygen accepts with the filter on.
    pub below_s_bound: u64,
    /// Positive-definite covariances among the keys below `S`.
    pub pd_below_s_bound: u64,
}

impl PdExperimentReport {
    pub fn pd_rate(&self) -> f64 {
        self.pd_count as f64 / self.trials as f64
    }

    pub fn filter_acceptance_rate(&self) -> f64 {
        self.below_s_bound as f64 / self.trials as f64
    }
}

/// Samples `trials` unfiltered keys and counts positive-definite covariances.
///
/// `Sigma = sigma^2 I - sigma_u^2 C C^T`, so it is positive definite exactly
/// when `sigma / sigma_u > sigma_1(zeta s)`.
pub fn pd_rate_experiment(params: &SchemeParams, trials: u64, seed: u64, workers: usize) -> Result<PdExperimentReport> {
    require_module(params)?;
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let sigma1s = per_trial(trials, seed, LABEL_PD, workers, |_, rng| {
        let (_, sk) = keygen_with(params, KeygenOptions { sigma1_filter: false }, rng)?;
        sigma1_zeta_s(&sk, params)
    })?;
    let ratio = params.sigma / params.sigma_u;
    let nf = trials as f64;
    let mean = sigma1s.iter().sum::<f64>() / nf;
    let var = if trials > 1 {
        sigma1s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let pd = |x: &&f64| **x < ratio;
    let below: Vec<f64> = match params.s_bound {
        Some(s) => sigma1s.iter().copied().filter(|x| *x < s).collect(),
        None => sigma1s.clone(),
    };
    Ok(PdExperimentReport {
        params_digest: params.digest(),
        trials,
        pd_count: sigma1s.iter().filter(pd).count() as u64,
        sigma1_mean: mean,
        sigma1_sd: var.sqrt(),
        sigma1_min: sigma1s.iter().copied().fold(f64::INFINITY, f64::min),
        sigma1_max: sigma1s.iter().copied().fold(0.0, f64::max),
        sigma_over_sigma_u: ratio,
        s_bound: params.s_bound,
        below_s_bound: below.len() as u64,
        pd_below_s_bound: below.iter().filter(pd).count() as u64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    pub m: usize,
    pub n: usize,
    pub q: i64,
    pub q_bar: i64,
    /// `sqrt(m (n/2) q_bar (q_bar + 1) / 3)`.
    pub bound: f64,
    pub gamma: f64,
    /// Whether an honest signature can meet `||z|| <= gamma`.
    pub valid: bool,
}

impl NormBoundReport {
    pub fn verdict(&self) -> &'static str {
        if self.valid {
            "valid"
        } else {
            "invalid"
        }
    }
}

/// Lower estimate of `||s_2 - b_0||` when `b_0` is uniform over multiples of 4,
/// compared against `gamma`.
pub fn norm_bound_check(params: &SchemeParams) -> Result<NormBoundReport> {
    require_module(params)?;
    if params.d != 1 {
        return Err(Error::InvalidParams(format!("the norm bound applies to d = 1, not d = {}", params.d)));
    }
    let gamma = params
        .gamma
        .ok_or_else(|| Error::InvalidParams("module parameters need gamma".into()))?;
    let q_bar = (params.q - 1) / 2;
    let qb = q_bar as f64;
    let bound = (params.m as f64 * (params.n as f64 / 2.0) * qb * (qb + 1.0) / 3.0).sqrt();
    Ok(NormBoundReport {
        m: params.m,
        n: params.n,
        q: params.q,
        q_bar,
        bound,
        gamma,
        valid: bound <= gamma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvalidityReport {
    pub params_digest: String,
    pub trials: u64,
    /// Signatures with `||z|| <= gamma`.
    pub within_gamma: u64,
    /// Signatures that also pass the full verifier.
    pub verified: u64,
    pub fallback_used: u64,
    pub norm_mean: f64,
    pub norm_min: f64,
    pub gamma: f64,
}

fn trial_message(t: u64) -> Vec<u8> {
    format!("trial-{t}").into_bytes()
}

/// Honest keygen and signing, `trials` times; counts signatures meeting the
/// norm bound. Signing falls back to `sigma^2 I` when `Sigma` is not
/// positive definite and `diag_fallback` is set.
pub fn empirical_invalidity(
    params: &SchemeParams,
    trials: u64,
    seed: u64,
    workers: usize,
    diag_fallback: bool,
) -> Result<InvalidityReport> {
    require_module(params)?;
    let gamma = params
        .gamma
        .ok_or_else(|| Error::InvalidParams("module parameters need gamma".into()))?;
    let rows = per_trial(trials, seed, LABEL_INVALID, workers, |t, rng| {
        let (pk, sk) = scheme::keygen(params, rng)?;
        let signer = Signer::new(params, &pk, &sk, SignerOptions { diag_fallback })?;
        let msg = trial_message(t);
        let sig = signer.sign(&msg, rng)?;
        let ok = verify(&msg, &pk, &sig, params)? == Verdict::Valid;
        Ok((sig.norm(), ok, signer.fallback_used()))
    })?;
    Ok(InvalidityReport {
        params_digest: params.digest(),
        trials,
        within_gamma: rows.iter().filter(|r| r.0 <= gamma).count() as u64,
        verified: rows.iter().filter(|r| r.1).count() as u64,
        fallback_used: rows.iter().filter(|r| r.2).count() as u64,
        norm_mean: rows.iter().map(|r| r.0).sum::<f64>() / trials.max(1) as f64,
        norm_min: rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        gamma,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgeryReport {
    pub params_digest: String,
    pub trials: u64,
    /// Forgeries whose commitment hashes back to their challenge.
    pub hash_consistent: u64,
    pub forged_within_gamma: u64,
    pub honest_within_gamma: u64,
    /// Forgeries rejected on the hash check after flipping one challenge bit.
    pub tamper_detected: u64,
}

impl ForgeryReport {
    pub fn success_rate(&self) -> f64 {
        self.hash_consistent as f64 / self.trials as f64
    }
}

/// Honest keygen, then a forgery from the public key alone, `trials` times.
/// Honest signatures for the norm comparison use the diagonal fallback.
pub fn forgery_experiment(params: &SchemeParams, trials: u64, seed: u64, workers: usize) -> Result<ForgeryReport> {
    require_module(params)?;
    let gamma = params.gamma.unwrap_or(f64::INFINITY);
    let rows = per_trial(trials, seed, LABEL_FORGE, workers, |t, rng| {
        let (pk, sk) = scheme::keygen(params, rng)?;
        let msg = trial_message(t);
        let forged = scheme::forge_signature(&pk, &msg, params, rng)?;
        let consistent = hash_equation_holds(&msg, &pk, &forged.signature, params)?;
        let mut tampered = forged.signature.clone();
        let mut c = tampered.c.coeffs().to_vec();
        c[0] ^= 1;
        tampered.c = crate::ring::RingElement::new(c)?;
        let detected = !hash_equation_holds(&msg, &pk, &tampered, params)?;
        let honest = Signer::new(params, &pk, &sk, SignerOptions { diag_fallback: true })?.sign(&msg, rng)?;
        Ok((consistent, forged.signature.norm() <= gamma, honest.norm() <= gamma, detected))
    })?;
    let count = |f: fn(&(bool, bool, bool, bool)) -> bool| rows.iter().filter(|r| f(r)).count() as u64;
    Ok(ForgeryReport {
        params_digest: params.digest(),
        trials,
        hash_consistent: count(|r| r.0),
        forged_within_gamma: count(|r| r.1),
        honest_within_gamma: count(|r| r.2),
        tamper_detected: count(|r| r.3),
    })
}

/// One CSV row per parameter set: the set's columns followed by experiment outputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableThreeRow {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub q: i64,
    pub d: u8,
    pub sigma: f64,
    pub sigma_u: f64,
    pub gamma: Option<f64>,
    pub s_bound: Option<f64>,
    pub sigma_over_sigma_u: f64,
    pub pd_trials: Option<u64>,
    pub pd_count: Option<u64>,
    pub sigma1_mean: Option<f64>,
    pub sigma1_sd: Option<f64>,
    pub below_s_bound: Option<u64>,
    pub norm_bound: Option<f64>,
    pub norm_verdict: Option<String>,
    pub invalidity_trials: Option<u64>,
    pub within_gamma: Option<u64>,
    pub forgery_trials: Option<u64>,
    pub hash_consistent: Option<u64>,
}

impl TableThreeRow {
    pub fn from_params(name: &str, p: &SchemeParams) -> Self {
        TableThreeRow {
            name: name.to_string(),
            n: p.n,
            k: p.k,
            m: p.m,
            q: p.q,
            d: p.d,
            sigma: p.sigma,
            sigma_u: p.sigma_u,
            gamma: p.gamma,
            s_bound: p.s_bound,
            sigma_over_sigma_u: p.sigma / p.sigma_u,
            ..Default::default()
        }
    }

    pub fn with_pd(mut self, r: &PdExperimentReport) -> Self {
        self.pd_trials = Some(r.trials);
        self.pd_count = Some(r.pd_count);
        self.sigma1_mean = Some(r.sigma1_mean);
        self.sigma1_sd = Some(r.sigma1_sd);
        self.below_s_bound = Some(r.below_s_bound);
        self
    }

    pub fn with_norm_bound(mut self, r: &NormBoundReport) -> Self {
        self.norm_bound = Some(r.bound);
        self.norm_verdict = Some(r.verdict().to_string());
        self
    }

    pub fn with_invalidity(mut self, r: &InvalidityReport) -> Self {
        self.invalidity_trials = Some(r.trials);
        self.within_gamma = Some(r.within_gamma);
        self
    }

    pub fn with_forgery(mut self, r: &ForgeryReport) -> Self {
        self.forgery_trials = Some(r.trials);
        self.hash_consistent = Some(r.hash_consistent);
        self
    }
}

pub fn write_table_three<W: std::io::Write>(rows: &[TableThreeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table_three<R: std::io::Read>(input: R) -> Result<Vec<TableThreeRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
