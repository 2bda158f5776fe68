//! The ratio key-recovery attack.
//!
//! For every secret coefficient `s_{i,j}` (blocks `i >= 1`) the attack averages
//! `z_{i,j} / z_{0,0}` over many signatures. The ratio is Cauchy distributed
//! with location `s_{i,j} alpha*`, so once the ratio is truncated its sample
//! mean converges and rounding `mean / alpha*` recovers the coefficient.
//!
//! Signatures are generated in fixed batches of [`BATCH_SIZE`]. Batch `b`
//! always draws from the same random stream and batch accumulators are merged
//! in batch order, so results do not depend on the number of workers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::params::{SchemeParams, Variant};
use crate::rng::RngStream;
use crate::scheme::{PublicKey, SecretKey, Signer, SignerOptions};

pub const BATCH_SIZE: u64 = 10_000;
pub const CHECKPOINT_INTERVAL: u64 = 1_000_000;
/// Stream label for signature generation.
pub const SIGN_STREAM_LABEL: u64 = 0x5349_474e;

const L_GRID_START: u32 = 201;
const L_GRID_END: u32 = 2000;

/// `3 sigma_u^2 / (sigma^2 + 3 sigma_u^2)`.
pub fn alpha_star(sigma: f64, sigma_u: f64) -> Result<f64> {
    if !(sigma_u > 0.0 && sigma > sigma_u) {
        return Err(Error::Domain(format!(
            "alpha* needs sigma > sigma_u > 0 (sigma = {sigma}, sigma_u = {sigma_u})"
        )));
    }
    let su2 = 3.0 * sigma_u * sigma_u;
    Ok(su2 / (sigma * sigma + su2))
}

/// Standard deviation of `z_{0,0}`: `sqrt(sigma^2 + 3 sigma_u^2)`.
pub fn sigma_z00(sigma: f64, sigma_u: f64) -> f64 {
    (sigma * sigma + 3.0 * sigma_u * sigma_u).sqrt()
}

/// Planner's common standard deviation for `z_{i,j}`, `i >= 1`.
pub fn sigma_z_cell(params: &SchemeParams) -> f64 {
    let (s, su) = (params.sigma, params.sigma_u);
    (s * s + su * su * (params.eta * (params.eta + 1)) as f64 * params.n as f64).sqrt()
}

/// Location and scale of the Cauchy law of `Y / Z` for centered normals with
/// standard deviations `sigma_y`, `sigma_z` and correlation `rho`.
pub fn cauchy_params_of_ratio(sigma_y: f64, sigma_z: f64, rho: f64) -> (f64, f64) {
    let r = sigma_y / sigma_z;
    (rho * r, r * (1.0 - rho * rho).max(0.0).sqrt())
}

/// Variance of the Cauchy law `C(alpha, beta)` truncated to `[alpha - L, alpha + L]`.
pub fn truncated_cauchy_variance(beta: f64, half_width: f64) -> f64 {
    let t = half_width / beta;
    if t < 1e-4 {
        // series of t / atan(t) - 1 keeps precision as L -> 0
        return beta * beta * (t * t / 3.0 - 4.0 * t.powi(4) / 45.0);
    }
    beta * half_width / t.atan() - beta * beta
}

/// `(e^{-t^2} + e^{-t^2/2}) / 2`, a bound on `Pr[|z| > t sigma]`.
pub fn gaussian_tail_bound(t: f64) -> Result<f64> {
    if t.is_nan() || t <= 2.0 {
        return Err(Error::Domain(format!("tail bound needs t > 2, got {t}")));
    }
    Ok(((-t * t).exp() + (-t * t / 2.0).exp()) / 2.0)
}

/// Samples needed for the mean to land within `d` of its expectation with
/// probability `Phi(omega) - Phi(-omega)`.
pub fn required_samples(omega: f64, sigma: f64, d: f64) -> f64 {
    (omega * sigma / d).powi(2)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// `Phi(omega) - Phi(-omega)`.
pub fn two_sided_probability(omega: f64) -> f64 {
    erf(omega / std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanCell {
    /// Secret coefficient value.
    pub s: i64,
    pub rho: f64,
    pub beta: f64,
    /// Standard deviation of the truncated ratio at `L*`.
    pub sigma_l: f64,
    pub n_l: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub alpha_star: f64,
    pub omega: f64,
    pub sigma_z: f64,
    pub sigma_z00: f64,
    pub sigma_w0: f64,
    /// Grid value `l` with `L* = ceil(l sigma_z)`.
    pub l: f64,
    pub l_star: f64,
    pub cells: Vec<PlanCell>,
    pub p_star: f64,
    pub n_est: f64,
    /// Ratio truncation threshold `L* / sigma_{Z00}` used when clamping.
    pub ratio_clamp: f64,
}

/// Signature-count plan for the generic variant.
///
/// Scans `l = 2.01, 2.02, ..., 20`, sets `L = ceil(l sigma_z)` and accepts the
/// first `l` with `N_L e^{-l^2/2} < 1` for every secret value. Then
/// `p* = min_s (Phi(a) - Phi(-a))` with `a = alpha* / (2 sigma_L)` and
/// `N_est = 1 / p*^2`.
pub fn make_plan(params: &SchemeParams, omega: f64) -> Result<AttackPlan> {
    if params.variant != Variant::Generic {
        return Err(Error::InvalidParams("the planner covers the generic variant".into()));
    }
    if omega.is_nan() || omega <= 0.0 {
        return Err(Error::Domain(format!("omega = {omega} must be positive")));
    }
    let alpha = alpha_star(params.sigma, params.sigma_u)?;
    let sz = sigma_z_cell(params);
    let s00 = sigma_z00(params.sigma, params.sigma_u);
    let su2 = params.sigma_u * params.sigma_u;
    let shapes: Vec<(i64, f64, f64)> = (-params.eta..=params.eta)
        .map(|s| {
            let rho = s as f64 * 3.0 * su2 / (sz * s00);
            let (_, beta) = cauchy_params_of_ratio(sz, s00, rho);
            (s, rho, beta)
        })
        .collect();
    let n_l = |beta: f64, big_l: f64| {
        required_samples(omega, truncated_cauchy_variance(beta, big_l).sqrt(), alpha / 2.0)
    };
    let (l, big_l) = (L_GRID_START..=L_GRID_END)
        .map(|i| {
            let l = i as f64 / 100.0;
            (l, (l * sz).ceil())
        })
        .find(|&(l, big_l)| {
            shapes
                .iter()
                .all(|&(_, _, beta)| n_l(beta, big_l) * (-l * l / 2.0).exp() < 1.0)
        })
        .ok_or_else(|| Error::Infeasible("no l in (2, 20] satisfies N_L e^{-l^2/2} < 1".into()))?;
    let cells: Vec<PlanCell> = shapes
        .iter()
        .map(|&(s, rho, beta)| {
            let sigma_l = truncated_cauchy_variance(beta, big_l).sqrt();
            PlanCell {
                s,
                rho,
                beta,
                sigma_l,
                n_l: n_l(beta, big_l),
                p: two_sided_probability(alpha / (2.0 * sigma_l)),
            }
        })
        .collect();
    let p_star = cells.iter().map(|c| c.p).fold(f64::INFINITY, f64::min);
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::Numeric(format!("p* = {p_star} is outside (0, 1)")));
    }
    Ok(AttackPlan {
        alpha_star: alpha,
        omega,
        sigma_z: sz,
        sigma_z00: s00,
        sigma_w0: 2.0 * params.sigma_u,
        l,
        l_star: big_l,
        cells,
        p_star,
        n_est: 1.0 / (p_star * p_star),
        ratio_clamp: big_l / s00,
    })
}

/// Streaming per-cell sums of `z_{i,j} / z_{0,0}` for `i >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioAccumulator {
    pub rows: usize,
    pub n: usize,
    pub sums: Vec<f64>,
    pub sums_sq: Vec<f64>,
    pub counts: Vec<u64>,
    /// Signatures offered to the accumulator.
    pub seen: u64,
    /// Signatures skipped because `z_{0,0} = 0`.
    pub rejected_zero: u64,
    /// Cell samples excluded by the clamp.
    pub rejected_clamped: u64,
}

impl RatioAccumulator {
    /// Accumulator for `k - 1` secret blocks of degree `n`.
    pub fn new(rows: usize, n: usize) -> Self {
        RatioAccumulator {
            rows,
            n,
            sums: vec![0.0; rows * n],
            sums_sq: vec![0.0; rows * n],
            counts: vec![0; rows * n],
            seen: 0,
            rejected_zero: 0,
            rejected_clamped: 0,
        }
    }

    /// Adds one signature, given as `z` flattened block-major (`k n` entries).
    #[inline]
    pub fn accumulate(&mut self, z: &[i64], clamp: Option<f64>) {
        debug_assert_eq!(z.len(), (self.rows + 1) * self.n);
        self.seen += 1;
        let z00 = z[0];
        if z00 == 0 {
            self.rejected_zero += 1;
            return;
        }
        let d = z00 as f64;
        let cells = &z[self.n..];
        match clamp {
            None => {
                for (idx, &zij) in cells.iter().enumerate() {
                    let r = zij as f64 / d;
                    self.sums[idx] += r;
                    self.sums_sq[idx] += r * r;
                    self.counts[idx] += 1;
                }
            }
            Some(t) => {
                for (idx, &zij) in cells.iter().enumerate() {
                    let r = zij as f64 / d;
                    if r.abs() > t {
                        self.rejected_clamped += 1;
                        continue;
                    }
                    self.sums[idx] += r;
                    self.sums_sq[idx] += r * r;
                    self.counts[idx] += 1;
                }
            }
        }
    }

    /// Coordinatewise sum.
    pub fn merge(&mut self, other: &RatioAccumulator) -> Result<()> {
        if (self.rows, self.n) != (other.rows, other.n) {
            return Err(Error::Dimension {
                expected: self.rows * self.n,
                got: other.rows * other.n,
            });
        }
        for i in 0..self.sums.len() {
            self.sums[i] += other.sums[i];
            self.sums_sq[i] += other.sums_sq[i];
            self.counts[i] += other.counts[i];
        }
        self.seen += other.seen;
        self.rejected_zero += other.rejected_zero;
        self.rejected_clamped += other.rejected_clamped;
        Ok(())
    }

    pub fn mean(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.n + col;
        (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64)
    }

    /// Standard error of the cell mean.
    pub fn standard_error(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.n + col;
        let c = self.counts[i];
        if c < 2 {
            return None;
        }
        let m = self.sums[i] / c as f64;
        let var = ((self.sums_sq[i] - c as f64 * m * m) / (c - 1) as f64).max(0.0);
        Some((var / c as f64).sqrt())
    }

    pub fn means(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.rows)
            .map(|r| {
                (0..self.n)
                    .map(|c| self.mean(r, c).ok_or(Error::EmptyAccumulator { row: r, col: c }))
                    .collect()
            })
            .collect()
    }
}

/// Rounds `mean / alpha*` half-up and clamps to `[-eta, eta]`; the decision
/// interval for `s` is `[s alpha* - alpha*/2, s alpha* + alpha*/2)`.
pub fn decide(mean: f64, alpha: f64, eta: i64) -> i64 {
    ((mean / alpha + 0.5).floor() as i64).clamp(-eta, eta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub recovered: Vec<Vec<i64>>,
    pub means: Vec<Vec<f64>>,
    /// `(mean - s_hat alpha*) / (alpha*/2)` per cell.
    pub margins: Vec<Vec<f64>>,
}

pub fn recover(acc: &RatioAccumulator, alpha: f64, eta: i64) -> Result<Recovery> {
    let means = acc.means()?;
    let recovered: Vec<Vec<i64>> =
        means.iter().map(|row| row.iter().map(|&m| decide(m, alpha, eta)).collect()).collect();
    let margins = means
        .iter()
        .zip(&recovered)
        .map(|(mr, sr)| {
            mr.iter()
                .zip(sr)
                .map(|(&m, &s)| (m - s as f64 * alpha) / (alpha / 2.0))
                .collect()
        })
        .collect();
    Ok(Recovery {
        recovered,
        means,
        margins,
    })
}

/// True when every cell mean sits at least `omega` standard errors away from
/// the decision boundaries that could change its verdict.
pub fn confident(acc: &RatioAccumulator, alpha: f64, eta: i64, omega: f64) -> bool {
    (0..acc.rows).all(|r| {
        (0..acc.n).all(|c| {
            let (Some(m), Some(se)) = (acc.mean(r, c), acc.standard_error(r, c)) else {
                return false;
            };
            let s = decide(m, alpha, eta);
            let lower = if s > -eta { m - (s as f64 - 0.5) * alpha } else { f64::INFINITY };
            let upper = if s < eta { (s as f64 + 0.5) * alpha - m } else { f64::INFINITY };
            lower.min(upper) >= omega * se
        })
    })
}

/// How many signatures to generate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Budget {
    /// Exactly this many signatures.
    Fixed { signatures: u64 },
    /// At least `N_est`, then continue in checkpoint steps until every cell is
    /// `omega` standard errors clear of its boundaries or `cap` is reached.
    Auto { cap: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChallengeSource {
    /// `c` drawn uniformly, no commitment or hash.
    Uniform,
    /// Full signing with `c = H(A y, msg)`.
    Hashed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub budget: Budget,
    pub workers: usize,
    pub seed: u64,
    pub clamp: bool,
    pub challenges: ChallengeSource,
    pub diag_fallback: bool,
    #[serde(skip)]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip)]
    pub resume: bool,
}

impl AttackConfig {
    pub fn new(budget: Budget, workers: usize, seed: u64) -> Self {
        AttackConfig {
            budget,
            workers,
            seed,
            clamp: true,
            challenges: ChallengeSource::Uniform,
            diag_fallback: false,
            checkpoint: None,
            resume: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Budget,
    Confident,
    Cap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub signatures_per_second: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub params_digest: String,
    pub plan: Option<AttackPlan>,
    pub alpha_star: f64,
    pub seed: u64,
    pub workers: usize,
    pub clamp: Option<f64>,
    pub challenges: ChallengeSource,
    pub fallback_used: bool,
    pub signatures_used: u64,
    pub rejected_zero: u64,
    pub rejected_clamped: u64,
    pub stopped: StopReason,
    pub recovered: Vec<Vec<i64>>,
    pub margins: Vec<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
    pub correct: Option<usize>,
    pub cells: usize,
    pub timing: Timing,
}

impl AttackReport {
    pub fn full_recovery(&self) -> Option<bool> {
        self.correct.map(|c| c == self.cells)
    }

    /// The report without its timing, for reproducibility comparisons.
    pub fn without_timing(&self) -> AttackReport {
        AttackReport {
            timing: Timing {
                wall_seconds: 0.0,
                signatures_per_second: 0.0,
            },
            ..self.clone()
        }
    }

    /// Number of cells where `recovered` equals `truth`.
    pub fn score(&mut self, truth: &[Vec<i64>]) {
        self.correct = Some(
            self.recovered
                .iter()
                .flatten()
                .zip(truth.iter().flatten())
                .filter(|(a, b)| a == b)
                .count(),
        );
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params_digest: String,
    pub key_digest: String,
    pub config: AttackConfig,
    pub next_batch: u64,
    pub accumulator: RatioAccumulator,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}

/// Progress snapshot handed to the observer after every checkpoint interval.
#[derive(Clone, Debug, Serialize)]
pub struct Progress {
    pub signatures: u64,
    pub elapsed_seconds: f64,
    pub confident: bool,
}

/// Hex SHA3-256 of the secret key's JSON encoding.
pub fn key_digest(sk: &SecretKey) -> String {
    use sha3::{Digest, Sha3_256};
    hex::encode(Sha3_256::digest(serde_json::to_vec(sk).expect("key serializes")))
}

fn run_batch(
    signer: &Signer,
    cfg: &AttackConfig,
    clamp: Option<f64>,
    batch: u64,
    count: u64,
    rows: usize,
) -> Result<RatioAccumulator> {
    let n = signer.params().n;
    let mut rng = RngStream::new(cfg.seed, batch).child(SIGN_STREAM_LABEL).rng();
    let mut ws = signer.workspace();
    let mut acc = RatioAccumulator::new(rows, n);
    for i in 0..count {
        match cfg.challenges {
            ChallengeSource::Uniform => signer.sample_unhashed(&mut rng, &mut ws)?,
            ChallengeSource::Hashed => {
                let mut msg = batch.to_le_bytes().to_vec();
                msg.extend(i.to_le_bytes());
                signer.sign_into(&msg, &mut rng, &mut ws)?;
            }
        }
        acc.accumulate(&ws.z, clamp);
    }
    Ok(acc)
}

/// Generates signatures under `sk`, accumulates ratios and recovers the key.
///
/// `alpha` defaults to `alpha*(sigma, sigma_u)`; the clamp threshold comes
/// from the plan for the generic variant and from `clamp_override` otherwise.
pub fn run_attack(
    params: &SchemeParams,
    pk: &PublicKey,
    sk: &SecretKey,
    cfg: &AttackConfig,
    observer: Option<&(dyn Fn(&Progress) + Sync)>,
) -> Result<(AttackReport, RatioAccumulator)> {
    let plan = match params.variant {
        Variant::Generic => Some(make_plan(params, params.omega)?),
        Variant::Module => None,
    };
    let alpha = alpha_star(params.sigma, params.sigma_u)?;
    let clamp = match (&plan, cfg.clamp) {
        (Some(p), true) => Some(p.ratio_clamp),
        // the module variant has no plan of its own; reuse the generic recipe
        (None, true) => {
            let as_generic = SchemeParams { variant: Variant::Generic, ..params.clone() };
            Some(make_plan(&as_generic, params.omega)?.ratio_clamp)
        }
        (_, false) => None,
    };
    run_attack_with(params, pk, sk, cfg, plan, alpha, clamp, observer)
}

#[allow(clippy::too_many_arguments)]
pub fn run_attack_with(
    params: &SchemeParams,
    pk: &PublicKey,
    sk: &SecretKey,
    cfg: &AttackConfig,
    plan: Option<AttackPlan>,
    alpha: f64,
    clamp: Option<f64>,
    observer: Option<&(dyn Fn(&Progress) + Sync)>,
) -> Result<(AttackReport, RatioAccumulator)> {
    if cfg.workers == 0 {
        return Err(Error::Domain("need at least one worker".into()));
    }
    let signer = Signer::new(params, pk, sk, SignerOptions { diag_fallback: cfg.diag_fallback })?;
    let rows = params.k - 1;
    let digest = params.digest();
    let kd = key_digest(sk);

    let (min_sigs, cap) = match cfg.budget {
        Budget::Fixed { signatures } => (signatures, signatures),
        Budget::Auto { cap } => {
            let n_est = plan
                .as_ref()
                .ok_or_else(|| Error::InvalidParams("auto budget needs a plan".into()))?
                .n_est
                .ceil() as u64;
            (n_est.min(cap), cap)
        }
    };
    let batches_for = |sigs: u64| sigs.div_ceil(BATCH_SIZE);
    let batch_len = |b: u64| BATCH_SIZE.min(cap - b * BATCH_SIZE);
    let per_checkpoint = CHECKPOINT_INTERVAL / BATCH_SIZE;

    let mut acc = RatioAccumulator::new(rows, params.n);
    let mut next = 0u64;
    if cfg.resume {
        if let Some(path) = cfg.checkpoint.as_deref().filter(|p| p.exists()) {
            let cp = Checkpoint::load(path)?;
            // where the checkpoint lives and whether we resume are not part of the run
            let portable = |c: &AttackConfig| AttackConfig { checkpoint: None, resume: false, ..c.clone() };
            if cp.params_digest != digest || cp.key_digest != kd || portable(&cp.config) != portable(cfg) {
                return Err(Error::Malformed(
                    "checkpoint was written by a different key, parameter set or configuration".into(),
                ));
            }
            acc = cp.accumulator;
            next = cp.next_batch;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let first_check = batches_for(min_sigs);
    let last = batches_for(cap);
    let mut stopped = StopReason::Budget;
    while next < last {
        let mut stop_at = ((next / per_checkpoint) + 1) * per_checkpoint;
        if next < first_check {
            stop_at = stop_at.min(first_check);
        }
        let stop_at = stop_at.min(last);
        let parts: Vec<Result<RatioAccumulator>> = pool.install(|| {
            (next..stop_at)
                .into_par_iter()
                .map(|b| run_batch(&signer, cfg, clamp, b, batch_len(b), rows))
                .collect()
        });
        for part in parts {
            acc.merge(&part?)?;
        }
        next = stop_at;
        if let Some(path) = cfg.checkpoint.as_deref() {
            Checkpoint {
                params_digest: digest.clone(),
                key_digest: kd.clone(),
                config: cfg.clone(),
                next_batch: next,
                accumulator: acc.clone(),
            }
            .save(path)?;
        }
        let done_min = next >= first_check;
        let conf = matches!(cfg.budget, Budget::Auto { .. })
            && done_min
            && confident(&acc, alpha, params.eta, params.omega);
        if let Some(obs) = observer {
            obs(&Progress {
                signatures: acc.seen,
                elapsed_seconds: start.elapsed().as_secs_f64(),
                confident: conf,
            });
        }
        if conf {
            stopped = StopReason::Confident;
            break;
        }
    }
    if matches!(cfg.budget, Budget::Auto { .. }) && stopped != StopReason::Confident {
        stopped = StopReason::Cap;
    }
    let rec = recover(&acc, alpha, params.eta)?;
    let wall = start.elapsed().as_secs_f64();
    let report = AttackReport {
        params_digest: digest,
        plan,
        alpha_star: alpha,
        seed: cfg.seed,
        workers: cfg.workers,
        clamp,
        challenges: cfg.challenges,
        fallback_used: signer.fallback_used(),
        signatures_used: acc.seen,
        rejected_zero: acc.rejected_zero,
        rejected_clamped: acc.rejected_clamped,
        stopped,
        recovered: rec.recovered,
        margins: rec.margins,
        means: rec.means,
        correct: None,
        cells: rows * params.n,
        timing: Timing {
            wall_seconds: wall,
            signatures_per_second: if wall > 0.0 { acc.seen as f64 / wall } else { 0.0 },
        },
    };
    Ok((report, acc))
}

/// Attack summary for one parameter set: plan constants and, after a run, its cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableTwoRow {
    pub n: usize,
    pub eta: i64,
    pub sigma_u: f64,
    pub sigma: f64,
    pub sigma_w0: f64,
    pub sigma_z00: f64,
    pub alpha_star: f64,
    pub inv_p_star_sq: f64,
    pub signatures: Option<u64>,
    pub wall_seconds: Option<f64>,
}

impl TableTwoRow {
    pub fn from_plan(params: &SchemeParams, plan: &AttackPlan, report: Option<&AttackReport>) -> Self {
        TableTwoRow {
            n: params.n,
            eta: params.eta,
            sigma_u: params.sigma_u,
            sigma: params.sigma,
            sigma_w0: plan.sigma_w0,
            sigma_z00: plan.sigma_z00,
            alpha_star: plan.alpha_star,
            inv_p_star_sq: plan.n_est,
            signatures: report.map(|r| r.signatures_used),
            wall_seconds: report.map(|r| r.timing.wall_seconds),
        }
    }
}

pub fn write_table_two<W: std::io::Write>(rows: &[TableTwoRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table_two<R: std::io::Read>(input: R) -> Result<Vec<TableTwoRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_examples() {
        let mut acc = RatioAccumulator::new(1, 2);
        acc.accumulate(&[0, 5, 7, 1], None);
        assert_eq!((acc.seen, acc.rejected_zero, acc.counts.clone()), (1, 1, vec![0, 0]));
        acc.accumulate(&[2, 1, 4, 1], None);
        assert_eq!(acc.sums, vec![2.0, 0.5]);
        acc.accumulate(&[1, 0, 100, 1], Some(10.0));
        assert_eq!(acc.rejected_clamped, 1);
        assert_eq!(acc.counts, vec![1, 2]);
    }

    #[test]
    fn decision_boundaries() {
        let a = 0.01;
        assert_eq!(decide(0.49 * a, a, 1), 0);
        assert_eq!(decide(0.51 * a, a, 1), 1);
        assert_eq!(decide(0.5 * a, a, 1), 1);
        assert_eq!(decide(-0.5 * a, a, 1), 0);
        assert_eq!(decide(7.0 * a, a, 1), 1);
    }

    #[test]
    fn empty_cell_is_an_error() {
        let acc = RatioAccumulator::new(2, 4);
        assert!(matches!(recover(&acc, 0.1, 1), Err(Error::EmptyAccumulator { row: 0, col: 0 })));
    }

    #[test]
    fn tail_bound_domain() {
        assert!(gaussian_tail_bound(2.0).is_err());
        assert!(gaussian_tail_bound(2.5).is_ok());
    }
}
