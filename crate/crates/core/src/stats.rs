//! Monte-Carlo checks of the distributional facts the attack relies on.
//!
//! Every check returns [`LemmaCheckReport`]s judged by one rule: pass when
//! `|empirical - theoretical| <= max(3 SE, tolerance)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::attack::{self, AttackConfig, Budget};
use crate::error::{Error, Result};
use crate::params::{SchemeParams, Variant};
use crate::rng::{RngStream, WorkerRng};
use crate::sampling::{DiscreteGaussian, TruncatedCauchy};
use crate::scheme::{PublicKey, SecretKey, Signer, SignerOptions};

pub const DEFAULT_UNIVARIATE_SAMPLES: u64 = 10_000_000;
pub const DEFAULT_SIGNATURE_SAMPLES: u64 = 1_000_000;
pub const STATS_BATCH: u64 = 100_000;

/// Running count, mean and central moments up to order four.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + o.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += o.n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n - 1) as f64
    }

    pub fn se_mean(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// Large-sample standard error of the variance, `sqrt((mu4 - mu2^2) / n)`.
    pub fn se_variance(&self) -> f64 {
        let n = self.n as f64;
        let mu2 = self.m2 / n;
        ((self.m4 / n - mu2 * mu2).max(0.0) / n).sqrt()
    }

    pub fn skewness(&self) -> f64 {
        let n = self.n as f64;
        if self.m2 == 0.0 {
            return 0.0;
        }
        n.sqrt() * self.m3 / self.m2.powf(1.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub lemma: String,
    pub quantity: String,
    pub theoretical: f64,
    pub empirical: f64,
    pub samples: u64,
    pub standard_error: f64,
    /// Absolute tolerance.
    pub tolerance: f64,
    pub pass: bool,
}

impl LemmaCheckReport {
    pub fn judge(
        lemma: &str,
        quantity: impl Into<String>,
        theoretical: f64,
        empirical: f64,
        samples: u64,
        standard_error: f64,
        tolerance: f64,
    ) -> Self {
        let band = (3.0 * standard_error).max(tolerance);
        LemmaCheckReport {
            lemma: lemma.to_string(),
            quantity: quantity.into(),
            theoretical,
            empirical,
            samples,
            standard_error,
            tolerance,
            pass: (empirical - theoretical).abs() <= band,
        }
    }

    /// Same rule with a tolerance relative to `|theoretical|`.
    pub fn judge_relative(
        lemma: &str,
        quantity: impl Into<String>,
        theoretical: f64,
        empirical: f64,
        samples: u64,
        standard_error: f64,
        relative: f64,
    ) -> Self {
        Self::judge(lemma, quantity, theoretical, empirical, samples, standard_error, relative * theoretical.abs())
    }
}

impl std::fmt::Display for LemmaCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {} {}: theory {:.6} empirical {:.6} (SE {:.2e}, tol {:.2e}, N {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.lemma,
            self.quantity,
            self.theoretical,
            self.empirical,
            self.standard_error,
            self.tolerance,
            self.samples
        )
    }
}

pub fn all_pass(reports: &[LemmaCheckReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
}

impl RunConfig {
    pub fn new(samples: u64, seed: u64, workers: usize) -> Self {
        RunConfig {
            samples,
            seed,
            workers,
        }
    }
}

/// Splits `total` draws into fixed batches, runs them on `workers` threads
/// and folds the results in batch order. Batch `b` draws from stream
/// `(seed, b)` under `label`, so results do not depend on `workers`.
pub fn run_batched<T, F, M>(cfg: &RunConfig, label: u64, batch: u64, f: F, init: T, mut merge: M) -> Result<T>
where
    T: Send,
    F: Fn(&mut WorkerRng, u64) -> Result<T> + Sync,
    M: FnMut(&mut T, T),
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    let batches = cfg.samples.div_ceil(batch);
    let parts: Vec<Result<T>> = pool.install(|| {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = RngStream::new(cfg.seed, b).child(label).rng();
                f(&mut rng, batch.min(cfg.samples - b * batch))
            })
            .collect()
    });
    let mut acc = init;
    for p in parts {
        merge(&mut acc, p?);
    }
    Ok(acc)
}

const LABEL_W: u64 = 0x57;
const LABEL_Z: u64 = 0x5a;
const LABEL_CAUCHY: u64 = 0x43;
const LABEL_CLT: u64 = 0x4c;
const LABEL_REVISED: u64 = 0x52;

/// Moments of `W = 2U + C` with `C` a fair bit and `U ~ D(sigma_u, -C/2)`.
pub fn check_w_moments(params: &SchemeParams, cfg: &RunConfig) -> Result<Vec<LemmaCheckReport>> {
    let su = params.sigma_u;
    let dg = DiscreteGaussian::with_centers(su, &[0.0, -0.5])?;
    let (w, half) = run_batched(
        cfg,
        LABEL_W,
        STATS_BATCH,
        |rng, count| {
            let mut w = Moments::default();
            let mut half = Moments::default();
            for _ in 0..count {
                let c: bool = rng.random();
                let u = dg.sample(if c { -0.5 } else { 0.0 }, rng);
                let c = c as i64;
                w.push((2 * u + c) as f64);
                // E(U) = -E(C)/2 per draw: U + C/2 has mean zero
                half.push(u as f64 + c as f64 / 2.0);
            }
            Ok((w, half))
        },
        (Moments::default(), Moments::default()),
        |a, b| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        },
    )?;
    Ok(vec![
        LemmaCheckReport::judge("w-moments", "E(2U+C)", 0.0, w.mean, w.n, w.se_mean(), 0.0),
        LemmaCheckReport::judge_relative(
            "w-moments",
            "V(2U+C)",
            4.0 * su * su,
            w.variance(),
            w.n,
            w.se_variance(),
            0.01,
        ),
        LemmaCheckReport::judge("w-moments", "E(U + C/2)", 0.0, half.mean, half.n, half.se_mean(), 0.0),
    ])
}

/// Per-block variance of signature coefficients against
/// `sigma^2 + 3 sigma_u^2 ||s_i||^2` (generic) or `sigma^2` (module).
pub fn check_z_variances(
    params: &SchemeParams,
    pk: &PublicKey,
    sk: &SecretKey,
    cfg: &RunConfig,
) -> Result<Vec<LemmaCheckReport>> {
    let signer = Signer::new(params, pk, sk, SignerOptions::default())?;
    let (n, k) = (params.n, params.k);
    let blocks = run_batched(
        cfg,
        LABEL_Z,
        STATS_BATCH / 10,
        |rng, count| {
            let mut ws = signer.workspace();
            let mut m = vec![Moments::default(); k];
            for _ in 0..count {
                signer.sample_unhashed(rng, &mut ws)?;
                for (i, block) in ws.z.chunks(n).enumerate() {
                    for &x in block {
                        m[i].push(x as f64);
                    }
                }
            }
            Ok(m)
        },
        vec![Moments::default(); k],
        |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
    )?;
    let (s2, su2) = (params.sigma * params.sigma, params.sigma_u * params.sigma_u);
    Ok(blocks
        .iter()
        .zip(&sk.s)
        .enumerate()
        .map(|(i, (m, s))| {
            let theory = match params.variant {
                Variant::Generic => s2 + 3.0 * su2 * s.l2_norm_sq() as f64,
                Variant::Module => s2,
            };
            LemmaCheckReport::judge_relative(
                "z-variance",
                format!("V(Z_{i},j), ||s_{i}||^2 = {}", s.l2_norm_sq()),
                theory,
                m.variance(),
                m.n,
                m.se_variance(),
                0.02,
            )
        })
        .collect())
}

/// Pooled mean of a set of cells with its standard error.
fn pooled(acc: &attack::RatioAccumulator, cells: &[usize], sign: &[f64]) -> (f64, f64, u64) {
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0u64);
    for (&i, &sg) in cells.iter().zip(sign) {
        sum += sg * acc.sums[i];
        sum_sq += acc.sums_sq[i];
        count += acc.counts[i];
    }
    if count < 2 {
        return (0.0, f64::INFINITY, count);
    }
    let mean = sum / count as f64;
    let var = (sum_sq / count as f64 - mean * mean).max(0.0);
    (mean, (var / count as f64).sqrt(), count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioMeanResult {
    pub reports: Vec<LemmaCheckReport>,
    pub per_cell: Vec<LemmaCheckReport>,
    pub report: attack::AttackReport,
}

/// Clamped ratio means per cell against `s_{i,j} alpha*`, with tolerance
/// `alpha*/2`.
pub fn check_ratio_mean(
    params: &SchemeParams,
    pk: &PublicKey,
    sk: &SecretKey,
    cfg: &RunConfig,
) -> Result<RatioMeanResult> {
    let acfg = AttackConfig::new(Budget::Fixed { signatures: cfg.samples }, cfg.workers, cfg.seed);
    let (mut report, acc) = attack::run_attack(params, pk, sk, &acfg, None)?;
    let truth = sk.attack_target();
    report.score(&truth);
    let alpha = report.alpha_star;
    let flat: Vec<i64> = truth.iter().flatten().copied().collect();
    let mut per_cell = Vec::with_capacity(flat.len());
    let mut worst: Option<LemmaCheckReport> = None;
    for (idx, &s) in flat.iter().enumerate() {
        let (r, c) = (idx / params.n, idx % params.n);
        let mean = acc.mean(r, c).ok_or(Error::EmptyAccumulator { row: r, col: c })?;
        let rep = LemmaCheckReport::judge(
            "ratio-mean",
            format!("E(Z_{},{}/Z_0,0), s = {s}", r + 1, c),
            s as f64 * alpha,
            mean,
            acc.counts[idx],
            acc.standard_error(r, c).unwrap_or(f64::INFINITY),
            alpha / 2.0,
        );
        let dev = (rep.empirical - rep.theoretical).abs();
        if worst.as_ref().is_none_or(|w| dev > (w.empirical - w.theoretical).abs()) {
            worst = Some(rep.clone());
        }
        per_cell.push(rep);
    }
    let mut reports = Vec::new();
    if let Some(mut w) = worst {
        w.quantity = format!("worst cell: {}", w.quantity);
        w.pass = per_cell.iter().all(|r| r.pass);
        reports.push(w);
    }
    let select = |v: i64| -> Vec<usize> { (0..flat.len()).filter(|&i| flat[i] == v).collect() };
    let zeros = select(0);
    if !zeros.is_empty() {
        let (m, se, cnt) = pooled(&acc, &zeros, &vec![1.0; zeros.len()]);
        reports.push(LemmaCheckReport::judge("ratio-mean", "pooled mean of s = 0 cells", 0.0, m, cnt, se, 0.0));
    }
    let (pos, neg) = (select(1), select(-1));
    if !pos.is_empty() && !neg.is_empty() {
        let (mp, sep, cp) = pooled(&acc, &pos, &vec![1.0; pos.len()]);
        let (mn, sen, cn) = pooled(&acc, &neg, &vec![1.0; neg.len()]);
        reports.push(LemmaCheckReport::judge(
            "ratio-mean",
            "sign symmetry: mean(s = 1) + mean(s = -1)",
            0.0,
            mp + mn,
            cp + cn,
            (sep * sep + sen * sen).sqrt(),
            0.0,
        ));
    }
    Ok(RatioMeanResult {
        reports,
        per_cell,
        report,
    })
}

/// Per-test z threshold that keeps the chance of any of `tests` independent
/// null statistics exceeding it equal to `P(|N(0,1)| > z)`.
pub fn sidak_threshold(z: f64, tests: usize) -> f64 {
    let family = 2.0 * (1.0 - attack::normal_cdf(z));
    let each = 1.0 - (1.0 - family).powf(1.0 / tests.max(1) as f64);
    Normal::standard().inverse_cdf(1.0 - each / 2.0)
}

/// Exact CDF of `C(alpha, beta)`.
pub fn cauchy_cdf(x: f64, alpha: f64, beta: f64) -> f64 {
    0.5 + ((x - alpha) / beta).atan() / std::f64::consts::PI
}

/// Sorted-sample quantile by linear interpolation.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, frac) = (h.floor() as usize, h - h.floor());
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Largest CDF gap between the sample and `C(alpha, beta)` over the sample
/// points whose theoretical CDF lies in `[0.01, 0.99]`.
pub fn central_ks_distance(sorted: &[f64], alpha: f64, beta: f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .filter_map(|(i, &x)| {
            let f = cauchy_cdf(x, alpha, beta);
            (0.01..=0.99)
                .contains(&f)
                .then(|| (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs()))
        })
        .fold(0.0, f64::max)
}

/// Ratio of correlated centered normals against the Cauchy law `C(alpha, beta)`.
pub fn check_ratio_is_cauchy(
    sigma_y: f64,
    sigma_z: f64,
    rho: f64,
    cfg: &RunConfig,
) -> Result<Vec<LemmaCheckReport>> {
    if rho.is_nan() || rho.abs() >= 1.0 || sigma_y.is_nan() || sigma_y <= 0.0 || sigma_z.is_nan() || sigma_z <= 0.0 {
        return Err(Error::Domain(format!(
            "need |rho| < 1 and positive deviations (rho = {rho})"
        )));
    }
    let (alpha, beta) = attack::cauchy_params_of_ratio(sigma_y, sigma_z, rho);
    let c = (1.0 - rho * rho).sqrt();
    let mut ratios = run_batched(
        cfg,
        LABEL_CAUCHY,
        STATS_BATCH,
        |rng, count| {
            Ok((0..count)
                .map(|_| {
                    let g1: f64 = rng.sample(StandardNormal);
                    let g2: f64 = rng.sample(StandardNormal);
                    sigma_y * (rho * g1 + c * g2) / (sigma_z * g1)
                })
                .collect::<Vec<f64>>())
        },
        Vec::with_capacity(cfg.samples as usize),
        |a, b| a.extend(b),
    )?;
    ratios.sort_unstable_by(f64::total_cmp);
    let n = ratios.len() as u64;
    let nf = n as f64;
    let median = quantile(&ratios, 0.5);
    let iqr = quantile(&ratios, 0.75) - quantile(&ratios, 0.25);
    // asymptotic SEs of sample quantiles of C(alpha, beta)
    let se_median = std::f64::consts::PI * beta / (2.0 * nf.sqrt());
    let se_iqr = std::f64::consts::PI * beta * 0.5 / nf.sqrt();
    let big_l = 50.0 * beta;
    let mut trunc = Moments::default();
    for &r in ratios.iter().filter(|r| (*r - alpha).abs() <= big_l) {
        trunc.push(r);
    }
    Ok(vec![
        LemmaCheckReport::judge(
            "ratio-cauchy",
            "central-98% KS distance",
            0.0,
            central_ks_distance(&ratios, alpha, beta),
            n,
            0.0,
            0.01,
        ),
        LemmaCheckReport::judge("ratio-cauchy", "median", alpha, median, n, se_median, 0.0),
        LemmaCheckReport::judge_relative("ratio-cauchy", "IQR", 2.0 * beta, iqr, n, se_iqr, 0.02),
        LemmaCheckReport::judge(
            "ratio-cauchy",
            "mean truncated at alpha +- 50 beta",
            alpha,
            trunc.mean,
            trunc.n,
            trunc.se_mean(),
            0.0,
        ),
    ])
}

/// Distribution of `sqrt(n)(Ybar - alpha)` for truncated Cauchy means.
pub fn check_clt_truncated(
    alpha: f64,
    beta: f64,
    half_width: f64,
    n_bar: u64,
    repeats: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<LemmaCheckReport>> {
    if n_bar < 1000 {
        return Err(Error::Domain(format!("n_bar = {n_bar} must be at least 1000")));
    }
    let tc = TruncatedCauchy::new(alpha, beta, half_width)?;
    let cfg = RunConfig::new(repeats, seed, workers);
    let (scaled, means) = run_batched(
        &cfg,
        LABEL_CLT,
        100,
        |rng, count| {
            let mut scaled = Moments::default();
            let mut means = Moments::default();
            for _ in 0..count {
                let s: f64 = (0..n_bar).map(|_| tc.sample(rng)).sum();
                let ybar = s / n_bar as f64;
                scaled.push((n_bar as f64).sqrt() * (ybar - alpha));
                means.push(ybar);
            }
            Ok((scaled, means))
        },
        (Moments::default(), Moments::default()),
        |a, b| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        },
    )?;
    let v = attack::truncated_cauchy_variance(beta, half_width);
    Ok(vec![
        LemmaCheckReport::judge_relative(
            "clt-truncated",
            "V(sqrt(n)(Ybar - alpha))",
            v,
            scaled.variance(),
            scaled.n,
            scaled.se_variance(),
            0.05,
        ),
        LemmaCheckReport::judge("clt-truncated", "E(Ybar)", alpha, means.mean, means.n, means.se_mean(), 0.0),
        LemmaCheckReport::judge(
            "clt-truncated",
            "skewness of sqrt(n)(Ybar - alpha)",
            0.0,
            scaled.skewness(),
            scaled.n,
            (6.0 / scaled.n as f64).sqrt(),
            0.1,
        ),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevisedZeroMeanResult {
    pub reports: Vec<LemmaCheckReport>,
    /// Per-cell verdicts at `3 SE`.
    pub per_cell: Vec<LemmaCheckReport>,
    pub cells_outside_3se: usize,
    pub recovery_accuracy: f64,
}

/// Module-variant statistics: `V(zeta u + c) = 2 sigma_u^2`, `V(Z_{i,j}) = sigma^2`,
/// no correlation between `Z_{i,j}` and `Z_{0,0}`, zero clamped ratio means,
/// and key recovery no better than chance.
pub fn check_revised_zero_mean(
    params: &SchemeParams,
    pk: &PublicKey,
    sk: &SecretKey,
    cfg: &RunConfig,
) -> Result<RevisedZeroMeanResult> {
    if params.variant != Variant::Module {
        return Err(Error::InvalidParams("the revised check needs module parameters".into()));
    }
    let signer = Signer::new(params, pk, sk, SignerOptions::default())?;
    let (n, k) = (params.n, params.k);
    let truth = sk.attack_target();
    let signs: Vec<f64> = truth.iter().flatten().map(|&s| s as f64).collect();
    let nonzero = signs.iter().filter(|s| **s != 0.0).count().max(1) as f64;
    struct Part {
        w: Moments,
        z: Vec<Moments>,
        cross: Moments,
    }
    let empty = || Part {
        w: Moments::default(),
        z: vec![Moments::default(); k],
        cross: Moments::default(),
    };
    let part = run_batched(
        cfg,
        LABEL_REVISED,
        STATS_BATCH / 10,
        |rng, count| {
            let mut p = empty();
            let mut ws = signer.workspace();
            for _ in 0..count {
                signer.sample_unhashed(rng, &mut ws)?;
                for &w in &ws.w {
                    p.w.push(w as f64);
                }
                for (i, block) in ws.z.chunks(n).enumerate() {
                    for &x in block {
                        p.z[i].push(x as f64);
                    }
                }
                // key-aligned average of z_{i,j} z_{0,0}; nonzero iff the
                // products correlate with the secret
                let z00 = ws.z[0] as f64;
                let aligned: f64 =
                    ws.z[n..].iter().zip(&signs).map(|(&z, &s)| s * z as f64).sum::<f64>();
                p.cross.push(aligned * z00 / nonzero);
            }
            Ok(p)
        },
        empty(),
        |a, b| {
            a.w.merge(&b.w);
            a.z.iter_mut().zip(&b.z).for_each(|(x, y)| x.merge(y));
            a.cross.merge(&b.cross);
        },
    )?;
    let (s2, su2) = (params.sigma * params.sigma, params.sigma_u * params.sigma_u);
    let mut reports = vec![LemmaCheckReport::judge_relative(
        "revised-zero-mean",
        "V(zeta u + c)_j",
        2.0 * su2,
        part.w.variance(),
        part.w.n,
        part.w.se_variance(),
        0.01,
    )];
    for (i, m) in part.z.iter().enumerate() {
        reports.push(LemmaCheckReport::judge_relative(
            "revised-zero-mean",
            format!("V(Z_{i},j)"),
            s2,
            m.variance(),
            m.n,
            m.se_variance(),
            0.02,
        ));
    }
    reports.push(LemmaCheckReport::judge(
        "revised-zero-mean",
        "key-aligned E(Z_i,j Z_0,0)",
        0.0,
        part.cross.mean,
        part.cross.n,
        part.cross.se_mean(),
        0.0,
    ));

    let acfg = AttackConfig::new(Budget::Fixed { signatures: cfg.samples }, cfg.workers, cfg.seed);
    let (mut attack_report, acc) = attack::run_attack(params, pk, sk, &acfg, None)?;
    attack_report.score(&truth);
    let mut per_cell = Vec::with_capacity(signs.len());
    for idx in 0..signs.len() {
        let (r, c) = (idx / n, idx % n);
        per_cell.push(LemmaCheckReport::judge(
            "revised-zero-mean",
            format!("clamped E(Z_{},{}/Z_0,0)", r + 1, c),
            0.0,
            acc.mean(r, c).ok_or(Error::EmptyAccumulator { row: r, col: c })?,
            acc.counts[idx],
            acc.standard_error(r, c).unwrap_or(f64::INFINITY),
            0.0,
        ));
    }
    let cells_outside_3se = per_cell.iter().filter(|r| !r.pass).count();
    let max_z = per_cell
        .iter()
        .map(|r| (r.empirical / r.standard_error).abs())
        .fold(0.0, f64::max);
    let family_z = sidak_threshold(3.0, per_cell.len());
    reports.push(LemmaCheckReport {
        lemma: "revised-zero-mean".into(),
        quantity: format!(
            "max |clamped ratio mean| / SE over {} cells ({cells_outside_3se} beyond 3)",
            per_cell.len()
        ),
        theoretical: 0.0,
        empirical: max_z,
        samples: cfg.samples,
        standard_error: 1.0,
        tolerance: family_z,
        pass: max_z <= family_z,
    });
    let (m, se, cnt) = pooled(&acc, &(0..signs.len()).collect::<Vec<_>>(), &signs);
    reports.push(LemmaCheckReport::judge(
        "revised-zero-mean",
        "key-aligned pooled clamped ratio mean",
        0.0,
        m * signs.len() as f64 / nonzero,
        cnt,
        se * signs.len() as f64 / nonzero,
        0.0,
    ));
    let cells = attack_report.cells as f64;
    let accuracy = attack_report.correct.unwrap_or(0) as f64 / cells;
    let chance = 1.0 / (2 * params.eta + 1) as f64;
    reports.push(LemmaCheckReport::judge(
        "revised-zero-mean",
        "key-recovery accuracy vs chance",
        chance,
        accuracy,
        cells as u64,
        (chance * (1.0 - chance) / cells).sqrt(),
        0.0,
    ));
    Ok(RevisedZeroMeanResult {
        reports,
        per_cell,
        cells_outside_3se,
        recovery_accuracy: accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.25 - 3.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-9);
        assert!((a.skewness() - all.skewness()).abs() < 1e-9);
        assert!((a.se_variance() - all.se_variance()).abs() < 1e-9);
    }

    #[test]
    fn sidak_threshold_examples() {
        assert!((sidak_threshold(3.0, 1) - 3.0).abs() < 1e-6);
        let z = sidak_threshold(3.0, 128);
        assert!(z > 4.2 && z < 4.3, "{z}");
    }

    #[test]
    fn verdict_rule() {
        assert!(LemmaCheckReport::judge("x", "q", 1.0, 1.05, 10, 0.02, 0.0).pass);
        assert!(!LemmaCheckReport::judge("x", "q", 1.0, 1.07, 10, 0.02, 0.0).pass);
        assert!(LemmaCheckReport::judge("x", "q", 1.0, 1.07, 10, 0.02, 0.1).pass);
    }
}
