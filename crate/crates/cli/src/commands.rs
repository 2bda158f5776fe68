use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ggratio_core::attack::{self, AttackConfig, Budget, ChallengeSource, Progress, TableTwoRow};
use ggratio_core::codec;
use ggratio_core::revised::{self, TableThreeRow};
use ggratio_core::rng::stream_rng;
use ggratio_core::stats::{self, LemmaCheckReport, RunConfig};
use ggratio_core::{
    keygen, verify, Error, ParamSet, ParamSetFile, PublicKey, Result, SchemeParams, SecretKey, Signer,
    SignerOptions, Variant,
};
use serde::Serialize;

use crate::{AttackArgs, Check, Cli, Command, Experiment, Message, ParamsAction, RevisedArgs, StatsArgs};

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

/// Set used by checks that only depend on `sigma_u` when none is named.
const DEFAULT_STATS_SET: &str = "table2-col1";

const STREAM_KEYGEN: u64 = 0;
const STREAM_SIGN: u64 = 1;

struct Ctx {
    name: String,
    set: ParamSet,
    seed: u64,
    workers: usize,
}

impl Ctx {
    fn params(&self) -> &SchemeParams {
        &self.set.params
    }
}

fn context(cli: &Cli, sets: &ParamSetFile, name: &str) -> Result<Ctx> {
    let set = sets.get(name)?.clone();
    Ok(Ctx {
        name: name.to_string(),
        seed: cli.seed.unwrap_or(set.seed),
        workers: cli.workers.unwrap_or(set.workers).max(1),
        set,
    })
}

pub fn run(cli: &Cli) -> Result<u8> {
    let sets = ParamSetFile::with_overrides(cli.params_file.as_deref())?;
    match &cli.command {
        Command::Params { action } => params(&sets, action),
        Command::Keygen { set, pk, sk } => {
            let ctx = context(cli, &sets, set)?;
            let p = ctx.params();
            let (public, secret) = keygen(p, &mut stream_rng(ctx.seed, STREAM_KEYGEN))?;
            write_artifact(pk, codec::public_key_to_json(&public, p)?, codec::public_key_to_bytes(&public, p)?)?;
            write_artifact(sk, codec::secret_key_to_json(&secret, p)?, codec::secret_key_to_bytes(&secret, p)?)?;
            say!("wrote {} and {}", pk.display(), sk.display());
            Ok(0)
        }
        Command::Sign { set, pk, sk, message, out, diag_fallback } => {
            let ctx = context(cli, &sets, set)?;
            let p = ctx.params();
            let (public, secret) = read_keys(pk, sk, p)?;
            let signer = Signer::new(p, &public, &secret, SignerOptions { diag_fallback: *diag_fallback })?;
            if signer.fallback_used() {
                eprintln!("warning: covariance not positive definite, signing with sigma^2 I");
            }
            let sig = signer.sign(&message_bytes(message)?, &mut stream_rng(ctx.seed, STREAM_SIGN))?;
            write_artifact(out, codec::signature_to_json(&sig, p)?, codec::signature_to_bytes(&sig, p)?)?;
            say!("wrote {} (norm {:.2})", out.display(), sig.norm());
            Ok(0)
        }
        Command::Verify { set, pk, sig, message } => {
            let ctx = context(cli, &sets, set)?;
            let p = ctx.params();
            let public = read_artifact(pk, |t| codec::public_key_from_json(t, p), |b| codec::public_key_from_bytes(b, p))?;
            let signature = read_artifact(sig, |t| codec::signature_from_json(t, p), |b| codec::signature_from_bytes(b, p))?;
            let verdict = verify(&message_bytes(message)?, &public, &signature, p)?;
            say!("{verdict}");
            Ok(if verdict.is_valid() { 0 } else { 1 })
        }
        Command::Plan { set, omega, csv } => {
            let ctx = context(cli, &sets, set)?;
            let p = ctx.params();
            let plan = attack::make_plan(p, omega.unwrap_or(p.omega))?;
            say!("{}", serde_json::to_string_pretty(&plan)?);
            if let Some(path) = csv {
                attack::write_table_two(&[TableTwoRow::from_plan(p, &plan, None)], fs::File::create(path)?)?;
            }
            Ok(0)
        }
        Command::Attack(args) => run_attack(&context(cli, &sets, &args.set)?, args),
        Command::Stats(args) => run_stats(cli, &sets, args),
        Command::Revised(args) => run_revised(&context(cli, &sets, &args.set)?, args),
    }
}

fn params(sets: &ParamSetFile, action: &ParamsAction) -> Result<u8> {
    match action {
        ParamsAction::List => {
            for (name, s) in &sets.sets {
                let p = &s.params;
                say!(
                    "{name:<16} {:<8} n={:<4} k={:<3} sigma={:<8} sigma_u={:<6} {}",
                    format!("{:?}", p.variant).to_lowercase(),
                    p.n,
                    p.k,
                    p.sigma,
                    p.sigma_u,
                    s.description
                );
            }
        }
        ParamsAction::Show { set } => {
            let one = ParamSetFile {
                sets: [(set.clone(), sets.get(set)?.clone())].into_iter().collect(),
            };
            write!(std::io::stdout(), "{}", one.to_toml())?;
        }
    }
    Ok(0)
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// `.bin` files hold the binary encoding, anything else JSON.
fn write_artifact(path: &Path, json: String, bytes: Vec<u8>) -> Result<()> {
    if is_binary(path) {
        fs::write(path, bytes)?;
    } else {
        fs::write(path, json)?;
    }
    Ok(())
}

fn read_artifact<T>(
    path: &Path,
    from_json: impl FnOnce(&str) -> Result<T>,
    from_bytes: impl FnOnce(&[u8]) -> Result<T>,
) -> Result<T> {
    let raw = fs::read(path)?;
    if is_binary(path) {
        from_bytes(&raw)
    } else {
        from_json(std::str::from_utf8(&raw).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?)
    }
}

fn read_keys(pk: &Path, sk: &Path, p: &SchemeParams) -> Result<(PublicKey, SecretKey)> {
    Ok((
        read_artifact(pk, |t| codec::public_key_from_json(t, p), |b| codec::public_key_from_bytes(b, p))?,
        read_artifact(sk, |t| codec::secret_key_from_json(t, p), |b| codec::secret_key_from_bytes(b, p))?,
    ))
}

fn message_bytes(m: &Message) -> Result<Vec<u8>> {
    match (&m.message, &m.message_file) {
        (Some(text), _) => Ok(text.as_bytes().to_vec()),
        (None, Some(path)) => Ok(fs::read(path)?),
        (None, None) => Err(Error::Malformed("no message given".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn run_attack(ctx: &Ctx, args: &AttackArgs) -> Result<u8> {
    let p = ctx.params();
    let (pk, sk) = match (&args.pk, &args.sk) {
        (Some(pk), Some(sk)) => read_keys(pk, sk, p)?,
        _ => keygen(p, &mut stream_rng(ctx.seed, STREAM_KEYGEN))?,
    };
    let budget = match (args.signatures, args.auto_plan) {
        (Some(n), _) => Budget::Fixed { signatures: n },
        (None, true) => Budget::Auto { cap: args.cap },
        (None, false) => return Err(Error::Malformed("give --signatures N or --auto-plan".into())),
    };
    let mut cfg = AttackConfig::new(budget, ctx.workers, ctx.seed);
    cfg.clamp = !args.no_clamp;
    cfg.diag_fallback = args.diag_fallback;
    if args.hashed {
        cfg.challenges = ChallengeSource::Hashed;
    }
    cfg.checkpoint = args.checkpoint.clone();
    cfg.resume = args.resume;

    let quiet = args.quiet;
    let progress = move |pr: &Progress| {
        if !quiet {
            eprintln!(
                "{:>12} signatures  {:>8.1} s{}",
                pr.signatures,
                pr.elapsed_seconds,
                if pr.confident { "  all cells decided" } else { "" }
            );
        }
    };
    let (mut report, _) = attack::run_attack(p, &pk, &sk, &cfg, Some(&progress))?;
    if args.known_key {
        report.score(&sk.attack_target());
    }
    say!(
        "{}: {} signatures in {:.1} s ({:?})",
        ctx.name, report.signatures_used, report.timing.wall_seconds, report.stopped
    );
    let mut code = 0;
    if let Some(correct) = report.correct {
        say!("recovered {correct}/{} coefficients", report.cells);
        if correct != report.cells {
            code = 1;
        }
    }
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    if let Some(path) = &args.csv {
        let plan = match &report.plan {
            Some(plan) => plan.clone(),
            None => attack::make_plan(p, p.omega)?,
        };
        attack::write_table_two(&[TableTwoRow::from_plan(p, &plan, Some(&report))], fs::File::create(path)?)?;
    }
    Ok(code)
}

fn run_stats(cli: &Cli, sets: &ParamSetFile, args: &StatsArgs) -> Result<u8> {
    let needs_set = !matches!(args.check, Check::RatioCauchy | Check::Clt | Check::WMoments);
    let ctx = match &args.set {
        Some(name) => Some(context(cli, sets, name)?),
        None if args.check == Check::WMoments => Some(context(cli, sets, DEFAULT_STATS_SET)?),
        None if needs_set => return Err(Error::Malformed(format!("{:?} needs a parameter set", args.check))),
        None => None,
    };
    let seed = ctx.as_ref().map_or(cli.seed.unwrap_or(1), |c| c.seed);
    let workers = ctx.as_ref().map_or(cli.workers.unwrap_or(1), |c| c.workers).max(1);
    let cfg = |default: u64| RunConfig::new(args.samples.unwrap_or(default), seed, workers);

    let module = ctx.as_ref().is_some_and(|c| c.params().variant == Variant::Module);
    let checks: Vec<Check> = match args.check {
        Check::All if module => vec![Check::ZVariances, Check::RevisedZeroMean, Check::RatioCauchy, Check::Clt],
        Check::All => vec![Check::WMoments, Check::ZVariances, Check::RatioMean, Check::RatioCauchy, Check::Clt],
        one => vec![one],
    };
    let keys = match &ctx {
        Some(c) if checks.iter().any(|k| matches!(k, Check::ZVariances | Check::RatioMean | Check::RevisedZeroMean)) => {
            Some(keygen(c.params(), &mut stream_rng(seed, STREAM_KEYGEN))?)
        }
        _ => None,
    };
    let mut all: Vec<LemmaCheckReport> = Vec::new();
    for check in checks {
        let start = Instant::now();
        let p = ctx.as_ref().map(Ctx::params);
        let reports = match check {
            Check::WMoments => stats::check_w_moments(p.unwrap(), &cfg(stats::DEFAULT_UNIVARIATE_SAMPLES))?,
            Check::ZVariances => {
                let (pk, sk) = keys.as_ref().unwrap();
                stats::check_z_variances(p.unwrap(), pk, sk, &cfg(stats::DEFAULT_SIGNATURE_SAMPLES))?
            }
            Check::RatioMean => {
                let (pk, sk) = keys.as_ref().unwrap();
                let r = stats::check_ratio_mean(p.unwrap(), pk, sk, &cfg(stats::DEFAULT_UNIVARIATE_SAMPLES))?;
                let mut v = r.reports;
                v.extend(r.per_cell.into_iter().filter(|c| !c.pass));
                v
            }
            Check::RevisedZeroMean => {
                let (pk, sk) = keys.as_ref().unwrap();
                stats::check_revised_zero_mean(p.unwrap(), pk, sk, &cfg(stats::DEFAULT_SIGNATURE_SAMPLES))?.reports
            }
            Check::RatioCauchy => stats::check_ratio_is_cauchy(
                args.sigma_y,
                args.sigma_z,
                args.rho,
                &cfg(stats::DEFAULT_UNIVARIATE_SAMPLES),
            )?,
            Check::Clt => stats::check_clt_truncated(
                args.alpha,
                args.beta,
                args.half_width,
                args.n_bar,
                args.repeats,
                seed,
                workers,
            )?,
            Check::All => unreachable!(),
        };
        for r in &reports {
            say!("{r}");
        }
        eprintln!("{check:?} done in {:.1} s", start.elapsed().as_secs_f64());
        all.extend(reports);
    }
    if let Some(path) = &args.out {
        write_json(path, &all)?;
    }
    Ok(if stats::all_pass(&all) { 0 } else { 1 })
}

fn run_revised(ctx: &Ctx, args: &RevisedArgs) -> Result<u8> {
    let p = ctx.params();
    let mut row = TableThreeRow::from_params(&ctx.name, p);
    let trials = |default| args.trials.unwrap_or(default);
    let (json, pass) = match args.experiment {
        Experiment::PdRate => {
            let r = revised::pd_rate_experiment(p, trials(revised::DEFAULT_PD_TRIALS), ctx.seed, ctx.workers)?;
            say!(
                "{}: {}/{} positive definite; sigma_1(zeta s) mean {:.2} sd {:.2} range [{:.2}, {:.2}]; sigma/sigma_u {:.4}",
                ctx.name, r.pd_count, r.trials, r.sigma1_mean, r.sigma1_sd, r.sigma1_min, r.sigma1_max, r.sigma_over_sigma_u
            );
            if let Some(s) = r.s_bound {
                say!(
                    "keys with sigma_1 < S = {s}: {}/{} ({} of them positive definite)",
                    r.below_s_bound, r.trials, r.pd_below_s_bound
                );
            }
            row = row.with_pd(&r);
            (serde_json::to_value(&r)?, true)
        }
        Experiment::NormBound => {
            let r = revised::norm_bound_check(p)?;
            say!("{}: ||s_2 - b_0|| ~ {:.2} vs gamma {}: {}", ctx.name, r.bound, r.gamma, r.verdict());
            row = row.with_norm_bound(&r);
            (serde_json::to_value(&r)?, true)
        }
        Experiment::Invalidity => {
            let r = revised::empirical_invalidity(p, trials(revised::DEFAULT_TRIALS), ctx.seed, ctx.workers, args.diag_fallback)?;
            say!(
                "{}: {}/{} honest signatures within gamma {} (mean norm {:.2}, min {:.2}, fallback {})",
                ctx.name, r.within_gamma, r.trials, r.gamma, r.norm_mean, r.norm_min, r.fallback_used
            );
            row = row.with_invalidity(&r);
            (serde_json::to_value(&r)?, true)
        }
        Experiment::Forge => {
            let r = revised::forgery_experiment(p, trials(revised::DEFAULT_TRIALS), ctx.seed, ctx.workers)?;
            say!(
                "{}: {}/{} forgeries hash-consistent; within gamma: forged {} honest {}; tampered copies rejected {}",
                ctx.name, r.hash_consistent, r.trials, r.forged_within_gamma, r.honest_within_gamma, r.tamper_detected
            );
            row = row.with_forgery(&r);
            let ok = r.hash_consistent == r.trials;
            (serde_json::to_value(&r)?, ok)
        }
        Experiment::ZeroMean => {
            let (pk, sk) = keygen(p, &mut stream_rng(ctx.seed, STREAM_KEYGEN))?;
            let samples = args.trials.unwrap_or(stats::DEFAULT_SIGNATURE_SAMPLES);
            let r = stats::check_revised_zero_mean(p, &pk, &sk, &RunConfig::new(samples, ctx.seed, ctx.workers))?;
            for rep in &r.reports {
                say!("{rep}");
            }
            let ok = stats::all_pass(&r.reports);
            (serde_json::to_value(&r)?, ok)
        }
    };
    if let Some(path) = &args.out {
        write_json(path, &json)?;
    }
    if let Some(path) = &args.csv {
        revised::write_table_three(&[row], fs::File::create(path)?)?;
    }
    Ok(if pass { 0 } else { 1 })
}
