use ggratio_core::params::{ParamSetFile, SchemeParams};
use ggratio_core::rng::stream_rng;
use ggratio_core::scheme::keygen;
use ggratio_core::stats::*;
use ggratio_core::Error;

fn set(name: &str) -> SchemeParams {
    ParamSetFile::builtin().get(name).unwrap().params.clone()
}

fn find<'a>(reports: &'a [LemmaCheckReport], quantity: &str) -> &'a LemmaCheckReport {
    reports.iter().find(|r| r.quantity.starts_with(quantity)).unwrap()
}

/// Exact `V(2U + C)` for `U` discrete Gaussian over Z centred at `-C/2`, by
/// enumerating the probability mass.
fn exact_w_variance(sigma_u: f64) -> f64 {
    let moments = |center: f64| {
        let ks: Vec<f64> = (-200..=200).map(|k| k as f64).collect();
        let w: Vec<f64> = ks.iter().map(|k| (-(k - center).powi(2) / (2.0 * sigma_u * sigma_u)).exp()).collect();
        let total: f64 = w.iter().sum();
        let mean = ks.iter().zip(&w).map(|(k, p)| k * p).sum::<f64>() / total;
        let var = ks.iter().zip(&w).map(|(k, p)| (k - mean).powi(2) * p).sum::<f64>() / total;
        (mean, var)
    };
    let (m0, v0) = moments(0.0);
    let (m1, v1) = moments(-0.5);
    // both conditional means of 2U + C are zero by symmetry
    assert!(m0.abs() < 1e-12 && (2.0 * m1 + 1.0).abs() < 1e-12);
    0.5 * 4.0 * v0 + 0.5 * 4.0 * v1
}

#[test]
fn w_moments_at_unit_sigma_u() {
    let p = set("table2-col1");
    let r = check_w_moments(&p, &RunConfig::new(10_000_000, 40, 2)).unwrap();
    assert!(all_pass(&r), "{r:#?}");
    let v = find(&r, "V(2U+C)");
    assert_eq!(v.theoretical, 4.0);
    assert!((v.empirical / 4.0 - 1.0).abs() < 0.01);
    assert!((exact_w_variance(1.0) / 4.0 - 1.0).abs() < 1e-6);
}

/// At sigma_u = 0.4 the lattice is coarse relative to sigma_u and the integer
/// law of U no longer has variance sigma_u^2.
#[test]
fn w_moments_follow_the_lattice_at_small_sigma_u() {
    let p = set("table2-col2");
    assert_eq!(p.sigma_u, 0.4);
    let exact = exact_w_variance(0.4);
    assert!((exact - 0.665).abs() < 0.005, "{exact}");
    let r = check_w_moments(&p, &RunConfig::new(10_000_000, 41, 2)).unwrap();
    let v = find(&r, "V(2U+C)");
    assert!((v.empirical / exact - 1.0).abs() < 0.01, "{} vs {exact}", v.empirical);
    assert!((v.theoretical - 0.64).abs() < 1e-12);
    assert!(!v.pass);
    assert!(find(&r, "E(2U+C)").pass);
}

#[test]
fn z_variances_match_formula() {
    let p = set("ci-n16");
    let (pk, sk) = keygen(&p, &mut stream_rng(42, 0)).unwrap();
    let r = check_z_variances(&p, &pk, &sk, &RunConfig::new(1_000_000, 42, 2)).unwrap();
    assert_eq!(r.len(), p.k);
    assert!(all_pass(&r), "{r:#?}");
}

/// With sigma_u -> 0 the centre -1/2 still splits U evenly over {0, -1}, so
/// `V(W) -> 1/2` and the blocks keep a `||s_i||^2 / 2` excess over sigma^2.
#[test]
fn z_variances_in_the_small_sigma_u_limit() {
    let mut p = set("table2-col1");
    p.sigma_u = 1e-3;
    let (pk, sk) = keygen(&p, &mut stream_rng(43, 0)).unwrap();
    let r = check_z_variances(&p, &pk, &sk, &RunConfig::new(200_000, 43, 2)).unwrap();
    for (rep, s) in r.iter().zip(&sk.s) {
        let oracle = p.sigma * p.sigma + 1.0 / 12.0 + 0.5 * s.l2_norm_sq() as f64;
        assert!((rep.empirical / oracle - 1.0).abs() < 0.01, "{} vs {oracle}", rep.empirical);
        assert!((rep.theoretical / (p.sigma * p.sigma) - 1.0).abs() < 1e-6);
    }
    assert!(r[0].pass);
}

#[test]
fn ratio_of_normals_is_cauchy() {
    let cfg = RunConfig::new(2_000_000, 44, 2);
    let std = check_ratio_is_cauchy(1.0, 1.0, 0.0, &cfg).unwrap();
    assert!(all_pass(&std), "{std:#?}");
    assert!(find(&std, "central-98% KS").empirical <= 0.01);
    assert!((find(&std, "IQR").empirical / 2.0 - 1.0).abs() < 0.02);
    let shifted = check_ratio_is_cauchy(2.0, 1.0, 0.5, &cfg).unwrap();
    assert!(all_pass(&shifted), "{shifted:#?}");
    assert!((find(&shifted, "median").empirical - 1.0).abs() < 0.02);
    assert!(matches!(check_ratio_is_cauchy(1.0, 1.0, 1.0, &cfg), Err(Error::Domain(_))));
}

#[test]
fn truncated_means_obey_the_clt() {
    let r = check_clt_truncated(0.0, 1.0, 50.0, 10_000, 1000, 45, 2).unwrap();
    assert!(all_pass(&r), "{r:#?}");
    let v = 50.0 / 50f64.atan() - 1.0;
    assert!((r[0].theoretical - v).abs() < 1e-9 && (v - 31.24).abs() < 0.01);
    let r3 = check_clt_truncated(3.0, 1.0, 50.0, 10_000, 1000, 46, 2).unwrap();
    assert!(all_pass(&r3), "{r3:#?}");
    assert!(check_clt_truncated(0.0, 1.0, 50.0, 999, 10, 1, 1).is_err());
}

#[test]
fn revised_variant_shows_no_signal() {
    let p = set("ci-module-n64");
    let (pk, sk) = keygen(&p, &mut stream_rng(47, 0)).unwrap();
    let r = check_revised_zero_mean(&p, &pk, &sk, &RunConfig::new(200_000, 47, 2)).unwrap();
    assert!(all_pass(&r.reports), "{:#?}", r.reports);
    assert_eq!(r.per_cell.len(), (p.k - 1) * p.n);
    assert!((r.recovery_accuracy - 1.0 / 3.0).abs() < 0.15);
    let generic = set("ci-n16");
    let (gpk, gsk) = keygen(&generic, &mut stream_rng(47, 1)).unwrap();
    assert!(check_revised_zero_mean(&generic, &gpk, &gsk, &RunConfig::new(10, 1, 1)).is_err());
}

#[test]
fn checks_do_not_depend_on_worker_count() {
    let p = set("ci-n16");
    let a = check_w_moments(&p, &RunConfig::new(1_000_000, 48, 1)).unwrap();
    let b = check_w_moments(&p, &RunConfig::new(1_000_000, 48, 3)).unwrap();
    assert_eq!(a, b);
    let (pk, sk) = keygen(&p, &mut stream_rng(48, 0)).unwrap();
    let c = check_ratio_mean(&p, &pk, &sk, &RunConfig::new(200_000, 48, 1)).unwrap();
    let d = check_ratio_mean(&p, &pk, &sk, &RunConfig::new(200_000, 48, 4)).unwrap();
    assert_eq!(c.reports, d.reports);
    assert_eq!(c.per_cell, d.per_cell);
}

#[test]
fn ratio_mean_on_the_ci_key() {
    let p = set("ci-n16");
    let (pk, sk) = keygen(&p, &mut stream_rng(49, 0)).unwrap();
    let r = check_ratio_mean(&p, &pk, &sk, &RunConfig::new(1_000_000, 49, 2)).unwrap();
    assert!(all_pass(&r.reports), "{:#?}", r.reports);
    assert!(r.per_cell.iter().all(|c| c.pass));
    assert_eq!(r.report.full_recovery(), Some(true));
}
