use ggratio_core::params::{ParamSetFile, Variant};
use ggratio_core::ring::RingElement;
use ggratio_core::rng::{stream_rng, RngStream};
use ggratio_core::sampling::*;
use ggratio_core::scheme::keygen;
use ggratio_core::spectral;
use ggratio_core::stats::{sidak_threshold, Moments};
use ggratio_core::Error;
use nalgebra::DMatrix;
use rand::Rng;

fn within_3se(m: &Moments, target: f64) -> bool {
    (m.mean - target).abs() <= 3.0 * m.se_mean()
}

#[test]
fn uniform_eta_moments() {
    let mut rng = stream_rng(10, 0);
    let mut m = Moments::default();
    for _ in 0..(1_000_000 / 64) {
        for &x in sample_uniform_eta(64, 1, &mut rng).coeffs() {
            assert!((-1..=1).contains(&x));
            m.push(x as f64);
        }
    }
    assert!(within_3se(&m, 0.0), "{m:?}");
    assert!((m.variance() / (2.0 / 3.0) - 1.0).abs() < 0.01, "{}", m.variance());
    assert!(sample_uniform_eta(16, 0, &mut rng).is_zero());
}

#[test]
fn challenge_distribution() {
    let mut rng = stream_rng(11, 0);
    let mut per = vec![Moments::default(); 32];
    for _ in 0..100_000 {
        let c = sample_challenge(32, 32, &mut rng);
        for (m, &x) in per.iter_mut().zip(c.coeffs()) {
            m.push(x as f64);
        }
    }
    // one family of 32 tests at the single-test 3 SE false-alarm rate
    let z = sidak_threshold(3.0, per.len());
    assert!(per.iter().all(|m| (m.mean - 0.5).abs() <= z * m.se_mean()));
    for _ in 0..1000 {
        let c = sample_challenge(32, 16, &mut rng);
        assert!(c.coeffs()[16..].iter().all(|&x| x == 0));
        assert!(c.coeffs().iter().all(|&x| x == 0 || x == 1));
    }
    let mut counts = [0u32; 4];
    for _ in 0..1_000_000 {
        let c = sample_challenge(2, 2, &mut rng);
        counts[(c.coeffs()[0] + 2 * c.coeffs()[1]) as usize] += 1;
    }
    for &k in &counts {
        assert!((k as f64 / 1e6 - 0.25).abs() < 0.02 * 0.25, "{counts:?}");
    }
}

#[test]
fn covariance_examples() {
    let one = [RingElement::one(8)];
    let c = build_covariance(&one, 3.0, 1.0, Variant::Generic).unwrap();
    let c_mod = build_covariance(&one, 3.0, 1.0, Variant::Module).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let d = (i == j) as i64 as f64;
            assert!((c.get(i, j) - 8.0 * d).abs() < 1e-12);
            assert!((c_mod.get(i, j) - 7.0 * d).abs() < 1e-12);
        }
    }
    assert!(matches!(
        build_covariance(&one, 1.0, 1.0, Variant::Generic),
        Err(Error::NotPositiveDefinite(_))
    ));
    assert!(c.is_symmetric(1e-9));
    assert!(c.cholesky_residual().unwrap() <= 1e-6 * c.max_abs_entry());
}

#[test]
fn multivariate_rounded_variances() {
    let mut rng = stream_rng(12, 0);
    let id = CovarianceMatrix::scaled_identity(4, 1.0);
    let wide = CovarianceMatrix::scaled_identity(4, 15.0);
    let (mut a, mut b, mut shifted) = (Moments::default(), Moments::default(), Moments::default());
    let center = [2.25, 0.0, 0.0, 0.0];
    for _ in 0..250_000 {
        for x in sample_multivariate_gaussian(&id, &[0.0; 4], &mut rng).unwrap() {
            a.push(x as f64);
        }
        for x in sample_multivariate_gaussian(&wide, &[0.0; 4], &mut rng).unwrap() {
            b.push(x as f64);
        }
        shifted.push(sample_multivariate_gaussian(&wide, &center, &mut rng).unwrap()[0] as f64);
    }
    // rounding adds the variance of U(-1/2, 1/2)
    assert!((a.variance() / (1.0 + 1.0 / 12.0) - 1.0).abs() < 0.02, "{}", a.variance());
    assert!((b.variance() / 225.0 - 1.0).abs() < 0.01, "{}", b.variance());
    assert!(within_3se(&shifted, 2.25), "{shifted:?}");
    assert!(sample_multivariate_gaussian(&id, &[0.0; 3], &mut rng).is_err());
}

#[test]
fn y_block_variances_follow_covariance() {
    let p = ParamSetFile::builtin().get("ci-n16").unwrap().params.clone();
    let (_, sk) = keygen(&p, &mut stream_rng(13, 0)).unwrap();
    let cov = build_covariance(&sk.s, p.sigma, p.sigma_u, p.variant).unwrap();
    let mut rng = stream_rng(13, 1);
    let mut blocks = vec![Moments::default(); p.k];
    let zero = vec![0.0; cov.dim()];
    for _ in 0..1_000_000 {
        let y = sample_multivariate_gaussian(&cov, &zero, &mut rng).unwrap();
        for (m, block) in blocks.iter_mut().zip(y.chunks(p.n)) {
            block.iter().for_each(|&x| m.push(x as f64));
        }
    }
    for (m, s) in blocks.iter().zip(&sk.s) {
        let want = p.sigma * p.sigma - p.sigma_u * p.sigma_u * s.l2_norm_sq() as f64;
        assert!((m.variance() / want - 1.0).abs() < 0.02, "{} vs {want}", m.variance());
    }
}

#[test]
fn discrete_gaussian_examples() {
    let dg = DiscreteGaussian::with_centers(1.0, &[-0.5, 0.0]).unwrap();
    let mut rng = stream_rng(14, 0);
    let mut m = Moments::default();
    for _ in 0..1_000_000 {
        m.push(dg.sample(-0.5, &mut rng) as f64);
    }
    assert!(within_3se(&m, -0.5), "{m:?}");
    let mut tail = 0;
    for _ in 0..10_000_000 {
        if dg.sample(0.0, &mut rng).abs() as f64 > 9.5 {
            tail += 1;
        }
    }
    assert_eq!(tail, 0);
    let hits = (0..100_000)
        .filter(|_| sample_discrete_gaussian_1d(1e-4, 3.0, &mut rng).unwrap() == 3)
        .count();
    assert!(hits as f64 / 1e5 > 0.9999);
    assert!(sample_discrete_gaussian_1d(0.0, 0.0, &mut rng).is_err());
}

#[test]
fn truncated_cauchy_moments() {
    let mut rng = stream_rng(15, 0);
    let mut m = Moments::default();
    let tc = TruncatedCauchy::new(0.0, 1.0, 50.0).unwrap();
    for _ in 0..10_000_000 {
        m.push(tc.sample(&mut rng));
    }
    let v = 50.0 / 50f64.atan() - 1.0;
    assert!(within_3se(&m, 0.0));
    assert!((m.variance() / v - 1.0).abs() < 0.02, "{} vs {v}", m.variance());

    let shifted = TruncatedCauchy::new(4.0, 2.0, 30.0).unwrap();
    let mut ms = Moments::default();
    for _ in 0..1_000_000 {
        ms.push(sample_truncated_cauchy(shifted.alpha, shifted.beta, shifted.half_width, &mut rng).unwrap());
    }
    assert!(within_3se(&ms, 4.0));

    let wide = TruncatedCauchy::new(0.0, 1.0, 1e6).unwrap();
    let mut xs: Vec<f64> = (0..1_000_000).map(|_| wide.sample(&mut rng)).collect();
    xs.sort_unstable_by(f64::total_cmp);
    let (q1, q3) = (xs[250_000], xs[750_000]);
    assert!((q1 + 1.0).abs() < 0.01 && (q3 - 1.0).abs() < 0.01, "{q1} {q3}");
}

#[test]
fn streams_reproduce_and_separate() {
    let a: Vec<u64> = (0..16).map({
        let mut r = stream_rng(99, 3);
        move |_| r.random()
    }).collect();
    let b: Vec<u64> = (0..16).map({
        let mut r = RngStream::new(99, 3).rng();
        move |_| r.random()
    }).collect();
    let c: Vec<u64> = (0..16).map({
        let mut r = stream_rng(99, 4);
        move |_| r.random()
    }).collect();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn gram_matrix(blocks: &[RingElement]) -> DMatrix<f64> {
    let n = blocks[0].n();
    let mut c = DMatrix::<f64>::zeros(n * blocks.len(), n);
    for (b, blk) in blocks.iter().enumerate() {
        let v = blk.coeffs();
        for i in 0..n {
            for j in 0..n {
                c[(b * n + i, j)] = if i >= j { v[i - j] } else { -v[n + i - j] } as f64;
            }
        }
    }
    c.transpose() * c
}

#[test]
fn spectral_norm_matches_eigendecomposition() {
    let mut rng = stream_rng(16, 0);
    for &(n, k) in &[(8usize, 3usize), (16, 3), (32, 2), (64, 3)] {
        for variant in [Variant::Generic, Variant::Module] {
            let mut blocks = vec![RingElement::one(n)];
            blocks.extend((1..k).map(|_| sample_uniform_eta(n, 1, &mut rng)));
            let eff = effective_blocks(&blocks, variant);
            let want = gram_matrix(&eff).symmetric_eigen().eigenvalues.max().sqrt();
            let got = spectral::largest_singular_value(&eff).unwrap();
            assert!((got / want - 1.0).abs() < 1e-6, "n={n} {variant:?}: {got} vs {want}");
        }
    }
}

/// Cholesky success and the eigenvalue criterion decide positive
/// definiteness identically on random keys.
#[test]
fn pd_decisions_agree_with_eigenvalues() {
    let mut rng = stream_rng(17, 0);
    let (n, sigma_u) = (16, 1.0);
    let mut outcomes = [0usize; 2];
    for trial in 0..1000 {
        let variant = if trial % 2 == 0 { Variant::Generic } else { Variant::Module };
        let mut blocks = vec![RingElement::one(n)];
        blocks.extend((1..3).map(|_| sample_uniform_eta(n, 1, &mut rng)));
        let eff = effective_blocks(&blocks, variant);
        let s1 = gram_matrix(&eff).symmetric_eigen().eigenvalues.max().sqrt();
        // sigma near sigma_1 so both outcomes occur
        let sigma = s1 * rng.random_range(0.8..1.2);
        let lambda_min = sigma * sigma - s1 * s1;
        if lambda_min.abs() < 1e-6 * sigma * sigma {
            continue;
        }
        let mut full = CovarianceMatrix::assemble(&blocks, sigma, sigma_u, variant);
        let cholesky_pd = full.factor().is_ok();
        let spectral_pd = build_covariance(&blocks, sigma, sigma_u, variant).is_ok();
        assert_eq!(cholesky_pd, lambda_min > 0.0, "trial {trial}");
        assert_eq!(spectral_pd, cholesky_pd, "trial {trial}");
        outcomes[cholesky_pd as usize] += 1;
    }
    assert!(outcomes[0] > 100 && outcomes[1] > 100, "{outcomes:?}");
}
