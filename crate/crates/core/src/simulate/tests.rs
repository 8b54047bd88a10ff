use super::*;
use approx::assert_abs_diff_eq;

#[test]
fn spline_basis_partition_of_unity() {
    let b31 = SplineBasis::new(1, vec![0.5]);
    let b41 = SplineBasis::new(2, vec![0.33, 0.67]);
    let b51 = SplineBasis::new(2, vec![0.25, 0.5, 0.75]);
    assert_eq!(b31.dim(), 3);
    assert_eq!(b41.dim(), 5);
    assert_eq!(b51.dim(), 6);
    for basis in [&b31, &b41, &b51] {
        for &x in &[0.0, 0.37, 0.5, 0.99, 1.0] {
            let vals = bspline_basis(basis, x).unwrap();
            assert_eq!(vals.len(), basis.dim());
            let sum: f64 = vals.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(vals.iter().all(|&v| v >= 0.0));
        }
    }
    assert!(bspline_basis(&b31, -0.1).is_err());
    assert!(bspline_basis(&b31, 1.1).is_err());
}

#[test]
fn spline_degree1_endpoint() {
    let b = SplineBasis::new(1, vec![0.5]);
    let full = bspline_basis(&b, 0.0).unwrap();
    assert_eq!(full, vec![1.0, 0.0, 0.0]);
    let cols = spline_design_columns(&b, 0.0).unwrap();
    assert_eq!(cols, vec![1.0, 0.0]);
}

#[test]
fn spline_degree2_matches_hand_recursion() {
    // Cox-de Boor by hand at x = 0.5 with knots {0.33, 0.67}:
    // only B1, B2, B3 are active; B1 = B3 = (0.17/0.67)/2, B2 = 1 - 2 B1.
    let b = SplineBasis::new(2, vec![0.33, 0.67]);
    let vals = bspline_basis(&b, 0.5).unwrap();
    let side = 0.5 * 0.17 / 0.67;
    assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(vals[1], side, epsilon = 1e-12);
    assert_abs_diff_eq!(vals[2], 1.0 - 2.0 * side, epsilon = 1e-12);
    assert_abs_diff_eq!(vals[3], side, epsilon = 1e-12);
    assert_abs_diff_eq!(vals[4], 0.0, epsilon = 1e-15);
}

#[test]
fn s2_spline_representation_is_continuous_at_knot() {
    // s2(x) = (2+x)1{x<1/2} + (4-3x)1{x>=1/2} = 1 + sp31 + 1.5 sp32
    let b = SplineBasis::new(1, vec![0.5]);
    let coef = [1.0, 1.0, 1.5];
    let s2 = |x: f64| if x < 0.5 { 2.0 + x } else { 4.0 - 3.0 * x };
    for &x in &[0.0, 0.2, 0.5, 0.51, 0.8, 1.0] {
        let cols = spline_design_columns(&b, x).unwrap();
        let val = coef[0] + coef[1] * cols[0] + coef[2] * cols[1];
        assert_abs_diff_eq!(val, s2(x), epsilon = 1e-12);
    }
    // both branch expressions meet at 2.5
    assert_abs_diff_eq!(s2(0.5), 2.5, epsilon = 0.0);
    assert_abs_diff_eq!(2.0 + 0.5, 2.5, epsilon = 0.0);
}

#[test]
fn dgp_is_seed_deterministic() {
    for id in [DgpId::Exp(3), DgpId::Dgp(5), DgpId::Dgp(10)] {
        let spec = DgpSpec::new(id, 7, 4);
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let a = dgp(&spec, &mut r1).unwrap();
        let b = dgp(&spec, &mut r2).unwrap();
        assert_eq!(a.dataset.y(), b.dataset.y());
        assert_eq!(a.true_theta.values(), b.true_theta.values());
        assert_eq!(a.latents, b.latents);
    }
}

#[test]
fn dgp_catalog_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, margin_covs, copula_covs, params) in [
        ("exp1", 0, 0, 3),
        ("exp2", 0, 1, 4),
        ("exp3", 1, 1, 5),
        ("exp6", 2, 2, 7),
        ("dgp1", 1, 0, 4),
        ("dgp2", 2, 0, 5),
        ("dgp5", 1, 0, 3),
        ("dgp8", 2, 0, 4),
        ("dgp9", 9, 0, 12),
        ("dgp11", 9, 0, 11),
    ] {
        let id = DgpId::parse(name).unwrap();
        let sim = dgp(&DgpSpec::new(id, 3, 4), &mut rng).unwrap();
        assert_eq!(sim.spec.n_margin_covariates, margin_covs, "{name}");
        assert_eq!(sim.spec.n_copula_covariates, copula_covs, "{name}");
        assert_eq!(sim.true_theta.len(), params, "{name}");
        assert_eq!(sim.dataset.n_obs(), 12, "{name}");
        assert_eq!(sim.latents.len(), 3, "{name}");
    }
    assert!(DgpId::parse("exp9").is_err());
    assert!(DgpId::parse("dgp13").is_err());
}

#[test]
fn exp1_marginal_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sim = dgp(&DgpSpec::new(DgpId::Exp(1), 400, 5), &mut rng).unwrap();
    let n = sim.dataset.n_obs() as f64;
    let mean = sim.dataset.y().iter().sum::<f64>() / n;
    let var = sim.dataset.y().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    // cluster dependence inflates the variance of the mean; loose bounds
    assert!((mean - 10.0).abs() < 0.15, "mean {mean}");
    assert!((var - 1.0).abs() < 0.15, "var {var}");
}

#[test]
fn dgp1_within_cluster_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let sim = dgp(&DgpSpec::new(DgpId::Dgp(1), 400, 30), &mut rng).unwrap();
    // residuals about the true mean 10 + 0.5 x
    let data = &sim.dataset;
    let mut msb = 0.0;
    let mut msw = 0.0;
    let k = data.n_clusters();
    let n = 30.0;
    for c in 0..k {
        let resid: Vec<f64> = data
            .cluster_range(c)
            .map(|i| data.y()[i] - 10.0 - 0.5 * data.x_margin_row(i)[0])
            .collect();
        let m = resid.iter().sum::<f64>() / n;
        msb += m * m;
        msw += resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1.0);
    }
    msb = msb * n / k as f64;
    msw /= k as f64;
    let icc = (msb - msw) / (msb + (n - 1.0) * msw);
    let expected = 1.0 / (1.0 + 2.25);
    assert!((icc - expected).abs() < 0.03, "ICC {icc} vs {expected}");
}

#[test]
fn dgp1_mixed_form_agrees_with_copula_sampler() {
    // two-sample KS between mixed-model generation and sample_cluster under
    // the equivalent Gaussian copula parameterisation
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let sim = dgp(&DgpSpec::new(DgpId::Dgp(1), 150, 20), &mut rng).unwrap();
    let mut a: Vec<f64> = sim.dataset.y().to_vec();

    let mut b: Vec<f64> = Vec::new();
    let mut rng2 = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..150 {
        let xm: Vec<Vec<f64>> = (0..20).map(|_| vec![rng2.gen_range(0.0..1.0)]).collect();
        let xc: Vec<Vec<f64>> = vec![vec![]; 20];
        let y = sample_cluster(&sim.spec, &sim.true_theta, &xm, &xc, &mut rng2).unwrap();
        b.extend(y);
    }
    // two-sample KS
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let ecdf = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    let mut d = 0.0_f64;
    for &x in a.iter().chain(b.iter()) {
        d = d.max((ecdf(&a, x) - ecdf(&b, x)).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let p = ks_pvalue(ne.round() as usize, d);
    assert!(p > 0.01, "two-sample KS p = {p}, d = {d}");
}

#[test]
fn sampler_marginal_uniformity_via_hinv() {
    // pooled U = hinv(W, V) is uniform because int h(u,v) dv = u
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fam = CopulaFamily::clayton();
    let param = fam.tau_to_param(0.5).unwrap();
    // independent (W, V) pairs keep the KS p-value calibrated; the same
    // marginal-uniformity identity int h(u,v) dv = u is being exercised
    let mut u = Vec::with_capacity(5000);
    for _ in 0..5000 {
        let v = rng.gen_range(1e-12..1.0 - 1e-12);
        let w = rng.gen_range(1e-12..1.0 - 1e-12);
        u.push(fam.hinv(param, w, v).unwrap());
    }
    let d = ks_statistic(&mut u, |x| x);
    let p = ks_pvalue(5000, d);
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn ks_helpers_behave() {
    // exact-uniform grid has a tiny statistic
    let mut grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let d = ks_statistic(&mut grid, |x| x);
    assert!(d < 1e-3);
    assert!(ks_pvalue(1000, d) > 0.99);
    // a clearly wrong cdf is rejected
    let mut grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let d = ks_statistic(&mut grid, |x| x * x);
    assert!(ks_pvalue(1000, d) < 1e-6);
}

#[test]
fn harness_is_deterministic_and_aggregates() {
    let mut config = HarnessConfig::new(DgpSpec::new(DgpId::Exp(1), 10, 5), 3, 77);
    config.quad_nodes = 15;
    let r1 = run_harness(&config).unwrap();
    let r2 = run_harness(&config).unwrap();
    assert_eq!(r1.outcomes.len(), 3);
    assert_eq!(r1.failures, 0);
    for (a, b) in r1.outcomes.iter().zip(&r2.outcomes) {
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.true_params, b.true_params);
    }
    assert_eq!(r1.param_rmse.len(), 3);
    assert!(r1.param_rmse.iter().all(|&v| v.is_finite() && v >= 0.0));
    assert_eq!(r1.param_names[0], "margin.intercept");
}

#[test]
fn harness_selection_and_prediction_smoke() {
    let mut config = HarnessConfig::new(DgpSpec::new(DgpId::Dgp(5), 12, 10), 2, 123);
    config.candidates = vec!["clayton".into(), "independence".into()];
    config.predict_new = 12;
    config.quad_nodes = 15;
    let report = run_harness(&config).unwrap();
    assert_eq!(report.failures, 0, "failures: {:?}", report.outcomes.iter().filter_map(|o| o.failed.clone()).collect::<Vec<_>>());
    assert_eq!(report.selection_pct.len(), 2);
    let total: f64 = report.selection_pct.iter().map(|(_, p)| p).sum();
    assert_abs_diff_eq!(total, 100.0, epsilon = 1e-9);
    assert_eq!(report.prediction_summary.len(), 2);
    for o in &report.outcomes {
        assert_eq!(o.prediction.len(), 2);
        for (_, m) in &o.prediction {
            assert!(m.rmse.is_finite() && m.rmse95.is_finite());
            assert!(m.rmse >= 0.0);
        }
    }
}

#[test]
fn generated_clusters_are_exchangeable_across_positions() {
    // position within a cluster carries no information: per-position means
    // and adjacent-position correlations agree within Monte-Carlo noise
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let sim = dgp(&DgpSpec::new(DgpId::Exp(1), 4000, 3), &mut rng).unwrap();
    let data = &sim.dataset;
    let k = data.n_clusters();
    let col = |j: usize| -> Vec<f64> {
        (0..k).map(|c| data.y()[data.cluster_range(c).start + j]).collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (c0, c1, c2) = (col(0), col(1), col(2));
    let (m0, m1, m2) = (mean(&c0), mean(&c1), mean(&c2));
    // sd of a position mean is about sqrt(1/4000) = 0.016
    assert!((m0 - m1).abs() < 0.07 && (m1 - m2).abs() < 0.07, "{m0} {m1} {m2}");
    let corr = |a: &[f64], b: &[f64]| {
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    let r01 = corr(&c0, &c1);
    let r12 = corr(&c1, &c2);
    let r02 = corr(&c0, &c2);
    assert!((r01 - r12).abs() < 0.08 && (r01 - r02).abs() < 0.08, "{r01} {r12} {r02}");
}
