use super::*;
use crate::copulas::CopulaFamily;
use crate::data::ObsRow;
use crate::likelihood::cluster_loglik;
use crate::special::{norm_cdf, norm_quantile};
use approx::assert_abs_diff_eq;

fn gauss_dataset(y: Vec<f64>, clusters: Vec<usize>) -> ClusteredDataset {
    let rows: Vec<ObsRow> = y
        .iter()
        .zip(&clusters)
        .map(|(&yi, &c)| ObsRow { cluster: c.to_string(), y: yi, x_margin: vec![], x_copula: vec![] })
        .collect();
    ClusteredDataset::from_rows(rows, vec![], vec![]).unwrap()
}

#[test]
fn independence_posterior_is_uniform() {
    let spec = ModelSpec::new(CopulaFamily::independence(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![10.0, 0.0]).unwrap();
    let data = gauss_dataset(vec![9.0, 10.5, 11.0], vec![0, 0, 0]);
    let rule = QuadratureRule::gauss_legendre(50);
    let post = latent_posterior(&spec, &theta, &data, 0, &rule).unwrap();
    for &d in &post.density {
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-10);
    }
    assert_abs_diff_eq!(post.median, 0.5, epsilon = 1e-10);
    assert_abs_diff_eq!(post.mean, 0.5, epsilon = 1e-10);
    assert!(!post.degenerate);
}

#[test]
fn posterior_normalisation_and_singleton_density() {
    let spec = ModelSpec::new(CopulaFamily::clayton(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![10.0, 0.0, 0.2]).unwrap();
    let data = gauss_dataset(vec![11.2], vec![0]);
    let rule = QuadratureRule::gauss_legendre(50);
    let post = latent_posterior(&spec, &theta, &data, 0, &rule).unwrap();
    // weighted node sum of a density integrates to one
    let total: f64 =
        post.density.iter().zip(rule.weights()).map(|(&d, &w)| w * d).sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    // single observation: posterior density is c(G(y), v) itself
    let mp = crate::margins::MarginParam::Gaussian { mean: 10.0, sd: 1.0 };
    let u = mp.cdf(11.2);
    let param = spec.copula.param_from_predictor(0.2).unwrap();
    for (q, &v) in rule.nodes().iter().enumerate() {
        let c = spec.copula.density(param, u, v).unwrap();
        assert_abs_diff_eq!(post.density[q], c, epsilon = 1e-8);
    }
}

#[test]
fn gaussian_posterior_median_matches_mixed_model_form() {
    // mixed-model closed form: Phi^-1(m_k) = lambda_k ebar_k / sd_eta
    let rho: f64 = 0.6;
    let sigma = 2.0_f64;
    let b = 5.0;
    let spec = ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![b, sigma.ln(), rho.atanh()]).unwrap();
    let y = vec![5.5, 7.0, 4.2, 6.3, 5.9];
    let n = y.len() as f64;
    let data = gauss_dataset(y.clone(), vec![0; 5]);
    let rule = QuadratureRule::gauss_legendre(100);
    let post = latent_posterior(&spec, &theta, &data, 0, &rule).unwrap();
    let ebar = y.iter().map(|v| v - b).sum::<f64>() / n;
    let lambda = n * rho * rho / (1.0 - rho * rho + n * rho * rho);
    let sd_eta = rho * sigma;
    let expected = lambda * ebar / sd_eta;
    assert_abs_diff_eq!(norm_quantile(post.median), expected, epsilon = 1e-3);
}

#[test]
fn underflowed_cluster_gets_uniform_posterior() {
    let spec = ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Gaussian, 0, 0);
    // sd = e^-13.8 (the floor): y far from the mean underflows every node
    let theta = ParamVector::new(&spec, vec![0.0, crate::margins::LOG_SD_FLOOR, 0.5]).unwrap();
    let data = gauss_dataset(vec![1e200, -1e200, 1e200], vec![0, 0, 0]);
    let rule = QuadratureRule::gauss_legendre(25);
    let ll = cluster_loglik(&spec, &theta, &data, 0, &rule).unwrap();
    assert_eq!(ll, f64::NEG_INFINITY);
    let post = latent_posterior(&spec, &theta, &data, 0, &rule).unwrap();
    assert!(post.degenerate);
    assert_abs_diff_eq!(post.median, 0.5, epsilon = 1e-12);
}

#[test]
fn cond_cdf_independence_and_bernoulli_composition() {
    let spec = ModelSpec::new(CopulaFamily::independence(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![2.0, 0.0]).unwrap();
    let mp = crate::margins::MarginParam::Gaussian { mean: 2.0, sd: 1.0 };
    for &y in &[0.0, 2.0, 3.7] {
        assert_abs_diff_eq!(
            cond_cdf(&spec, &theta, y, &[], &[], 0.3).unwrap(),
            mp.cdf(y),
            epsilon = 1e-12
        );
    }
    // Bernoulli: F(0 | v) = h(1 - p, v)
    let spec = ModelSpec::new(CopulaFamily::frank(), MarginKind::Bernoulli, 0, 0);
    let theta = ParamVector::new(&spec, vec![0.2, 4.0]).unwrap();
    let p = crate::special::logistic(0.2);
    let expected = spec.copula.hfunc(4.0, 1.0 - p, 0.7).unwrap();
    assert_abs_diff_eq!(
        cond_cdf(&spec, &theta, 0.0, &[], &[], 0.7).unwrap(),
        expected,
        epsilon = 1e-12
    );
}

#[test]
fn gaussian_gaussian_cond_cdf_closed_form() {
    let rho: f64 = 0.55;
    let sigma = 1.7_f64;
    let b = 3.0;
    let spec = ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![b, sigma.ln(), rho.atanh()]).unwrap();
    let sd_eta = rho * sigma;
    let sd_eps = sigma * (1.0 - rho * rho).sqrt();
    for &(y, v) in &[(2.0, 0.3), (3.5, 0.8), (4.2, 0.5)] {
        let expected = norm_cdf((y - b - sd_eta * norm_quantile(v)) / sd_eps);
        assert_abs_diff_eq!(
            cond_cdf(&spec, &theta, y, &[], &[], v).unwrap(),
            expected,
            epsilon = 1e-10
        );
    }
}

#[test]
fn cond_quantile_round_trip() {
    let spec = ModelSpec::new(CopulaFamily::gumbel(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![1.0, 0.3, 0.7]).unwrap();
    for &(u, v) in &[(0.2, 0.4), (0.5, 0.9), (0.85, 0.15)] {
        let y = cond_quantile(&spec, &theta, u, &[], &[], v).unwrap();
        let back = cond_cdf(&spec, &theta, y, &[], &[], v).unwrap();
        assert_abs_diff_eq!(back, u, epsilon = 1e-8);
    }
    // independence: marginal quantile
    let spec = ModelSpec::new(CopulaFamily::independence(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![1.0, 0.3]).unwrap();
    let mp = crate::margins::MarginParam::Gaussian { mean: 1.0, sd: 0.3_f64.exp() };
    assert_abs_diff_eq!(
        cond_quantile(&spec, &theta, 0.25, &[], &[], 0.6).unwrap(),
        mp.quantile(0.25).unwrap(),
        epsilon = 1e-10
    );
}

#[test]
fn cond_mean_independence_recovers_marginal_mean() {
    let gauss = ModelSpec::new(CopulaFamily::independence(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&gauss, vec![4.2, 0.5]).unwrap();
    assert_abs_diff_eq!(cond_mean(&gauss, &theta, &[], &[], 0.77).unwrap(), 4.2, epsilon = 1e-7);
    let pois = ModelSpec::new(CopulaFamily::independence(), MarginKind::Poisson, 0, 0);
    let theta = ParamVector::new(&pois, vec![1.1]).unwrap();
    assert_abs_diff_eq!(
        cond_mean(&pois, &theta, &[], &[], 0.3).unwrap(),
        1.1_f64.exp(),
        epsilon = 1e-8
    );
    let bern = ModelSpec::new(CopulaFamily::independence(), MarginKind::Bernoulli, 0, 0);
    let theta = ParamVector::new(&bern, vec![-0.4]).unwrap();
    assert_abs_diff_eq!(
        cond_mean(&bern, &theta, &[], &[], 0.9).unwrap(),
        crate::special::logistic(-0.4),
        epsilon = 1e-12
    );
}

#[test]
fn gaussian_gaussian_cond_mean_closed_form_and_two_paths() {
    let rho: f64 = 0.5;
    let sigma = 2.0_f64;
    let b = 7.0;
    let spec = ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![b, sigma.ln(), rho.atanh()]).unwrap();
    for &v in &[0.2, 0.5, 0.8] {
        let expected = b + rho * sigma * norm_quantile(v);
        let quad = cond_mean(&spec, &theta, &[], &[], v).unwrap();
        let ls = cond_mean_location_scale(&spec, &theta, &[], &[], v).unwrap();
        assert_abs_diff_eq!(quad, expected, epsilon = 2e-6);
        assert!(
            ((quad - ls) / expected.abs()).abs() < 1e-6,
            "paths disagree: {quad} vs {ls} at v={v}"
        );
    }
}

#[test]
fn cond_mean_two_path_agreement_across_copulas() {
    for family in [
        CopulaFamily::clayton(),
        CopulaFamily::frank(),
        CopulaFamily::gumbel(),
        CopulaFamily::student(15.0).unwrap(),
    ] {
        let spec = ModelSpec::new(family, MarginKind::Gaussian, 0, 0);
        let s = family.predictor_from_param(family.tau_to_param(0.4).unwrap()).unwrap();
        let theta = ParamVector::new(&spec, vec![3.0, 0.2, s]).unwrap();
        for &v in &[0.25, 0.7] {
            let quad = cond_mean(&spec, &theta, &[], &[], v).unwrap();
            let ls = cond_mean_location_scale(&spec, &theta, &[], &[], v).unwrap();
            assert!(
                ((quad - ls) / quad.abs().max(1.0)).abs() < 1e-6,
                "{}: {quad} vs {ls} at v={v}",
                family.name()
            );
        }
    }
}

#[test]
fn frank_negative_tau_mean_decreases_in_v() {
    let frank = CopulaFamily::frank();
    let theta_param = frank.tau_to_param(-0.178).unwrap();
    let spec = ModelSpec::new(frank, MarginKind::Gaussian, 0, 0);
    let theta = ParamVector::new(&spec, vec![0.0, 0.0, theta_param]).unwrap();
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let means: Vec<f64> =
        grid.iter().map(|&v| cond_mean(&spec, &theta, &[], &[], v).unwrap()).collect();
    for w in means.windows(2) {
        assert!(w[1] < w[0], "conditional mean not decreasing: {means:?}");
    }
}

#[test]
fn link_curves_independence_and_errors() {
    let spec = ModelSpec::new(CopulaFamily::independence(), MarginKind::Bernoulli, 1, 0);
    let theta = ParamVector::new(&spec, vec![-1.0, 0.5]).unwrap();
    let grid: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let pts = link_curve(&spec, &theta, &grid, &[0.1, 0.5, 0.9]).unwrap();
    // all v-curves identical and equal to the linear predictor
    for p in &pts {
        assert_abs_diff_eq!(p.curve, -1.0 + 0.5 * p.x, epsilon = 1e-9);
    }
    let bad = ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Poisson, 1, 0);
    let theta = ParamVector::new(&bad, vec![0.0, 0.0, 0.0]).unwrap();
    assert!(link_curve(&bad, &theta, &grid, &[0.5]).is_err());
}

#[test]
fn link_curves_gaussian_copula_pass_through_median() {
    // at v = 1/2 a radially symmetric copula leaves the curve unchanged
    // where p(x) = 1/2, i.e. at x with s(x) = 0
    let spec = ModelSpec::new(CopulaFamily::gaussian(), MarginKind::Bernoulli, 1, 0);
    let theta = ParamVector::new(&spec, vec![-1.0, 0.5, 0.9_f64.atanh()]).unwrap();
    let x0 = 2.0; // s(x) = -1 + 0.5 x = 0
    let pts = link_curve(&spec, &theta, &[x0], &[0.5]).unwrap();
    assert_abs_diff_eq!(pts[0].curve, 0.0, epsilon = 1e-9);
}

#[test]
fn discrete_cond_quantile_is_left_inverse() {
    let spec = ModelSpec::new(CopulaFamily::clayton(), MarginKind::Poisson, 0, 0);
    let theta = ParamVector::new(&spec, vec![1.1, 0.0]).unwrap();
    for &(u, v) in &[(0.2, 0.3), (0.55, 0.8), (0.93, 0.5)] {
        let y = cond_quantile(&spec, &theta, u, &[], &[], v).unwrap();
        assert_eq!(y, y.floor());
        assert!(cond_cdf(&spec, &theta, y, &[], &[], v).unwrap() >= u - 1e-12);
        if y > 0.0 {
            assert!(cond_cdf(&spec, &theta, y - 1.0, &[], &[], v).unwrap() < u);
        }
    }
}
