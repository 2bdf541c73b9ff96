use elicit_core::regression::{
    cv_select_lambda, elastic_net_objective, fit_lasso, CvOptions, LassoConfig, LassoFit,
};
use elicit_core::seed;
use elicit_core::Dataset;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Columns scaled so that `X / sqrt(n)` has orthonormal columns
/// (modified Gram-Schmidt, done here rather than in the library).
fn orthonormal_design(n: usize, p: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut q = gaussian(n, p, rng);
    for j in 0..p {
        for k in 0..j {
            let proj = q.column(j).dot(&q.column(k));
            let qk = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-proj, &qk);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    q * (n as f64).sqrt()
}

fn soft(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Lasso optimality conditions at `lambda`, tolerance `10 * tol`.
fn kkt_violation(data: &Dataset, fit: &LassoFit, lambda: f64, tol: f64) -> Option<String> {
    let x = data.features();
    let n = data.n() as f64;
    let residual = data.responses() - &x.dot(fit.weights.as_array());
    for j in 0..data.p() {
        let g = x.column(j).dot(&residual) / n;
        let w = fit.weights[j];
        let bad = if w != 0.0 {
            (g - lambda * w.signum()).abs() >= 10.0 * tol
        } else {
            g.abs() > lambda + 10.0 * tol
        };
        if bad {
            return Some(format!("coordinate {j}: w = {w}, gradient {g}, lambda {lambda}"));
        }
    }
    None
}

#[test]
fn orthonormal_design_matches_soft_threshold() {
    let mut rng = seed::rng(11);
    for instance in 0..100 {
        let p = rng.random_range(1..=50);
        let n = p + rng.random_range(0..20);
        let x = orthonormal_design(n, p, &mut rng);
        let y: Array1<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let lambda = rng.random_range(0.0..0.5);
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let fit = fit_lasso(&data, &LassoConfig::lasso(lambda)).unwrap();
        assert!(fit.converged);
        let ols = x.t().dot(&y) / n as f64;
        let max_err = (0..p)
            .map(|j| (fit.weights[j] - soft(ols[j], lambda)).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-6, "instance {instance}: max error {max_err}");
        assert_eq!(kkt_violation(&data, &fit, lambda, 1e-7), None);
    }
}

#[test]
fn kkt_holds_on_random_designs() {
    let mut rng = seed::rng(12);
    for _ in 0..40 {
        let n = rng.random_range(5..60);
        let p = rng.random_range(1..80);
        let data = Dataset::new(
            gaussian(n, p, &mut rng),
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        )
        .unwrap();
        let max = elic_lambda_max(&data);
        for frac in [0.9, 0.3, 0.05] {
            let config = LassoConfig {
                record_objective: true,
                ..LassoConfig::lasso(frac * max)
            };
            let fit = fit_lasso(&data, &config).unwrap();
            if !fit.converged {
                continue;
            }
            assert_eq!(kkt_violation(&data, &fit, config.lambda, config.tolerance), None);
            for pair in fit.objective_history.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0));
            }
            let obj = elastic_net_objective(&data, &fit.weights, 1.0, config.lambda).unwrap();
            assert!((obj - fit.objective_history.last().unwrap()).abs() < 1e-9 * obj.max(1.0));
        }
    }
}

fn elic_lambda_max(data: &Dataset) -> f64 {
    let xty = data.features().t().dot(data.responses());
    xty.iter().fold(0.0f64, |m, v| m.max(v.abs())) / data.n() as f64
}

#[test]
fn univariate_least_squares_slope() {
    let x = Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 4.0]).unwrap();
    let y = Array1::from(vec![2.5, 3.0, 9.0]);
    let slope = x.column(0).dot(&y) / x.column(0).dot(&x.column(0));
    let fit = fit_lasso(&Dataset::new(x, y).unwrap(), &LassoConfig::lasso(0.0)).unwrap();
    assert!((fit.weights[0] - slope).abs() < 1e-10);
}

#[test]
fn planted_support_is_recovered() {
    let mut rng = seed::rng(13);
    let (n, p) = (100, 150);
    let x = gaussian(n, p, &mut rng);
    let support = [3, 40, 77, 101, 149];
    let mut theta = Array1::zeros(p);
    for (k, &j) in support.iter().enumerate() {
        theta[j] = if k % 2 == 0 { 1.5 } else { -1.2 };
    }
    let y = x.dot(&theta) + Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    let data = Dataset::new(x, y).unwrap();
    let cv = cv_select_lambda(&data, &CvOptions::default()).unwrap();
    let fit = fit_lasso(&data, &LassoConfig::lasso(cv.lambda_min)).unwrap();
    let found = fit.weights.support();
    for j in support {
        assert!(found.contains(&j), "missed {j}");
    }
    let false_positives = found.len() - support.len();
    assert!(false_positives <= 25, "{false_positives} false positives");
    if fit.converged {
        assert_eq!(kkt_violation(&data, &fit, cv.lambda_min, 1e-7), None);
    }
}

#[test]
fn pure_noise_prefers_sparse_models() {
    let mut rng = seed::rng(14);
    for instance in 0..20 {
        let (n, p) = (50, 100);
        let data = Dataset::new(
            gaussian(n, p, &mut rng),
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        )
        .unwrap();
        let cv = cv_select_lambda(&data, &CvOptions { seed: instance, ..CvOptions::default() }).unwrap();
        let mut sorted = cv.lambda_grid.clone();
        sorted.sort_by(f64::total_cmp);
        let median = 0.5 * (sorted[49] + sorted[50]);
        assert!(cv.lambda_min >= median, "instance {instance}: {} < {median}", cv.lambda_min);
    }
}

#[test]
fn cv_is_deterministic_and_seeds_stay_on_grid() {
    let mut rng = seed::rng(15);
    let data = Dataset::new(
        gaussian(30, 40, &mut rng),
        (0..30).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    )
    .unwrap();
    let a = cv_select_lambda(&data, &CvOptions::default()).unwrap();
    let b = cv_select_lambda(&data, &CvOptions::default()).unwrap();
    assert_eq!(a, b);
    for s in [1, 2, 3] {
        let r = cv_select_lambda(&data, &CvOptions { seed: s, ..CvOptions::default() }).unwrap();
        assert!(r.lambda_grid.contains(&r.lambda_min));
    }
}
