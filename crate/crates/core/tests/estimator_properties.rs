use panel_lp::estimator::{coefficient_interval, ols_fit, DesignMatrix, InferenceOptions};
use panel_lp::validate::oracle;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Problem {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    clusters: Vec<usize>,
}

fn problem() -> impl Strategy<Value = Problem> {
    (20usize..60, 1usize..4, 2usize..8).prop_flat_map(|(n, k, g)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), k),
            prop::collection::vec(-3.0..3.0f64, n),
            prop::collection::vec(0..g, n),
        )
            .prop_map(|(columns, noise, mut clusters)| {
                // Guarantee at least two clusters.
                clusters[0] = 0;
                clusters[1] = 1;
                let y = (0..noise.len())
                    .map(|i| noise[i] + columns.iter().enumerate().map(|(j, c)| (j as f64 - 0.5) * c[i]).sum::<f64>())
                    .collect();
                Problem { columns, y, clusters }
            })
    })
}

fn design(p: &Problem) -> DesignMatrix {
    let names = (0..p.columns.len()).map(|j| format!("x{j}")).collect();
    DesignMatrix::new(names, p.columns.clone(), p.y.clone())
        .unwrap()
        .with_clusters(p.clusters.clone())
        .unwrap()
}

proptest! {
    #[test]
    fn cluster_relabelling_leaves_covariance_unchanged(p in problem(), shift in 1usize..100) {
        let a = ols_fit(&design(&p)).unwrap();
        let relabelled = Problem {
            clusters: p.clusters.iter().map(|c| (c * 7 + shift) % 1009).collect(),
            ..p.clone()
        };
        let b = ols_fit(&design(&relabelled)).unwrap();
        let (va, vb) = (a.covariance.unwrap(), b.covariance.unwrap());
        prop_assert!(oracle::max_abs_diff(&va, &vb) < 1e-12);
    }

    #[test]
    fn rescaling_a_regressor_rescales_its_coefficient_only(p in problem(), c in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64]) {
        let opts = InferenceOptions::default();
        let a = ols_fit(&design(&p)).unwrap();
        let mut scaled = p.clone();
        scaled.columns[0].iter_mut().for_each(|v| *v *= c);
        let b = ols_fit(&design(&scaled)).unwrap();
        let (ca, cb) = (coefficient_interval(&a, "x0", &opts).unwrap(), coefficient_interval(&b, "x0", &opts).unwrap());
        prop_assert!((cb.estimate * c - ca.estimate).abs() < 1e-9 * (1.0 + ca.estimate.abs()));
        prop_assert!((cb.std_error * c.abs() - ca.std_error).abs() < 1e-9 * (1.0 + ca.std_error));
        prop_assert!((cb.p_value - ca.p_value).abs() < 1e-9);
        for name in a.names.iter().skip(1) {
            prop_assert!((a.coefficient(name).unwrap() - b.coefficient(name).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn partialled_regression_recovers_the_full_coefficient(p in problem()) {
        prop_assume!(p.columns.len() >= 2);
        let d = design(&p);
        let full = ols_fit(&d).unwrap();
        let x = d.to_matrix();
        let z = x.columns(1, x.ncols() - 1).into_owned();
        let gamma = oracle::normal_equations(&z, &p.columns[0]).unwrap();
        let r = oracle::residuals(&z, &p.columns[0], &gamma);
        let beta = r.iter().zip(&p.y).map(|(a, b)| a * b).sum::<f64>() / r.iter().map(|a| a * a).sum::<f64>();
        prop_assert!((full.coefficient("x0").unwrap() - beta).abs() < 1e-8);
    }

    #[test]
    fn cr1_matches_the_literal_sandwich(p in problem()) {
        let d = design(&p);
        let fit = ols_fit(&d).unwrap();
        let brute = oracle::brute_force_cr1(&d.to_matrix(), &fit.residuals, &p.clusters).unwrap();
        prop_assert!(oracle::max_abs_diff(fit.covariance.as_ref().unwrap(), &brute) < 1e-12);
    }
}

#[test]
fn single_cluster_has_no_covariance() {
    let d = DesignMatrix::new(vec!["x".into()], vec![vec![1.0, 2.0, 3.0, 5.0]], vec![1.0, 2.5, 2.9, 5.2])
        .unwrap()
        .with_clusters(vec![0; 4])
        .unwrap();
    let fit = ols_fit(&d).unwrap();
    assert!(fit.covariance.is_none());
    assert!(coefficient_interval(&fit, "x", &InferenceOptions::default()).is_err());
}
