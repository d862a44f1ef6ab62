use std::path::PathBuf;

use nalgebra::DMatrix;
use panel_lp::estimator::{linear_combination, InferenceOptions, RegressionResult};
use panel_lp::ingest::{merge, read_panel, read_panel_from, render_regression_table, write_panel, IrfRow, IrfTable, TableColumn};
use panel_lp::lp::Effect;
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn irf_row() -> impl Strategy<Value = IrfRow> {
    (
        0usize..20,
        "[a-z][a-z_0-9]{0,8}",
        prop::array::uniform6(finite()),
        prop_oneof![Just(""), Just("*"), Just("**"), Just("***")],
        prop::array::uniform3(0usize..100_000),
    )
        .prop_map(|(horizon, coef_name, v, stars, n)| IrfRow {
            horizon,
            coef_name,
            estimate: v[0],
            se: v[1],
            ci_low: v[2],
            ci_high: v[3],
            p: v[4],
            stars: stars.to_string(),
            n_obs: n[0],
            n_entities: n[1],
            n_periods: n[2],
            r2: v[5],
        })
}

proptest! {
    #[test]
    fn irf_csv_round_trip_is_exact(rows in prop::collection::vec(irf_row(), 0..12)) {
        let table = IrfTable { rows };
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = IrfTable::read_from(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn merge_commutes_up_to_column_order(
        a in prop::collection::btree_map((0u8..4, 0i64..6), -10.0..10.0f64, 0..12),
        b in prop::collection::btree_map((0u8..4, 0i64..6), -10.0..10.0f64, 0..12),
    ) {
        let build = |m: &std::collections::BTreeMap<(u8, i64), f64>, col: &str| {
            let mut text = format!("entity,year,{col}\n");
            for ((e, t), v) in m {
                text.push_str(&format!("E{e},{t},{v}\n"));
            }
            read_panel_from(text.as_bytes(), col).unwrap()
        };
        let (pa, pb) = (build(&a, "x"), build(&b, "y"));
        let (ab, _) = merge(&[pa.clone(), pb.clone()]).unwrap();
        let (ba, _) = merge(&[pb, pa]).unwrap();
        prop_assert_eq!(ab.keys(), ba.keys());
        prop_assert_eq!(ab.entities(), ba.entities());
        for c in ["x", "y"] {
            prop_assert_eq!(ab.column(c).unwrap(), ba.column(c).unwrap());
        }
    }
}

#[test]
fn panel_write_read_round_trip() {
    let p = read_panel(&data("sample/panel.csv")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.csv");
    write_panel(&p, &path).unwrap();
    assert_eq!(read_panel(&path).unwrap(), p);
}

#[test]
fn sample_fixture_has_ten_entities_over_forty_years() {
    let p = read_panel(&data("sample/panel.csv")).unwrap();
    assert_eq!(p.n_rows(), 400);
    assert_eq!(p.entities().len(), 10);
    assert_eq!(p.periods().len(), 40);
}

fn golden_fit(coefs: &[f64], ses: &[f64], n: (usize, usize, usize)) -> RegressionResult {
    let names = ["D", "D_x_oecd", "D_lag_1", "d_y_lag_1"].iter().map(|s| s.to_string()).collect();
    let v = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(ses.len(), ses.iter().map(|s| s * s)));
    let mut fit = RegressionResult::from_estimates(names, coefs.to_vec(), v, n.1);
    (fit.n_obs, fit.n_entities, fit.n_periods) = n;
    fit
}

#[test]
fn regression_table_matches_golden_file() {
    let opts = InferenceOptions::default();
    let fits = [
        golden_fit(&[-0.0152, 0.0104, -0.0281, -0.1424], &[0.012, 0.021, 0.0101, 0.0232], (6823, 172, 58)),
        golden_fit(&[-0.0341, -0.0208, -0.0431, 0.5061], &[0.0114, 0.016, 0.015, 0.023], (6658, 172, 57)),
    ];
    let effects: Vec<Vec<Effect>> = fits
        .iter()
        .map(|f| {
            vec![Effect {
                name: "ame_oecd_1".into(),
                interval: linear_combination(f, &[("D", 1.0), ("D_x_oecd", 1.0)], &opts).unwrap(),
            }]
        })
        .collect();
    let columns = [
        TableColumn { header: "k=0", fit: &fits[0], r_squared: 0.0794, effects: &effects[0] },
        TableColumn { header: "k=1", fit: &fits[1], r_squared: 0.3317, effects: &effects[1] },
    ];
    let rendered = render_regression_table(&columns, &opts);
    let golden = include_str!("golden/regression_table.txt");
    assert_eq!(rendered, golden, "rendered:\n{rendered}");
}
