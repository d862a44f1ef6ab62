use std::path::PathBuf;

use panel_lp::events::{build_dummies, severity_terciles, Event, EventList, PercentileRule, Severity};
use panel_lp::ingest::read_events;
use panel_lp::lp::smooth_transition;
use panel_lp::panel::PanelBuilder;
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn pandemic_event_fixture_counts() {
    let events = read_events(&data("events_table_a1.csv"), Some(&data("mortality_stub.csv"))).unwrap();
    let counts: Vec<(String, usize)> = events.events().iter().map(|e| (e.name.clone(), e.entities.len())).collect();
    let expected = [("H3N2 Flu", 18), ("SARS", 29), ("H1N1", 173), ("MERS", 26), ("Ebola", 10), ("Zika", 38)];
    assert_eq!(counts.len(), expected.len());
    for ((name, n), (want_name, want_n)) in counts.iter().zip(expected) {
        assert_eq!((name.as_str(), *n), (want_name, want_n));
    }

    let mut countries: Vec<&String> = events.events().iter().flat_map(|e| &e.entities).collect();
    countries.sort();
    countries.dedup();
    let mut b = PanelBuilder::new(&["y"]);
    for c in &countries {
        for year in 1960..=2017 {
            b.push_row(c.as_str(), year, vec![Some(0.0)]).unwrap();
        }
    }
    let panel = b.build().unwrap();
    let set = build_dummies(&events, &panel, PercentileRule::Linear).unwrap();
    assert_eq!(set.shock_count(), 294);
    assert!(set.unresolved.is_empty());
    let d = set.attach(&panel).unwrap();
    let total: f64 = d.column("D").unwrap().iter().flatten().sum();
    assert_eq!(total, 294.0);
    let split: f64 = ["D_high", "D_med", "D_low"]
        .iter()
        .map(|c| d.column(c).unwrap().iter().flatten().sum::<f64>())
        .sum();
    assert_eq!(split, 294.0);
}

fn event_with(mortality: &[f64]) -> EventList {
    let entities: Vec<String> = (0..mortality.len()).map(|i| format!("c{i:02}")).collect();
    let list = EventList::new(vec![Event {
        name: "ev".into(),
        year: 2000,
        entities: entities.clone(),
    }])
    .unwrap();
    list.with_mortality(entities.into_iter().zip(mortality).map(|(e, m)| ("ev".to_string(), e, *m)))
        .unwrap()
}

proptest! {
    #[test]
    fn terciles_partition_and_order(m in prop::collection::vec(0.0..100.0f64, 3..40)) {
        let classes = severity_terciles(&event_with(&m), PercentileRule::Linear);
        prop_assert_eq!(classes.classes.len(), m.len());
        let of = |i: usize| classes.classes[&("ev".to_string(), format!("c{i:02}"))];
        for i in 0..m.len() {
            for j in 0..m.len() {
                if m[i] < m[j] {
                    prop_assert!(of(i) <= of(j), "{} < {} but classes {:?} > {:?}", m[i], m[j], of(i), of(j));
                }
            }
        }
    }

    #[test]
    fn raising_a_high_entity_keeps_it_high(m in prop::collection::vec(0.0..100.0f64, 3..30), bump in 0.0..50.0f64) {
        let classes = severity_terciles(&event_with(&m), PercentileRule::Linear);
        let top = (0..m.len()).max_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap();
        let key = ("ev".to_string(), format!("c{top:02}"));
        prop_assume!(classes.classes[&key] == Severity::High);
        let mut raised = m.clone();
        raised[top] += bump;
        let again = severity_terciles(&event_with(&raised), PercentileRule::Linear);
        prop_assert_eq!(again.classes[&key], Severity::High);
    }

    #[test]
    fn transition_is_symmetric_and_decreasing(z in -40.0..40.0f64, dz in 0.001..5.0f64, sigma in 0.05..10.0f64) {
        let f = smooth_transition(z, sigma);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f + smooth_transition(-z, sigma) - 1.0).abs() < 1e-12);
        prop_assert!(smooth_transition(z + dz, sigma) <= f);
    }
}
