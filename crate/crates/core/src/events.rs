//! Pandemic shock dummies and within-event severity terciles.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::panel::Panel;

pub const SHOCK: &str = "D";
pub const SHOCK_HIGH: &str = "D_high";
pub const SHOCK_MEDIUM: &str = "D_med";
pub const SHOCK_LOW: &str = "D_low";

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub name: String,
    /// Announcement year; the shock cell is (entity, year).
    pub year: i64,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventList {
    events: Vec<Event>,
    /// Deaths per capita keyed by (event name, entity).
    mortality: BTreeMap<(String, String), f64>,
}

impl EventList {
    pub fn new(events: Vec<Event>) -> Result<Self> {
        for event in &events {
            let mut seen = BTreeSet::new();
            for e in &event.entities {
                if !seen.insert(e) {
                    return Err(Error::InvalidSpec(format!("entity {e} listed twice in event {}", event.name)));
                }
            }
        }
        Ok(Self {
            events,
            mortality: BTreeMap::new(),
        })
    }

    /// Attaches mortality figures. Each must be nonnegative and belong to an
    /// entity the event affected.
    pub fn with_mortality(mut self, mortality: impl IntoIterator<Item = (String, String, f64)>) -> Result<Self> {
        for (event, entity, value) in mortality {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidSpec(format!("mortality for ({event}, {entity}) must be finite and >= 0")));
            }
            let affected = self
                .events
                .iter()
                .any(|e| e.name == event && e.entities.contains(&entity));
            if !affected {
                return Err(Error::InvalidSpec(format!(
                    "mortality given for ({event}, {entity}) but that entity is not affected by the event"
                )));
            }
            self.mortality.insert((event, entity), value);
        }
        Ok(self)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn mortality(&self, event: &str, entity: &str) -> Option<f64> {
        self.mortality.get(&(event.to_string(), entity.to_string())).copied()
    }

    /// `(event, entity, mortality)` in key order.
    pub fn mortality_entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.mortality.iter().map(|((ev, en), v)| (ev.as_str(), en.as_str(), *v))
    }

    pub fn has_mortality(&self) -> bool {
        !self.mortality.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Low,
    Medium,
    High,
}

/// How percentiles are read off the sorted sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PercentileRule {
    /// Linear interpolation between order statistics at (n − 1)p.
    #[default]
    Linear,
    /// Smallest value with at least a fraction p of the sample at or below it.
    NearestRank,
}

impl std::str::FromStr for PercentileRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(PercentileRule::Linear),
            "nearest-rank" => Ok(PercentileRule::NearestRank),
            other => Err(Error::Config(format!(
                "unknown percentile rule `{other}` (expected linear or nearest-rank)"
            ))),
        }
    }
}

/// Percentile `p ∈ [0, 1]` of an ascending, non-empty sample.
pub fn percentile(sorted: &[f64], p: f64, rule: PercentileRule) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "percentile of an empty sample");
    match rule {
        PercentileRule::Linear => {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
        PercentileRule::NearestRank => {
            let rank = (p * n as f64).ceil().max(1.0) as usize;
            sorted[rank.min(n) - 1]
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeverityClasses {
    pub classes: BTreeMap<(String, String), Severity>,
    /// Events with fewer than three mortality figures.
    pub unclassifiable: Vec<String>,
    /// Affected (event, entity) pairs assigned medium for lack of data.
    pub defaulted: Vec<(String, String)>,
}

/// Classifies each affected entity within its event: high above the 70th
/// percentile of the event's mortality, low below the 30th, medium otherwise.
pub fn severity_terciles(events: &EventList, rule: PercentileRule) -> SeverityClasses {
    let mut out = SeverityClasses::default();
    for event in &events.events {
        let known: Vec<(&String, f64)> = event
            .entities
            .iter()
            .filter_map(|e| events.mortality(&event.name, e).map(|m| (e, m)))
            .collect();
        if known.len() < 3 {
            out.unclassifiable.push(event.name.clone());
            for e in &event.entities {
                out.classes.insert((event.name.clone(), e.clone()), Severity::Medium);
                out.defaulted.push((event.name.clone(), e.clone()));
            }
            continue;
        }
        let mut sorted: Vec<f64> = known.iter().map(|(_, m)| *m).collect();
        sorted.sort_by(f64::total_cmp);
        let p30 = percentile(&sorted, 0.3, rule);
        let p70 = percentile(&sorted, 0.7, rule);
        for e in &event.entities {
            let class = match events.mortality(&event.name, e) {
                Some(m) if m > p70 => Severity::High,
                Some(m) if m < p30 => Severity::Low,
                Some(_) => Severity::Medium,
                None => {
                    out.defaulted.push((event.name.clone(), e.clone()));
                    Severity::Medium
                }
            };
            out.classes.insert((event.name.clone(), e.clone()), class);
        }
    }
    out
}

/// Shock cells for one panel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventSet {
    shock: BTreeSet<(String, i64)>,
    severity: BTreeMap<(String, i64), Severity>,
    /// (event, entity) pairs whose entity is not in the panel.
    pub unresolved: Vec<(String, String)>,
    pub severity_classes: SeverityClasses,
}

pub fn build_dummies(events: &EventList, panel: &Panel, rule: PercentileRule) -> Result<EventSet> {
    if events.events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let classes = severity_terciles(events, rule);
    let mut set = EventSet::default();
    for event in &events.events {
        for entity in &event.entities {
            if panel.entity_index(entity).is_none() {
                set.unresolved.push((event.name.clone(), entity.clone()));
                continue;
            }
            if panel.row(entity, event.year).is_none() {
                continue;
            }
            let cell = (entity.clone(), event.year);
            set.shock.insert(cell.clone());
            let class = classes.classes[&(event.name.clone(), entity.clone())];
            // Two events in the same cell keep the more severe class.
            let slot = set.severity.entry(cell).or_insert(class);
            *slot = (*slot).max(class);
        }
    }
    set.unresolved.sort();
    set.severity_classes = classes;
    Ok(set)
}

impl EventSet {
    pub fn shock_count(&self) -> usize {
        self.shock.len()
    }

    pub fn is_shock(&self, entity: &str, period: i64) -> bool {
        self.shock.contains(&(entity.to_string(), period))
    }

    pub fn severity(&self, entity: &str, period: i64) -> Option<Severity> {
        self.severity.get(&(entity.to_string(), period)).copied()
    }

    pub fn shock_cells(&self) -> impl Iterator<Item = (&str, i64)> {
        self.shock.iter().map(|(e, t)| (e.as_str(), *t))
    }

    /// Adds 0/1 columns `D`, `D_high`, `D_med`, `D_low` for every panel row.
    pub fn attach(&self, panel: &Panel) -> Result<Panel> {
        let mut cols: [Vec<Option<f64>>; 4] = Default::default();
        for key in panel.keys() {
            let cell = (panel.entity_name(*key).to_string(), key.period);
            let sev = self.severity.get(&cell);
            let flags = [
                self.shock.contains(&cell),
                sev == Some(&Severity::High),
                sev == Some(&Severity::Medium),
                sev == Some(&Severity::Low),
            ];
            for (col, flag) in cols.iter_mut().zip(flags) {
                col.push(Some(if flag { 1.0 } else { 0.0 }));
            }
        }
        let mut out = panel.clone();
        for (name, values) in [SHOCK, SHOCK_HIGH, SHOCK_MEDIUM, SHOCK_LOW].into_iter().zip(cols) {
            out = out.with_column(name, values)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelBuilder;

    fn event(name: &str, year: i64, entities: &[&str]) -> Event {
        Event {
            name: name.into(),
            year,
            entities: entities.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn with_mortality(values: &[f64]) -> EventList {
        let names: Vec<String> = (0..values.len()).map(|i| format!("C{i:02}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        EventList::new(vec![event("E", 2000, &refs)])
            .unwrap()
            .with_mortality(names.iter().zip(values).map(|(n, m)| ("E".to_string(), n.clone(), *m)))
            .unwrap()
    }

    fn class_of(c: &SeverityClasses, i: usize) -> Severity {
        c.classes[&("E".to_string(), format!("C{i:02}"))]
    }

    #[test]
    fn linear_percentiles() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((percentile(&x, 0.3, PercentileRule::Linear) - 3.7).abs() < 1e-12);
        assert!((percentile(&x, 0.7, PercentileRule::Linear) - 7.3).abs() < 1e-12);
        assert_eq!(percentile(&x, 0.3, PercentileRule::NearestRank), 3.0);
        assert_eq!(percentile(&x, 0.7, PercentileRule::NearestRank), 7.0);
    }

    #[test]
    fn terciles_of_one_to_ten() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        let c = severity_terciles(&with_mortality(&values), PercentileRule::Linear);
        let expected = [
            Severity::Low,
            Severity::Low,
            Severity::Low,
            Severity::Medium,
            Severity::Medium,
            Severity::Medium,
            Severity::Medium,
            Severity::High,
            Severity::High,
            Severity::High,
        ];
        for (i, want) in expected.iter().enumerate() {
            assert_eq!(class_of(&c, i), *want, "country {}", i + 1);
        }
    }

    #[test]
    fn equal_mortality_is_all_medium() {
        let c = severity_terciles(&with_mortality(&[2.5; 6]), PercentileRule::Linear);
        assert!((0..6).all(|i| class_of(&c, i) == Severity::Medium));
    }

    #[test]
    fn three_countries() {
        let c = severity_terciles(&with_mortality(&[0.0, 1.0, 2.0]), PercentileRule::Linear);
        assert_eq!(
            [class_of(&c, 0), class_of(&c, 1), class_of(&c, 2)],
            [Severity::Low, Severity::Medium, Severity::High]
        );
    }

    #[test]
    fn too_few_figures_defaults_to_medium() {
        let list = EventList::new(vec![event("E", 2000, &["A", "B", "C"])])
            .unwrap()
            .with_mortality([("E".to_string(), "A".to_string(), 1.0)])
            .unwrap();
        let c = severity_terciles(&list, PercentileRule::Linear);
        assert_eq!(c.unclassifiable, vec!["E".to_string()]);
        assert_eq!(c.defaulted.len(), 3);
    }

    #[test]
    fn mortality_must_belong_to_affected_entity() {
        let list = EventList::new(vec![event("E", 2000, &["A"])]).unwrap();
        assert!(list.clone().with_mortality([("E".into(), "Z".into(), 1.0)]).is_err());
        assert!(list.with_mortality([("E".into(), "A".into(), -1.0)]).is_err());
    }

    fn panel(entities: &[&str], years: std::ops::RangeInclusive<i64>) -> Panel {
        let mut b = PanelBuilder::new::<&str>(&[]);
        for e in entities {
            for t in years.clone() {
                b.push_row(*e, t, vec![]).unwrap();
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn unresolved_entities_are_reported() {
        let list = EventList::new(vec![event("E", 2001, &["A", "ZZZ"])]).unwrap();
        let p = panel(&["A", "B"], 2000..=2002);
        let set = build_dummies(&list, &p, PercentileRule::Linear).unwrap();
        assert_eq!(set.shock_count(), 1);
        assert_eq!(set.unresolved, vec![("E".to_string(), "ZZZ".to_string())]);
        let with = set.attach(&p).unwrap();
        let d: f64 = with.column(SHOCK).unwrap().iter().flatten().sum();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn empty_event_list_is_an_error() {
        let p = panel(&["A"], 2000..=2000);
        assert!(matches!(
            build_dummies(&EventList::default(), &p, PercentileRule::Linear),
            Err(Error::EmptyEvents)
        ));
    }

    #[test]
    fn dummies_ignore_event_order() {
        let a = EventList::new(vec![event("E1", 2000, &["A", "B"]), event("E2", 2001, &["B"])]).unwrap();
        let b = EventList::new(vec![event("E2", 2001, &["B"]), event("E1", 2000, &["B", "A"])]).unwrap();
        let p = panel(&["A", "B"], 2000..=2002);
        let da = build_dummies(&a, &p, PercentileRule::Linear).unwrap();
        let db = build_dummies(&b, &p, PercentileRule::Linear).unwrap();
        assert_eq!(da.attach(&p).unwrap().column(SHOCK).unwrap(), db.attach(&p).unwrap().column(SHOCK).unwrap());
        assert_eq!(da.shock, db.shock);
    }
}
