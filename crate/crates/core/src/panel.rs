//! Long-format entity × period panel and the variable transforms used to
//! build local-projection regressions.
//!
//! A [`Panel`] is immutable: every transform returns a new panel that shares
//! untouched columns with its parent. Cells are `Option<f64>`; `None` is a
//! missing value and every stored `Some` is finite.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};

pub type Cell = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    /// Index into [`Panel::entities`].
    pub entity: usize,
    pub period: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    entities: Arc<Vec<String>>,
    periods: Arc<Vec<i64>>,
    keys: Arc<Vec<RowKey>>,
    lookup: Arc<HashMap<RowKey, usize>>,
    columns: IndexMap<String, Arc<Vec<Cell>>>,
    log_missing: BTreeMap<String, usize>,
}

/// Accumulates rows in arbitrary order; [`PanelBuilder::build`] sorts them by
/// (entity, period) and validates the panel invariants.
#[derive(Debug, Default)]
pub struct PanelBuilder {
    names: Vec<String>,
    rows: Vec<(String, i64, Vec<Cell>)>,
}

impl PanelBuilder {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            names: columns.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entity: impl Into<String>, period: i64, values: Vec<Cell>) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::InvalidPanel(format!(
                "row has {} values but {} columns were declared",
                values.len(),
                self.names.len()
            )));
        }
        self.rows.push((entity.into(), period, values));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn build(self) -> Result<Panel> {
        let PanelBuilder { names, mut rows } = self;
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::ColumnCollision(name.clone()));
            }
        }
        rows.sort_by(|a, b| (a.0.as_str(), a.1).cmp(&(b.0.as_str(), b.1)));
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::InvalidPanel(format!(
                    "duplicate key ({}, {})",
                    pair[0].0, pair[0].1
                )));
            }
        }

        let mut entities: Vec<String> = Vec::new();
        let mut keys = Vec::with_capacity(rows.len());
        let mut periods: Vec<i64> = Vec::new();
        let mut data: Vec<Vec<Cell>> = vec![Vec::with_capacity(rows.len()); names.len()];
        for (entity, period, values) in rows {
            if entities.last() != Some(&entity) {
                entities.push(entity);
            }
            keys.push(RowKey {
                entity: entities.len() - 1,
                period,
            });
            periods.push(period);
            for (col, v) in data.iter_mut().zip(values) {
                col.push(v);
            }
        }
        periods.sort_unstable();
        periods.dedup();

        let lookup = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut panel = Panel {
            entities: Arc::new(entities),
            periods: Arc::new(periods),
            keys: Arc::new(keys),
            lookup: Arc::new(lookup),
            columns: IndexMap::new(),
            log_missing: BTreeMap::new(),
        };
        for (name, values) in names.into_iter().zip(data) {
            panel = panel.with_column(name, values)?;
        }
        Ok(panel)
    }
}

/// How a source column is turned into a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Level,
    Log,
    /// `log(source / population)`; the population column name travels with
    /// the variable spec.
    PerCapitaLog,
    Standardized,
}

impl std::str::FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "level" => Ok(Transform::Level),
            "log" => Ok(Transform::Log),
            "per-capita-log" => Ok(Transform::PerCapitaLog),
            "standardized" => Ok(Transform::Standardized),
            other => Err(Error::Config(format!(
                "unknown transform `{other}` (expected level, log, per-capita-log or standardized)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub transform: Transform,
    pub source: String,
    /// Divisor column for [`Transform::PerCapitaLog`].
    pub population: Option<String>,
}

impl VariableSpec {
    /// A variable read as-is from the column of the same name.
    pub fn level(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            source: name.clone(),
            name,
            transform: Transform::Level,
            population: None,
        }
    }

    pub fn log(name: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            transform: Transform::Log,
            source: source.into(),
            population: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Standardization {
    /// Mean and standard deviation over every non-missing entity-period.
    #[default]
    Pooled,
    PerEntity,
}

impl std::str::FromStr for Standardization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Standardization::Pooled),
            "per-entity" => Ok(Standardization::PerEntity),
            other => Err(Error::Config(format!("unknown standardization `{other}` (expected pooled or per-entity)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemeanOptions {
    pub entity_fe: bool,
    pub time_fe: bool,
    /// Convergence threshold on the largest cell change in one sweep,
    /// relative to `max(1, max |x|)` of the column being demeaned.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for DemeanOptions {
    fn default() -> Self {
        Self {
            entity_fe: true,
            time_fe: true,
            tolerance: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DemeanReport {
    /// Largest sweep count over the demeaned columns.
    pub sweeps: usize,
    /// Largest final-sweep change over the demeaned columns.
    pub last_delta: f64,
}

/// Dense fixed-effect group labels for a set of observations.
#[derive(Debug, Clone)]
pub struct FeGroups {
    pub entity: Vec<usize>,
    pub n_entities: usize,
    pub period: Vec<usize>,
    pub n_periods: usize,
}

impl FeGroups {
    /// Relabels arbitrary entity ids and periods to dense `0..n` indices
    /// (in order of first appearance after sorting).
    pub fn from_labels(entity: &[usize], period: &[i64]) -> Self {
        let (entity, n_entities) = densify(entity);
        let (period, n_periods) = densify(period);
        Self {
            entity,
            n_entities,
            period,
            n_periods,
        }
    }
}

fn densify<T: Ord + Copy + std::hash::Hash>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<T> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let index: HashMap<T, usize> = distinct.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    (labels.iter().map(|v| index[v]).collect(), distinct.len())
}

/// Removes entity and/or period means from each column by alternating
/// projections. Exact after one pass when only one effect is absorbed or
/// the sample is balanced; otherwise converges linearly.
pub fn demean_columns(groups: &FeGroups, columns: &mut [Vec<f64>], opts: &DemeanOptions) -> Result<DemeanReport> {
    let mut report = DemeanReport::default();
    if !opts.entity_fe && !opts.time_fe {
        return Ok(report);
    }
    let n = groups.entity.len();
    let mut entity_count = vec![0.0; groups.n_entities];
    let mut period_count = vec![0.0; groups.n_periods];
    for (&e, &t) in groups.entity.iter().zip(&groups.period) {
        entity_count[e] += 1.0;
        period_count[t] += 1.0;
    }
    let single_pass = !(opts.entity_fe && opts.time_fe);

    let mut entity_mean = vec![0.0; groups.n_entities];
    let mut period_mean = vec![0.0; groups.n_periods];
    for col in columns.iter_mut() {
        debug_assert_eq!(col.len(), n);
        let scale = col.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let threshold = opts.tolerance * scale;
        let mut sweeps = 0;
        let mut delta;
        loop {
            sweeps += 1;
            entity_mean.iter_mut().for_each(|m| *m = 0.0);
            period_mean.iter_mut().for_each(|m| *m = 0.0);
            if opts.entity_fe {
                group_means(col, &groups.entity, &entity_count, &mut entity_mean);
                for (v, &e) in col.iter_mut().zip(&groups.entity) {
                    *v -= entity_mean[e];
                }
            }
            if opts.time_fe {
                group_means(col, &groups.period, &period_count, &mut period_mean);
                for (v, &t) in col.iter_mut().zip(&groups.period) {
                    *v -= period_mean[t];
                }
            }
            delta = groups
                .entity
                .iter()
                .zip(&groups.period)
                .map(|(&e, &t)| (entity_mean[e] + period_mean[t]).abs())
                .fold(0.0, f64::max);
            if single_pass || delta < threshold {
                break;
            }
            if sweeps >= opts.max_sweeps {
                return Err(Error::NoConvergence {
                    sweeps,
                    last_delta: delta,
                });
            }
        }
        report.sweeps = report.sweeps.max(sweeps);
        report.last_delta = report.last_delta.max(delta);
    }
    Ok(report)
}

fn group_means(values: &[f64], group: &[usize], count: &[f64], out: &mut [f64]) {
    for (v, &g) in values.iter().zip(group) {
        out[g] += v;
    }
    for (m, c) in out.iter_mut().zip(count) {
        if *c > 0.0 {
            *m /= c;
        }
    }
}

impl Panel {
    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn entity_name(&self, key: RowKey) -> &str {
        &self.entities[key.entity]
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entities.binary_search_by(|e| e.as_str().cmp(name)).ok()
    }

    pub fn row(&self, entity: &str, period: i64) -> Option<usize> {
        let entity = self.entity_index(entity)?;
        self.lookup.get(&RowKey { entity, period }).copied()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[Cell]> {
        self.columns
            .get(name)
            .map(|c| c.as_slice())
            .ok_or_else(|| Error::MissingVariable(name.to_string()))
    }

    pub fn value(&self, entity: &str, period: i64, var: &str) -> Result<Cell> {
        let col = self.column(var)?;
        Ok(self.row(entity, period).and_then(|r| col[r]))
    }

    /// Cells set to missing by log transforms, keyed by output column.
    pub fn log_missing(&self) -> &BTreeMap<String, usize> {
        &self.log_missing
    }

    /// Number of interior periods absent for each entity that has any.
    pub fn gaps(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.keys.len() {
            let entity = self.keys[start].entity;
            let mut end = start;
            while end < self.keys.len() && self.keys[end].entity == entity {
                end += 1;
            }
            let span = (self.keys[end - 1].period - self.keys[start].period + 1) as usize;
            let missing = span - (end - start);
            if missing > 0 {
                out.push((self.entities[entity].clone(), missing));
            }
            start = end;
        }
        out
    }

    /// Adds or replaces a column whose values follow the panel's row order.
    pub fn with_column(&self, name: impl Into<String>, values: Vec<Cell>) -> Result<Panel> {
        let name = name.into();
        if values.len() != self.n_rows() {
            return Err(Error::InvalidPanel(format!(
                "column `{name}` has {} cells, panel has {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        if let Some(bad) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPanel(format!("column `{name}` contains non-finite value {bad}")));
        }
        let mut out = self.clone();
        out.columns.insert(name, Arc::new(values));
        Ok(out)
    }

    pub fn without_column(&self, name: &str) -> Panel {
        let mut out = self.clone();
        out.columns.shift_remove(name);
        out
    }

    /// Builds `out` cellwise from `inputs`. Missing if any input is missing or
    /// `f` returns a non-finite value.
    pub fn derive(&self, out: &str, inputs: &[&str], f: impl Fn(&[f64]) -> f64) -> Result<Panel> {
        let cols = inputs.iter().map(|n| self.column(n)).collect::<Result<Vec<_>>>()?;
        let mut args = vec![0.0; cols.len()];
        let values = (0..self.n_rows())
            .map(|r| {
                for (a, c) in args.iter_mut().zip(&cols) {
                    *a = c[r]?;
                }
                Some(f(&args)).filter(|v| v.is_finite())
            })
            .collect();
        self.with_column(out, values)
    }

    /// Value of `var` at (entity, t + offset) for every row.
    fn shifted(&self, var: &str, offset: i64) -> Result<Vec<Cell>> {
        let col = self.column(var)?;
        Ok(self
            .keys
            .iter()
            .map(|k| {
                let target = RowKey {
                    entity: k.entity,
                    period: k.period + offset,
                };
                self.lookup.get(&target).and_then(|&r| col[r])
            })
            .collect())
    }

    /// `var_lag_j`: value at (i, t − j).
    pub fn add_lag(&self, var: &str, j: usize) -> Result<Panel> {
        if j == 0 {
            return Err(Error::InvalidSpec("lag order must be at least 1".into()));
        }
        let values = self.shifted(var, -(j as i64))?;
        self.with_column(lag_name(var, j), values)
    }

    /// `var_lead_j`: value at (i, t + j).
    pub fn add_lead(&self, var: &str, j: usize) -> Result<Panel> {
        if j == 0 {
            return Err(Error::InvalidSpec("lead order must be at least 1".into()));
        }
        let values = self.shifted(var, j as i64)?;
        self.with_column(format!("{var}_lead_{j}"), values)
    }

    /// `out` = var(i, t + ahead) − var(i, t − behind).
    pub fn long_difference(&self, var: &str, ahead: usize, behind: usize, out: &str) -> Result<Panel> {
        let front = self.shifted(var, ahead as i64)?;
        let back = self.shifted(var, -(behind as i64))?;
        let values = front
            .into_iter()
            .zip(back)
            .map(|(a, b)| Some(a? - b?))
            .collect();
        self.with_column(out, values)
    }

    /// `var_h_k` = var(i, t + k) − var(i, t).
    pub fn horizon_delta(&self, var: &str, k: usize) -> Result<Panel> {
        self.long_difference(var, k, 0, &format!("{var}_h_{k}"))
    }

    /// `d_var` = var(i, t) − var(i, t − 1).
    pub fn first_difference(&self, var: &str) -> Result<Panel> {
        self.long_difference(var, 0, 1, &diff_name(var))
    }

    /// Natural log into `out`; non-positive inputs become missing and are counted.
    pub fn log(&self, var: &str, out: &str) -> Result<Panel> {
        let col = self.column(var)?;
        let mut dropped = 0;
        let values = col
            .iter()
            .map(|c| match c {
                Some(v) if *v > 0.0 => Some(v.ln()),
                Some(_) => {
                    dropped += 1;
                    None
                }
                None => None,
            })
            .collect();
        let mut panel = self.with_column(out, values)?;
        panel.log_missing.insert(out.to_string(), dropped);
        Ok(panel)
    }

    /// `log(var / population)` into `out`.
    pub fn per_capita_log(&self, var: &str, population: &str, out: &str) -> Result<Panel> {
        let num = self.column(var)?;
        let den = self.column(population)?;
        let mut dropped = 0;
        let values = num
            .iter()
            .zip(den)
            .map(|(a, b)| {
                let (a, b) = ((*a)?, (*b)?);
                if a > 0.0 && b > 0.0 {
                    Some((a / b).ln()).filter(|v| v.is_finite())
                } else {
                    dropped += 1;
                    None
                }
            })
            .collect();
        let mut panel = self.with_column(out, values)?;
        panel.log_missing.insert(out.to_string(), dropped);
        Ok(panel)
    }

    /// Multiplies every non-missing cell of `var` by `factor`, in place.
    pub fn scale(&self, var: &str, factor: f64) -> Result<Panel> {
        let values = self.column(var)?.iter().map(|c| c.map(|v| v * factor)).collect();
        self.with_column(var, values)
    }

    /// `var_std`: pooled zero mean, unit sample standard deviation.
    pub fn standardize(&self, var: &str) -> Result<Panel> {
        self.standardize_by(var, Standardization::Pooled)
    }

    pub fn standardize_by(&self, var: &str, how: Standardization) -> Result<Panel> {
        let col = self.column(var)?;
        let out = standardized_name(var);
        match how {
            Standardization::Pooled => {
                let (mean, sd) = moments(col.iter().flatten().copied()).ok_or_else(|| Error::DegenerateVariable {
                    name: var.to_string(),
                    reason: "fewer than 2 values or zero variance".into(),
                })?;
                let values = col.iter().map(|c| c.map(|v| (v - mean) / sd)).collect();
                self.with_column(out, values)
            }
            Standardization::PerEntity => {
                let mut stats: HashMap<usize, (f64, f64)> = HashMap::new();
                for e in 0..self.entities.len() {
                    let values = self.keys.iter().zip(col).filter(|(k, _)| k.entity == e).filter_map(|(_, c)| *c);
                    if let Some(m) = moments(values) {
                        stats.insert(e, m);
                    }
                }
                if stats.is_empty() {
                    return Err(Error::DegenerateVariable {
                        name: var.to_string(),
                        reason: "no entity has 2 or more distinct values".into(),
                    });
                }
                let values = self
                    .keys
                    .iter()
                    .zip(col)
                    .map(|(k, c)| {
                        let (mean, sd) = stats.get(&k.entity)?;
                        c.map(|v| (v - mean) / sd)
                    })
                    .collect();
                self.with_column(out, values)
            }
        }
    }

    /// Applies a [`VariableSpec`], writing the result under `spec.name`.
    pub fn apply_variable(&self, spec: &VariableSpec) -> Result<Panel> {
        match spec.transform {
            Transform::Level => {
                if spec.name == spec.source {
                    self.column(&spec.source)?;
                    Ok(self.clone())
                } else {
                    let values = self.column(&spec.source)?.to_vec();
                    self.with_column(spec.name.clone(), values)
                }
            }
            Transform::Log => self.log(&spec.source, &spec.name),
            Transform::PerCapitaLog => {
                let pop = spec.population.as_deref().ok_or_else(|| {
                    Error::InvalidSpec(format!("per-capita-log variable `{}` needs a population column", spec.name))
                })?;
                self.per_capita_log(&spec.source, pop, &spec.name)
            }
            Transform::Standardized => {
                let std = self.standardize(&spec.source)?;
                let values = std.column(&standardized_name(&spec.source))?.to_vec();
                self.with_column(spec.name.clone(), values)
            }
        }
    }

    /// Two-way demeaning of `vars` over the rows where all of them are present.
    /// Rows outside that set become missing in the returned columns.
    pub fn two_way_demean(&self, vars: &[&str], opts: &DemeanOptions) -> Result<(Panel, DemeanReport)> {
        let cols = vars.iter().map(|v| self.column(v)).collect::<Result<Vec<_>>>()?;
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&r| cols.iter().all(|c| c[r].is_some())).collect();
        let entity: Vec<usize> = rows.iter().map(|&r| self.keys[r].entity).collect();
        let period: Vec<i64> = rows.iter().map(|&r| self.keys[r].period).collect();
        let groups = FeGroups::from_labels(&entity, &period);
        let mut data: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| rows.iter().map(|&r| c[r].unwrap_or_default()).collect())
            .collect();
        let report = demean_columns(&groups, &mut data, opts)?;
        let mut out = self.clone();
        for (name, values) in vars.iter().zip(data) {
            let mut full = vec![None; self.n_rows()];
            for (&r, v) in rows.iter().zip(values) {
                full[r] = Some(v);
            }
            out = out.with_column(*name, full)?;
        }
        Ok((out, report))
    }
}

pub fn lag_name(var: &str, j: usize) -> String {
    format!("{var}_lag_{j}")
}

pub fn diff_name(var: &str) -> String {
    format!("d_{var}")
}

pub fn standardized_name(var: &str) -> String {
    format!("{var}_std")
}

/// Mean and sample standard deviation; `None` for fewer than two values or a
/// zero (or numerically negligible) variance.
fn moments(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n < 2 {
        return None;
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    let scale = mean.abs().max(f64::MIN_POSITIVE);
    (sd > 1e-14 * scale && sd > 0.0).then_some((mean, sd))
}
