//! Local-projection engine: one fixed-effects regression per horizon k,
//! assembled by a pluggable [`Specification`], collected into an [`Irf`].

mod baseline;
mod interaction;
pub mod strategy;
mod transition;

use std::collections::BTreeMap;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use baseline::Baseline;
pub use interaction::{GroupMode, GroupSpec, Interaction};
pub use strategy::{Effect, Registry, Specification, StrategyOptions};
pub use transition::{smooth_transition, Transition, TransitionState, DEFAULT_SIGMA, EFFECT_HIGH, EFFECT_LOW, TRANSITION};

use crate::error::{Error, Result};
use crate::estimator::{ols_fit, DesignMatrix, InferenceOptions, RegressionResult};
use crate::events::{EventSet, SHOCK};
use crate::panel::{demean_columns, diff_name, lag_name, DemeanOptions, FeGroups, Panel, VariableSpec};

/// Where the cumulative response is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseBase {
    /// y(t+k) − y(t−1): the shock-year change is visible at k = 0.
    #[default]
    PreShock,
    /// y(t+k) − y(t): identically zero at k = 0.
    Contemporaneous,
}

impl std::str::FromStr for ResponseBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre-shock" => Ok(ResponseBase::PreShock),
            "contemporaneous" => Ok(ResponseBase::Contemporaneous),
            other => Err(Error::Config(format!(
                "unknown response base `{other}` (expected pre-shock or contemporaneous)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R2Mode {
    /// After fixed-effect absorption.
    #[default]
    Within,
    /// Against the response before absorption.
    Overall,
}

impl std::str::FromStr for R2Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "within" => Ok(R2Mode::Within),
            "overall" => Ok(R2Mode::Overall),
            other => Err(Error::Config(format!("unknown R² mode `{other}` (expected within or overall)"))),
        }
    }
}

/// Everything shared by the three specifications.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSpec {
    pub dependent: VariableSpec,
    /// Largest horizon H; horizons 0..=H are estimated.
    pub horizons: usize,
    /// Number m of lagged Δy terms.
    pub lag_order: usize,
    /// Lags of the shock dummy (and, in the transition model, of growth and F).
    pub dummy_lags: usize,
    /// Shock column: `D` or one of the severity dummies.
    pub shock: String,
    pub controls: Vec<VariableSpec>,
    pub entity_fe: bool,
    pub time_fe: bool,
    pub response_base: ResponseBase,
    pub inference: InferenceOptions,
    pub r2: R2Mode,
    /// Demeaning tolerance and sweep cap; the FE switches above take precedence.
    pub demean: DemeanOptions,
}

impl LpSpec {
    /// Defaults: H = 5, m = 2, two shock lags, GDP per capita and trade
    /// controls, entity and time effects, 95% t(G − 1) intervals.
    pub fn new(dependent: VariableSpec) -> Self {
        Self {
            dependent,
            horizons: 5,
            lag_order: 2,
            dummy_lags: 2,
            shock: SHOCK.to_string(),
            controls: vec![VariableSpec::level("gdp_pc"), VariableSpec::level("trade")],
            entity_fe: true,
            time_fe: true,
            response_base: ResponseBase::default(),
            inference: InferenceOptions::default(),
            r2: R2Mode::default(),
            demean: DemeanOptions::default(),
        }
    }

    pub fn with_controls(mut self, controls: Vec<VariableSpec>) -> Self {
        self.controls = controls;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag_order == 0 {
            return Err(Error::InvalidSpec("lag order m must be at least 1".into()));
        }
        if !(self.inference.level > 0.0 && self.inference.level < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "confidence level {} outside (0, 1)",
                self.inference.level
            )));
        }
        if self.demean.tolerance.is_nan() || self.demean.tolerance <= 0.0 || self.demean.max_sweeps == 0 {
            return Err(Error::InvalidSpec("demeaning tolerance and sweep cap must be positive".into()));
        }
        Ok(())
    }

    pub fn response_name(&self, k: usize) -> String {
        let y = &self.dependent.name;
        match self.response_base {
            ResponseBase::PreShock => format!("{y}_lp_{k}"),
            ResponseBase::Contemporaneous => format!("{y}_h_{k}"),
        }
    }

    fn demean_options(&self) -> DemeanOptions {
        DemeanOptions {
            entity_fe: self.entity_fe,
            time_fe: self.time_fe,
            ..self.demean
        }
    }
}

pub(crate) fn shock_lag_names(lp: &LpSpec) -> Vec<String> {
    (1..=lp.dummy_lags).map(|j| lag_name(&lp.shock, j)).collect()
}

pub(crate) fn dy_lag_names(lp: &LpSpec) -> Vec<String> {
    let dy = diff_name(&lp.dependent.name);
    (1..=lp.lag_order).map(|j| lag_name(&dy, j)).collect()
}

/// Attaches shock dummies and builds the columns every specification uses:
/// dependent variable, controls, responses for 0..=H, shock lags and Δy lags.
pub fn prepare_panel(panel: &Panel, events: &EventSet, lp: &LpSpec) -> Result<Panel> {
    let mut p = events.attach(panel)?.apply_variable(&lp.dependent)?;
    for c in &lp.controls {
        p = p.apply_variable(c)?;
    }
    let y = lp.dependent.name.as_str();
    for k in 0..=lp.horizons {
        p = match lp.response_base {
            ResponseBase::PreShock => p.long_difference(y, k, 1, &lp.response_name(k))?,
            ResponseBase::Contemporaneous => p.horizon_delta(y, k)?,
        };
    }
    for j in 1..=lp.dummy_lags {
        p = p.add_lag(&lp.shock, j)?;
    }
    p = p.first_difference(y)?;
    let dy = diff_name(y);
    for j in 1..=lp.lag_order {
        p = p.add_lag(&dy, j)?;
    }
    Ok(p)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignDiagnostics {
    /// Panel rows dropped by listwise deletion.
    pub rows_dropped: usize,
    /// Missing cells per required variable over all panel rows.
    pub missing: Vec<(String, usize)>,
    pub demean_sweeps: usize,
    pub demean_last_delta: f64,
}

/// Listwise deletion over `response` and `regressors`, then absorption of
/// the requested fixed effects from every column.
pub fn assemble_design(
    panel: &Panel,
    response: &str,
    regressors: &[String],
    demean: &DemeanOptions,
) -> Result<(DesignMatrix, DesignDiagnostics)> {
    let mut names = vec![response.to_string()];
    names.extend(regressors.iter().cloned());
    let cols = names.iter().map(|n| panel.column(n)).collect::<Result<Vec<_>>>()?;
    let missing: Vec<(String, usize)> = names
        .iter()
        .zip(&cols)
        .map(|(n, c)| (n.clone(), c.iter().filter(|v| v.is_none()).count()))
        .collect();
    let rows: Vec<usize> = (0..panel.n_rows()).filter(|&r| cols.iter().all(|c| c[r].is_some())).collect();
    if rows.is_empty() {
        return Err(Error::EmptySample { missing });
    }
    let keys = panel.keys();
    let entities: Vec<usize> = rows.iter().map(|&r| keys[r].entity).collect();
    let periods: Vec<i64> = rows.iter().map(|&r| keys[r].period).collect();
    let mut data: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| rows.iter().map(|&r| c[r].expect("complete row")).collect())
        .collect();

    let raw = &data[0];
    let raw_mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let raw_tss: f64 = raw.iter().map(|v| (v - raw_mean) * (v - raw_mean)).sum();

    let groups = FeGroups::from_labels(&entities, &periods);
    let report = demean_columns(&groups, &mut data, demean)?;

    let response_values = data.remove(0);
    let design = DesignMatrix::new(regressors.to_vec(), data, response_values)?
        .with_panel_index(entities, periods)?;
    let design = DesignMatrix {
        raw_tss: Some(raw_tss),
        ..design
    };
    let diagnostics = DesignDiagnostics {
        rows_dropped: panel.n_rows() - rows.len(),
        missing,
        demean_sweeps: report.sweeps,
        demean_last_delta: report.last_delta,
    };
    Ok((design, diagnostics))
}

/// Design for horizon `k` under any specification.
pub fn build_design(
    panel: &Panel,
    events: &EventSet,
    lp: &LpSpec,
    spec: &dyn Specification,
    k: usize,
) -> Result<DesignMatrix> {
    lp.validate()?;
    let horizon_spec = LpSpec {
        horizons: k,
        ..lp.clone()
    };
    let prepared = spec.prepare(&prepare_panel(panel, events, &horizon_spec)?, lp)?;
    let (design, _) = assemble_design(&prepared, &lp.response_name(k), &spec.regressors(lp), &lp.demean_options())?;
    Ok(design)
}

pub fn build_baseline_design(panel: &Panel, events: &EventSet, lp: &LpSpec, k: usize) -> Result<DesignMatrix> {
    build_design(panel, events, lp, &Baseline, k)
}

pub fn build_interaction_design(
    panel: &Panel,
    events: &EventSet,
    group: &GroupSpec,
    lp: &LpSpec,
    k: usize,
) -> Result<DesignMatrix> {
    build_design(panel, events, lp, &Interaction::new(group.clone(), GroupMode::Estimate), k)
}

pub fn build_transition_design(
    panel: &Panel,
    events: &EventSet,
    state: &TransitionState,
    lp: &LpSpec,
    k: usize,
) -> Result<DesignMatrix> {
    build_design(panel, events, lp, &Transition::from_state(state)?, k)
}

#[derive(Debug, Clone)]
pub struct IrfEntry {
    pub horizon: usize,
    pub effects: Vec<Effect>,
    pub n_obs: usize,
    pub n_entities: usize,
    pub n_periods: usize,
    /// R² under the spec's [`R2Mode`].
    pub r_squared: f64,
    pub fit: RegressionResult,
    pub diagnostics: DesignDiagnostics,
}

impl IrfEntry {
    pub fn effect(&self, name: &str) -> Option<&Effect> {
        self.effects.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunDiagnostics {
    pub shock_cells: usize,
    pub unresolved_event_entities: Vec<(String, String)>,
    pub severity_defaulted: usize,
    pub unclassifiable_events: Vec<String>,
    /// Cells set missing by log transforms, per variable.
    pub log_missing: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct Irf {
    pub specification: String,
    /// SHA-256 over the spec and specification parameters.
    pub spec_hash: String,
    pub entries: Vec<IrfEntry>,
    pub diagnostics: RunDiagnostics,
}

/// Runs horizons 0..=H (in parallel) and collects the responses. Output is
/// independent of scheduling; the first failing horizon aborts the run.
pub fn estimate_irf(panel: &Panel, events: &EventSet, lp: &LpSpec, spec: &dyn Specification) -> Result<Irf> {
    lp.validate()?;
    let prepared = spec.prepare(&prepare_panel(panel, events, lp)?, lp)?;
    let regressors = spec.regressors(lp);
    let demean = lp.demean_options();

    let outcomes: Vec<Result<IrfEntry>> = (0..=lp.horizons)
        .into_par_iter()
        .map(|k| {
            let (design, diagnostics) = assemble_design(&prepared, &lp.response_name(k), &regressors, &demean)?;
            let fit = ols_fit(&design)?;
            let effects = spec.effects(&fit, lp)?;
            let r_squared = match lp.r2 {
                R2Mode::Within => fit.r_squared,
                R2Mode::Overall => fit.r_squared_overall.unwrap_or(fit.r_squared),
            };
            Ok(IrfEntry {
                horizon: k,
                effects,
                n_obs: fit.n_obs,
                n_entities: fit.n_entities,
                n_periods: fit.n_periods,
                r_squared,
                fit,
                diagnostics,
            })
        })
        .collect();
    let mut entries = Vec::with_capacity(outcomes.len());
    for (k, outcome) in outcomes.into_iter().enumerate() {
        entries.push(outcome.map_err(|e| Error::Horizon {
            horizon: k,
            source: Box::new(e),
        })?);
    }

    let diagnostics = RunDiagnostics {
        shock_cells: events.shock_count(),
        unresolved_event_entities: events.unresolved.clone(),
        severity_defaulted: events.severity_classes.defaulted.len(),
        unclassifiable_events: events.severity_classes.unclassifiable.clone(),
        log_missing: prepared.log_missing().clone(),
    };
    Ok(Irf {
        specification: spec.name().to_string(),
        spec_hash: spec_hash(lp, spec),
        entries,
        diagnostics,
    })
}

fn spec_hash(lp: &LpSpec, spec: &dyn Specification) -> String {
    let digest = Sha256::digest(format!("{lp:?}|{spec:?}").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Converts a proportional effect on a share into percentage points, given
/// the mean share in percent.
pub fn pp_conversion(percent_effect: f64, mean_share: f64) -> f64 {
    percent_effect * mean_share
}
