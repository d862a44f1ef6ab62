use std::collections::BTreeMap;

use super::strategy::{Effect, Specification};
use super::{dy_lag_names, shock_lag_names, LpSpec};
use crate::error::{Error, Result};
use crate::estimator::{linear_combination, RegressionResult};
use crate::panel::Panel;

/// Entity membership in a country group (e.g. OECD).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub membership: BTreeMap<String, bool>,
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, membership: impl IntoIterator<Item = (String, bool)>) -> Self {
        Self {
            name: name.into(),
            membership: membership.into_iter().collect(),
        }
    }

    /// Fails if any panel entity has no membership entry.
    pub fn check_covers(&self, panel: &Panel) -> Result<()> {
        let missing: Vec<&str> = panel
            .entities()
            .iter()
            .filter(|e| !self.membership.contains_key(*e))
            .map(String::as_str)
            .collect();
        if missing.is_empty() {
            return Ok(());
        }
        let shown = missing.iter().take(5).copied().collect::<Vec<_>>().join(", ");
        Err(Error::InvalidSpec(format!(
            "group `{}` has no membership for {} entities ({shown}{})",
            self.name,
            missing.len(),
            if missing.len() > 5 { ", ..." } else { "" }
        )))
    }
}

/// How the group main effect enters the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupMode {
    /// Keep G in the design; under entity effects the rank check drops it
    /// unless membership varies over time.
    #[default]
    Estimate,
    /// Leave G out and keep only the interaction.
    ReportOnly,
}

impl std::str::FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimate" => Ok(GroupMode::Estimate),
            "report-only" => Ok(GroupMode::ReportOnly),
            other => Err(Error::Config(format!("unknown group mode `{other}` (expected estimate or report-only)"))),
        }
    }
}

/// Baseline plus the group dummy and its interaction with the shock; reports
/// the marginal effect of the shock outside (G = 0) and inside (G = 1) the group.
#[derive(Debug, Clone)]
pub struct Interaction {
    group: GroupSpec,
    mode: GroupMode,
}

impl Interaction {
    pub fn new(group: GroupSpec, mode: GroupMode) -> Self {
        Self { group, mode }
    }

    pub fn group_column(&self) -> &str {
        &self.group.name
    }

    pub fn interaction_column(&self, lp: &LpSpec) -> String {
        format!("{}_x_{}", lp.shock, self.group.name)
    }

    pub fn effect_names(&self) -> [String; 2] {
        [format!("ame_{}_0", self.group.name), format!("ame_{}_1", self.group.name)]
    }
}

impl Specification for Interaction {
    fn name(&self) -> &'static str {
        "interaction"
    }

    fn prepare(&self, panel: &Panel, lp: &LpSpec) -> Result<Panel> {
        self.group.check_covers(panel)?;
        let g = self.group_column();
        if panel.has_column(g) {
            return Err(Error::ColumnCollision(g.to_string()));
        }
        let values = panel
            .keys()
            .iter()
            .map(|k| Some(f64::from(u8::from(self.group.membership[panel.entity_name(*k)]))))
            .collect();
        panel
            .with_column(g, values)?
            .derive(&self.interaction_column(lp), &[lp.shock.as_str(), g], |v| v[0] * v[1])
    }

    fn regressors(&self, lp: &LpSpec) -> Vec<String> {
        let mut cols = vec![lp.shock.clone()];
        if self.mode == GroupMode::Estimate {
            cols.push(self.group.name.clone());
        }
        cols.push(self.interaction_column(lp));
        cols.extend(shock_lag_names(lp));
        cols.extend(lp.controls.iter().map(|c| c.name.clone()));
        cols.extend(dy_lag_names(lp));
        cols
    }

    fn effects(&self, fit: &RegressionResult, lp: &LpSpec) -> Result<Vec<Effect>> {
        let inter = self.interaction_column(lp);
        let [outside, inside] = self.effect_names();
        Ok(vec![
            Effect {
                name: outside,
                interval: linear_combination(fit, &[(&lp.shock, 1.0)], &lp.inference)?,
            },
            Effect {
                name: inside,
                interval: linear_combination(fit, &[(&lp.shock, 1.0), (&inter, 1.0)], &lp.inference)?,
            },
        ])
    }
}
