use super::strategy::{Effect, Specification};
use super::{dy_lag_names, shock_lag_names, LpSpec};
use crate::error::Result;
use crate::estimator::{coefficient_interval, RegressionResult};

/// Shock dummy, its lags, controls and lagged changes of the dependent
/// variable; reports the shock coefficient.
#[derive(Debug, Clone, Copy, Default)]
pub struct Baseline;

impl Specification for Baseline {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn regressors(&self, lp: &LpSpec) -> Vec<String> {
        let mut cols = vec![lp.shock.clone()];
        cols.extend(shock_lag_names(lp));
        cols.extend(lp.controls.iter().map(|c| c.name.clone()));
        cols.extend(dy_lag_names(lp));
        cols
    }

    fn effects(&self, fit: &RegressionResult, lp: &LpSpec) -> Result<Vec<Effect>> {
        Ok(vec![Effect {
            name: lp.shock.clone(),
            interval: coefficient_interval(fit, &lp.shock, &lp.inference)?,
        }])
    }
}
