use super::strategy::{Effect, Specification};
use super::{dy_lag_names, shock_lag_names, LpSpec};
use crate::error::{Error, Result};
use crate::estimator::{coefficient_interval, RegressionResult};
use crate::panel::{lag_name, standardized_name, Cell, Panel, Standardization};

pub const DEFAULT_SIGMA: f64 = 1.5;
pub const TRANSITION: &str = "F";
pub const EFFECT_LOW: &str = "beta_L";
pub const EFFECT_HIGH: &str = "beta_H";

/// Logistic weight exp(−σz) / (1 + exp(−σz)); tends to 1 as z → −∞
/// (recession) and to 0 as z → +∞.
pub fn smooth_transition(z: f64, sigma: f64) -> f64 {
    let a = -sigma * z;
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Standardized state variable and transition weights for every panel row.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionState {
    pub growth: String,
    pub sigma: f64,
    pub standardization: Standardization,
    pub z: Vec<Cell>,
    pub weight: Vec<Cell>,
}

impl TransitionState {
    pub fn from_panel(panel: &Panel, growth: &str, sigma: f64, standardization: Standardization) -> Result<Self> {
        check_sigma(sigma)?;
        let std = panel.standardize_by(growth, standardization)?;
        let z = std.column(&standardized_name(growth))?.to_vec();
        let weight = z.iter().map(|c| c.map(|v| smooth_transition(v, sigma))).collect();
        Ok(Self {
            growth: growth.to_string(),
            sigma,
            standardization,
            z,
            weight,
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("transition sigma must be positive, got {sigma}")))
    }
}

/// Shock split into a recession loading F(z)·D and an expansion loading
/// (1 − F(z))·D, with lags of D, growth and F as controls.
#[derive(Debug, Clone)]
pub struct Transition {
    growth: String,
    sigma: f64,
    standardization: Standardization,
}

impl Transition {
    pub fn new(growth: impl Into<String>, sigma: f64, standardization: Standardization) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self {
            growth: growth.into(),
            sigma,
            standardization,
        })
    }

    pub fn from_state(state: &TransitionState) -> Result<Self> {
        Self::new(state.growth.clone(), state.sigma, state.standardization)
    }

    pub fn low_column(lp: &LpSpec) -> String {
        format!("{TRANSITION}_x_{}", lp.shock)
    }

    pub fn high_column(lp: &LpSpec) -> String {
        format!("1m{TRANSITION}_x_{}", lp.shock)
    }
}

impl Specification for Transition {
    fn name(&self) -> &'static str {
        "transition"
    }

    fn prepare(&self, panel: &Panel, lp: &LpSpec) -> Result<Panel> {
        let state = TransitionState::from_panel(panel, &self.growth, self.sigma, self.standardization)?;
        let mut p = panel.with_column(TRANSITION, state.weight)?;
        p = p.derive(&Self::low_column(lp), &[TRANSITION, lp.shock.as_str()], |v| v[0] * v[1])?;
        p = p.derive(&Self::high_column(lp), &[TRANSITION, lp.shock.as_str()], |v| (1.0 - v[0]) * v[1])?;
        for j in 1..=lp.dummy_lags {
            p = p.add_lag(&self.growth, j)?.add_lag(TRANSITION, j)?;
        }
        Ok(p)
    }

    fn regressors(&self, lp: &LpSpec) -> Vec<String> {
        let mut cols = vec![Self::low_column(lp), Self::high_column(lp)];
        cols.extend(shock_lag_names(lp));
        cols.extend((1..=lp.dummy_lags).map(|j| lag_name(&self.growth, j)));
        cols.extend((1..=lp.dummy_lags).map(|j| lag_name(TRANSITION, j)));
        cols.extend(lp.controls.iter().map(|c| c.name.clone()));
        cols.extend(dy_lag_names(lp));
        cols
    }

    fn effects(&self, fit: &RegressionResult, lp: &LpSpec) -> Result<Vec<Effect>> {
        Ok(vec![
            Effect {
                name: EFFECT_LOW.into(),
                interval: coefficient_interval(fit, &Self::low_column(lp), &lp.inference)?,
            },
            Effect {
                name: EFFECT_HIGH.into(),
                interval: coefficient_interval(fit, &Self::high_column(lp), &lp.inference)?,
            },
        ])
    }
}
