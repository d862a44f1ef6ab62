//! The specification family behind one trait, looked up by name at run time.

use std::collections::BTreeMap;
use std::fmt;

use super::{Baseline, GroupMode, GroupSpec, Interaction, LpSpec, Transition};
use crate::error::{Error, Result};
use crate::estimator::{CoefficientInterval, RegressionResult};
use crate::panel::{Panel, Standardization};

/// One coefficient (or combination) reported per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub name: String,
    pub interval: CoefficientInterval,
}

/// A local-projection specification: which extra columns it needs, which
/// regressors enter each horizon's regression, and what gets reported.
pub trait Specification: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Adds specification-specific columns to a panel that already carries
    /// the shared ones (response, shock lags, controls, Δy lags).
    fn prepare(&self, panel: &Panel, _lp: &LpSpec) -> Result<Panel> {
        Ok(panel.clone())
    }

    fn regressors(&self, lp: &LpSpec) -> Vec<String>;

    fn effects(&self, fit: &RegressionResult, lp: &LpSpec) -> Result<Vec<Effect>>;
}

/// Parameters a constructor may draw on; each specification reads only its own.
#[derive(Debug, Clone, Default)]
pub struct StrategyOptions {
    pub group: Option<GroupSpec>,
    pub group_mode: GroupMode,
    pub growth: Option<String>,
    pub sigma: Option<f64>,
    pub standardization: Standardization,
}

pub type Constructor = fn(&StrategyOptions) -> Result<Box<dyn Specification>>;

pub struct Registry {
    constructors: BTreeMap<&'static str, Constructor>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.constructors.keys()).finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("baseline", |_| Ok(Box::new(Baseline)));
        r.register("interaction", |opts| {
            let group = opts
                .group
                .clone()
                .ok_or_else(|| Error::InvalidSpec("interaction specification needs a group membership".into()))?;
            Ok(Box::new(Interaction::new(group, opts.group_mode)))
        });
        r.register("transition", |opts| {
            let growth = opts
                .growth
                .clone()
                .ok_or_else(|| Error::InvalidSpec("transition specification needs a growth variable".into()))?;
            let t = Transition::new(growth, opts.sigma.unwrap_or(super::DEFAULT_SIGMA), opts.standardization)?;
            Ok(Box::new(t))
        });
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            constructors: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, ctor: Constructor) {
        self.constructors.insert(name, ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.constructors.keys().copied()
    }

    pub fn create(&self, name: &str, opts: &StrategyOptions) -> Result<Box<dyn Specification>> {
        let ctor = self.constructors.get(name).ok_or_else(|| {
            Error::UnknownSpecification(name.to_string(), self.names().collect::<Vec<_>>().join(", "))
        })?;
        ctor(opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_registered() {
        let r = Registry::default();
        assert_eq!(r.names().collect::<Vec<_>>(), ["baseline", "interaction", "transition"]);
        assert_eq!(r.create("baseline", &StrategyOptions::default()).unwrap().name(), "baseline");
    }

    #[test]
    fn unknown_name_lists_known_ones() {
        let err = Registry::default().create("var", &StrategyOptions::default()).unwrap_err();
        assert!(err.to_string().contains("baseline, interaction, transition"));
    }

    #[test]
    fn missing_parameters_are_reported() {
        let r = Registry::default();
        assert!(r.create("interaction", &StrategyOptions::default()).is_err());
        assert!(r.create("transition", &StrategyOptions::default()).is_err());
    }
}
