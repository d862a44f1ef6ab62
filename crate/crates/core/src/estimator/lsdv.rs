use std::collections::BTreeSet;

use super::{ols_fit, DesignMatrix, RegressionResult};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LsdvOptions {
    pub entity_fe: bool,
    pub time_fe: bool,
}

impl Default for LsdvOptions {
    fn default() -> Self {
        Self {
            entity_fe: true,
            time_fe: true,
        }
    }
}

/// OLS on the undemeaned design with one indicator column per entity and per
/// period appended. Redundant indicators are left to the rank check.
/// Indicator coefficients are named `entity#<id>` and `period#<t>`.
pub fn lsdv_fit(design: &DesignMatrix, opts: LsdvOptions) -> Result<RegressionResult> {
    let mut full = design.clone();
    if opts.entity_fe {
        let ids: BTreeSet<usize> = design.entities.iter().copied().collect();
        for id in ids {
            full.names.push(format!("entity#{id}"));
            full.columns
                .push(design.entities.iter().map(|&e| f64::from(u8::from(e == id))).collect());
        }
    }
    if opts.time_fe {
        let periods: BTreeSet<i64> = design.periods.iter().copied().collect();
        for t in periods {
            full.names.push(format!("period#{t}"));
            full.columns
                .push(design.periods.iter().map(|&p| f64::from(u8::from(p == t))).collect());
        }
    }
    ols_fit(&full)
}
