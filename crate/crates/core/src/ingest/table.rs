use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::{coefficient_interval, InferenceOptions, RegressionResult};
use crate::lp::{Effect, IrfEntry};

/// One column of an appendix-style regression table.
#[derive(Debug, Clone, Copy)]
pub struct TableColumn<'a> {
    pub header: &'a str,
    pub fit: &'a RegressionResult,
    pub r_squared: f64,
    /// Derived quantities (e.g. marginal effects) listed after the coefficients.
    pub effects: &'a [Effect],
}

impl<'a> TableColumn<'a> {
    pub fn from_entry(header: &'a str, entry: &'a IrfEntry) -> Self {
        Self {
            header,
            fit: &entry.fit,
            r_squared: entry.r_squared,
            effects: &entry.effects,
        }
    }
}

const NOTE: &str = "Standard errors in parentheses clustered at the entity level. * p < 0.1, ** p < 0.05, *** p < 0.01";
const CELL: usize = 14;

fn estimate_cell(fit: &RegressionResult, name: &str, opts: &InferenceOptions) -> (String, String) {
    let Ok(beta) = fit.coefficient(name) else {
        return (String::new(), String::new());
    };
    match coefficient_interval(fit, name, opts) {
        Ok(ci) => (format!("{beta:.3}{}", ci.stars), format!("({:.3})", ci.std_error)),
        Err(_) => (format!("{beta:.3}"), String::new()),
    }
}

/// Renders coefficients to 3 decimals with stars, standard errors in
/// parentheses on the line beneath, then the observation-count and fit rows.
pub fn render_regression_table(columns: &[TableColumn<'_>], opts: &InferenceOptions) -> String {
    let mut rows: Vec<&str> = Vec::new();
    for c in columns {
        for n in &c.fit.names {
            if !rows.contains(&n.as_str()) {
                rows.push(n);
            }
        }
    }
    let mut effect_rows: Vec<&str> = Vec::new();
    for c in columns {
        for e in c.effects {
            let name = e.name.as_str();
            if !rows.contains(&name) && !effect_rows.contains(&name) {
                effect_rows.push(name);
            }
        }
    }
    let footer = ["Observations", "Number of countries", "Number of years", "R-Square"];
    let label_width = rows
        .iter()
        .chain(&effect_rows)
        .chain(&footer)
        .map(|s| s.chars().count())
        .max()
        .unwrap_or(0)
        + 2;

    let mut out = String::new();
    let mut line = |label: &str, cells: Vec<String>| {
        let mut s = format!("{label:<label_width$}");
        for c in cells {
            let _ = write!(s, "{c:>CELL$}");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };

    line("", columns.iter().map(|c| c.header.to_string()).collect());
    for name in &rows {
        let (est, se): (Vec<_>, Vec<_>) = columns.iter().map(|c| estimate_cell(c.fit, name, opts)).unzip();
        line(name, est);
        line("", se);
    }
    for name in &effect_rows {
        let cells = columns
            .iter()
            .map(|c| {
                c.effects
                    .iter()
                    .find(|e| e.name == *name)
                    .map(|e| format!("{:.3}{}", e.interval.estimate, e.interval.stars))
                    .unwrap_or_default()
            })
            .collect();
        line(name, cells);
    }
    line(footer[0], columns.iter().map(|c| c.fit.n_obs.to_string()).collect());
    line(footer[1], columns.iter().map(|c| c.fit.n_entities.to_string()).collect());
    line(footer[2], columns.iter().map(|c| c.fit.n_periods.to_string()).collect());
    line(footer[3], columns.iter().map(|c| format!("{:.3}", c.r_squared)).collect());
    out.push('\n');
    out.push_str(NOTE);
    out.push('\n');
    out
}

pub fn write_regression_table(columns: &[TableColumn<'_>], opts: &InferenceOptions, path: &Path) -> Result<()> {
    std::fs::write(path, render_regression_table(columns, opts)).map_err(|e| Error::io(path, e))
}
