//! End-to-end run of a [`RunConfig`]: load, build dummies, estimate, write.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::events::build_dummies;
use crate::ingest::config::RunConfig;
use crate::ingest::{carbon_to_co2, merge, read_events, read_groups, read_panel, write_irf, write_regression_table, TableColumn};
use crate::lp::{estimate_irf, Irf, Registry, StrategyOptions};

pub const IRF_FILE: &str = "irf.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn table_file(k: usize) -> String {
    format!("table_k{k}.txt")
}

#[derive(Debug)]
pub struct RunOutcome {
    pub irf: Irf,
    pub files: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Estimates the configured specification and writes `irf.csv`, one
/// regression table per horizon and `manifest.json` into the output
/// directory. Nothing is left behind on failure.
pub fn run(cfg: &RunConfig, registry: &Registry) -> Result<RunOutcome> {
    let mut panels = Vec::with_capacity(cfg.panels.len());
    for path in &cfg.panels {
        let mut p = read_panel(path)?;
        for c in &cfg.carbon_columns {
            if p.has_column(c) {
                p = carbon_to_co2(&p, c)?;
            }
        }
        panels.push(p);
    }
    let (panel, merge_report) = if panels.len() == 1 {
        (panels.pop().expect("one panel"), Default::default())
    } else {
        merge(&panels)?
    };
    for c in &cfg.carbon_columns {
        if !panel.has_column(c) {
            return Err(Error::MissingVariable(c.clone()));
        }
    }

    let events = read_events(&cfg.events, cfg.mortality.as_deref())?;
    let event_set = build_dummies(&events, &panel, cfg.percentile_rule)?;
    let group = match (&cfg.groups, &cfg.group) {
        (Some(path), Some(name)) => Some(read_groups(path, name)?),
        _ => None,
    };
    let options = StrategyOptions {
        group,
        group_mode: cfg.group_mode,
        growth: Some(cfg.growth.clone()),
        sigma: Some(cfg.sigma),
        standardization: cfg.standardization,
    };
    let spec = registry.create(&cfg.kind, &options)?;
    let irf = estimate_irf(&panel, &event_set, &cfg.lp, spec.as_ref())?;

    let mut inputs = serde_json::Map::new();
    for path in cfg.panels.iter().chain([&cfg.events]).chain(cfg.mortality.iter()).chain(cfg.groups.iter()) {
        inputs.insert(path.display().to_string(), Value::String(sha256_file(path)?));
    }
    let horizons: Vec<Value> = irf
        .entries
        .iter()
        .map(|e| {
            json!({
                "horizon": e.horizon,
                "n_obs": e.n_obs,
                "rows_dropped": e.diagnostics.rows_dropped,
                "missing": e.diagnostics.missing.iter().map(|(n, c)| json!([n, c])).collect::<Vec<_>>(),
                "dropped_columns": e.fit.dropped,
                "demean_sweeps": e.diagnostics.demean_sweeps,
                "demean_last_delta": e.diagnostics.demean_last_delta,
            })
        })
        .collect();
    let d = &irf.diagnostics;
    let manifest = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "specification": irf.specification,
        "spec_hash": irf.spec_hash,
        "config": cfg.entries,
        "inputs_sha256": inputs,
        "diagnostics": {
            "shock_cells": d.shock_cells,
            "unresolved_event_entities": d.unresolved_event_entities,
            "severity_defaulted": d.severity_defaulted,
            "unclassifiable_events": d.unclassifiable_events,
            "log_missing": d.log_missing,
            "unmatched_entities": merge_report.unmatched_entities,
            "horizons": horizons,
        },
    });

    let files = write_outputs(&cfg.output_dir, |staging| {
        write_irf(&irf, &staging.join(IRF_FILE))?;
        for entry in &irf.entries {
            let header = format!("k={}", entry.horizon);
            let col = TableColumn::from_entry(&header, entry);
            write_regression_table(&[col], &cfg.lp.inference, &staging.join(table_file(entry.horizon)))?;
        }
        let path = staging.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invariant(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    })?;
    Ok(RunOutcome { irf, files })
}

/// Writes into a staging directory beside the outputs and moves the files
/// into place only once every write has succeeded.
fn write_outputs(dir: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let staging = dir.join(format!(".staging-{}", std::process::id()));
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    let result = write(&staging).and_then(|()| {
        let mut moved = Vec::new();
        let mut names: Vec<_> = fs::read_dir(&staging)
            .map_err(|e| Error::io(&staging, e))?
            .map(|entry| entry.map(|e| e.file_name()).map_err(|e| Error::io(&staging, e)))
            .collect::<Result<_>>()?;
        names.sort();
        for name in names {
            let target = dir.join(&name);
            fs::rename(staging.join(&name), &target).map_err(|e| Error::io(&target, e))?;
            moved.push(target);
        }
        Ok(moved)
    });
    let _ = fs::remove_dir_all(&staging);
    result
}
