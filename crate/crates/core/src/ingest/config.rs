//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory holding the config file. Keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `input.panel` | required | comma-separated panel CSVs, outer-joined on (entity, year) |
//! | `input.events` | required | event CSV (`event_name,year,iso3`) |
//! | `input.mortality` | none | mortality CSV (`event_name,iso3,mortality`) |
//! | `input.groups` | none | group CSV (`iso3` plus 0/1 columns) |
//! | `input.carbon_columns` | none | columns converted from carbon to CO₂ |
//! | `dependent.name` | required | model name of the outcome |
//! | `dependent.source` | `dependent.name` | source column |
//! | `dependent.transform` | `level` | `level`, `log`, `per-capita-log`, `standardized` |
//! | `dependent.population` | none | divisor for `per-capita-log` |
//! | `spec.kind` | `baseline` | `baseline`, `interaction`, `transition` |
//! | `spec.horizons` | 5 | largest horizon H |
//! | `spec.lags` | 2 | lags m of Δy |
//! | `spec.dummy_lags` | 2 | lags of the shock (and of growth, F) |
//! | `spec.shock` | `D` | `D`, `D_high`, `D_med`, `D_low` |
//! | `spec.controls` | `gdp_pc,trade` (`none` for transition) | comma list, or `none` |
//! | `spec.group` | none | group column in `input.groups` |
//! | `spec.group_mode` | `estimate` | `estimate` or `report-only` |
//! | `spec.growth` | `growth` | state variable of the transition model |
//! | `spec.sigma` | 1.5 | transition intensity |
//! | `spec.standardization` | `pooled` | `pooled` or `per-entity` |
//! | `spec.confidence` | 0.95 | interval level |
//! | `spec.reference` | `t` | `t` (G − 1 df) or `normal` |
//! | `spec.r2` | `within` | `within` or `overall` |
//! | `spec.percentile_rule` | `linear` | `linear` or `nearest-rank` |
//! | `spec.entity_fe`, `spec.time_fe` | `true` | fixed effects switches |
//! | `spec.response_base` | `pre-shock` | `pre-shock` or `contemporaneous` |
//! | `demean.tolerance` | 1e-10 | relative sweep tolerance |
//! | `demean.max_sweeps` | 10000 | sweep cap |
//! | `output.dir` | required | output directory |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::events::PercentileRule;
use crate::lp::{GroupMode, LpSpec, DEFAULT_SIGMA};
use crate::panel::{Standardization, Transform, VariableSpec};

const KEYS: &[&str] = &[
    "input.panel",
    "input.events",
    "input.mortality",
    "input.groups",
    "input.carbon_columns",
    "dependent.name",
    "dependent.source",
    "dependent.transform",
    "dependent.population",
    "spec.kind",
    "spec.horizons",
    "spec.lags",
    "spec.dummy_lags",
    "spec.shock",
    "spec.controls",
    "spec.group",
    "spec.group_mode",
    "spec.growth",
    "spec.sigma",
    "spec.standardization",
    "spec.confidence",
    "spec.reference",
    "spec.r2",
    "spec.percentile_rule",
    "spec.entity_fe",
    "spec.time_fe",
    "spec.response_base",
    "demean.tolerance",
    "demean.max_sweeps",
    "output.dir",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub panels: Vec<PathBuf>,
    pub events: PathBuf,
    pub mortality: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub carbon_columns: Vec<String>,
    pub kind: String,
    pub lp: LpSpec,
    pub group: Option<String>,
    pub group_mode: GroupMode,
    pub growth: String,
    pub sigma: f64,
    pub standardization: Standardization,
    pub percentile_rule: PercentileRule,
    pub output_dir: PathBuf,
    /// Every key as written, for the run manifest.
    pub entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn parse(text: &str, file: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i as u64 + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(file, lineno, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::parse(file, lineno, format!("unknown key `{key}`")));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::parse(file, lineno, format!("key `{key}` set twice")));
            }
        }
        Self::from_entries(entries, base)
    }

    fn from_entries(entries: BTreeMap<String, String>, base: &Path) -> Result<Self> {
        let get = |k: &str| entries.get(k).map(String::as_str);
        let require = |k: &str| get(k).ok_or_else(|| Error::Config(format!("missing required key `{k}`")));
        let path = |s: &str| {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let existing = |k: &str, s: &str| {
            let p = path(s);
            if p.is_file() {
                Ok(p)
            } else {
                Err(Error::Config(format!("{k}: file {} does not exist", p.display())))
            }
        };

        let panels = list(require("input.panel")?)
            .into_iter()
            .map(|s| existing("input.panel", &s))
            .collect::<Result<Vec<_>>>()?;
        if panels.is_empty() {
            return Err(Error::Config("input.panel lists no files".into()));
        }
        let events = existing("input.events", require("input.events")?)?;
        let mortality = get("input.mortality").map(|s| existing("input.mortality", s)).transpose()?;
        let groups = get("input.groups").map(|s| existing("input.groups", s)).transpose()?;

        let name = require("dependent.name")?.to_string();
        let transform: Transform = parse_or(get("dependent.transform"), Transform::Level)?;
        let population = get("dependent.population").map(str::to_string);
        if transform == Transform::PerCapitaLog && population.is_none() {
            return Err(Error::Config("dependent.transform = per-capita-log needs dependent.population".into()));
        }
        let dependent = VariableSpec {
            source: get("dependent.source").unwrap_or(&name).to_string(),
            name,
            transform,
            population,
        };

        let kind = get("spec.kind").unwrap_or("baseline").to_string();
        let controls = match get("spec.controls") {
            Some("none") | Some("") => Vec::new(),
            Some(s) => list(s).into_iter().map(VariableSpec::level).collect(),
            None if kind == "transition" => Vec::new(),
            None => vec![VariableSpec::level("gdp_pc"), VariableSpec::level("trade")],
        };
        let mut lp = LpSpec::new(dependent).with_controls(controls);
        lp.horizons = parse_or(get("spec.horizons"), lp.horizons)?;
        lp.lag_order = parse_or(get("spec.lags"), lp.lag_order)?;
        lp.dummy_lags = parse_or(get("spec.dummy_lags"), lp.dummy_lags)?;
        lp.shock = get("spec.shock").unwrap_or(&lp.shock).to_string();
        lp.entity_fe = parse_or(get("spec.entity_fe"), lp.entity_fe)?;
        lp.time_fe = parse_or(get("spec.time_fe"), lp.time_fe)?;
        lp.response_base = parse_or(get("spec.response_base"), lp.response_base)?;
        lp.inference.level = parse_or(get("spec.confidence"), lp.inference.level)?;
        lp.inference.reference = parse_or(get("spec.reference"), lp.inference.reference)?;
        lp.r2 = parse_or(get("spec.r2"), lp.r2)?;
        lp.demean.tolerance = parse_or(get("demean.tolerance"), lp.demean.tolerance)?;
        lp.demean.max_sweeps = parse_or(get("demean.max_sweeps"), lp.demean.max_sweeps)?;
        lp.validate()?;

        let group = get("spec.group").map(str::to_string);
        if kind == "interaction" && (group.is_none() || groups.is_none()) {
            return Err(Error::Config("spec.kind = interaction needs input.groups and spec.group".into()));
        }
        Ok(Self {
            panels,
            events,
            mortality,
            groups,
            carbon_columns: get("input.carbon_columns").map(list).unwrap_or_default(),
            kind,
            group,
            group_mode: parse_or(get("spec.group_mode"), GroupMode::default())?,
            growth: get("spec.growth").unwrap_or("growth").to_string(),
            sigma: parse_or(get("spec.sigma"), DEFAULT_SIGMA)?,
            standardization: parse_or(get("spec.standardization"), Standardization::default())?,
            percentile_rule: parse_or(get("spec.percentile_rule"), PercentileRule::default())?,
            output_dir: path(require("output.dir")?),
            lp,
            entries,
        })
    }
}

fn list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::to_string).collect()
}

fn parse_or<T: FromStr>(value: Option<&str>, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match value {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e| Error::Config(format!("cannot parse `{v}`: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("p.csv"), "entity,year,y\n").unwrap();
        std::fs::write(dir.path().join("e.csv"), "event_name,year,iso3\n").unwrap();
        dir
    }

    #[test]
    fn defaults_follow_the_specification_kind() {
        let dir = fixture();
        let base = "input.panel = p.csv\ninput.events = e.csv\ndependent.name = y\noutput.dir = out\n";
        let cfg = RunConfig::parse(base, "c.cfg", dir.path()).unwrap();
        assert_eq!(cfg.kind, "baseline");
        assert_eq!(cfg.lp.controls.len(), 2);
        assert_eq!(cfg.lp.horizons, 5);
        assert_eq!(cfg.panels, vec![dir.path().join("p.csv")]);

        let cfg = RunConfig::parse(&format!("{base}spec.kind = transition\n"), "c.cfg", dir.path()).unwrap();
        assert!(cfg.lp.controls.is_empty());
        assert_eq!(cfg.sigma, 1.5);
        assert_eq!(cfg.growth, "growth");
    }

    #[test]
    fn unknown_key_reports_line() {
        let dir = fixture();
        let err = RunConfig::parse("# c\n\nspec.horizon = 3\n", "c.cfg", dir.path()).unwrap_err();
        assert!(err.to_string().starts_with("c.cfg:3:"), "{err}");
    }

    #[test]
    fn missing_input_file() {
        let dir = fixture();
        let text = "input.panel = nope.csv\ninput.events = e.csv\ndependent.name = y\noutput.dir = out\n";
        let err = RunConfig::parse(text, "c.cfg", dir.path()).unwrap_err();
        assert!(err.to_string().contains("nope.csv"));
    }

    #[test]
    fn invalid_values() {
        let dir = fixture();
        let base = "input.panel = p.csv\ninput.events = e.csv\ndependent.name = y\noutput.dir = out\n";
        for bad in ["spec.confidence = 1.5", "spec.lags = 0", "spec.r2 = adjusted", "spec.horizons = -1"] {
            assert!(RunConfig::parse(&format!("{base}{bad}\n"), "c.cfg", dir.path()).is_err(), "{bad}");
        }
    }
}
