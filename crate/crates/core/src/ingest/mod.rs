//! File boundary: CSV panels, event and group fixtures, unit conversion,
//! merging, and the IRF / regression-table writers.

pub mod config;
mod table;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::{Event, EventList};
use crate::lp::{GroupSpec, Irf};
use crate::panel::{Cell, Panel, PanelBuilder};

pub use table::{render_regression_table, write_regression_table, TableColumn};

/// Tonnes of CO₂ per tonne of carbon.
pub const CO2_PER_CARBON: f64 = 3.667;

const ENTITY: &str = "entity";
const YEAR: &str = "year";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_error(file: &str, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(file, line, err.to_string())
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source)
}

/// Reads a long-format panel: header with `entity`, `year`, then numeric
/// columns. Blank cells are missing.
pub fn read_panel(path: &Path) -> Result<Panel> {
    read_panel_from(open(path)?, &path.display().to_string())
}

pub fn read_panel_from<R: Read>(source: R, file: &str) -> Result<Panel> {
    let mut rdr = reader(source);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(file, 1, format!("missing required column `{name}`")))
    };
    let (entity_col, year_col) = (find(ENTITY)?, find(YEAR)?);
    let value_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != entity_col && *i != year_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    let names: Vec<&str> = value_cols.iter().map(|(_, h)| h.as_str()).collect();
    let mut builder = PanelBuilder::new(&names);
    let mut seen: HashMap<(String, i64), u64> = HashMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(file, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let entity = record.get(entity_col).unwrap_or_default();
        if entity.is_empty() {
            return Err(Error::parse(file, line, "empty entity"));
        }
        let year_text = record.get(year_col).unwrap_or_default();
        let year: i64 = year_text
            .parse()
            .map_err(|_| Error::parse(file, line, format!("year `{year_text}` is not an integer")))?;
        if let Some(first) = seen.insert((entity.to_string(), year), line) {
            return Err(Error::parse(
                file,
                line,
                format!("duplicate key ({entity}, {year}) at lines {first} and {line}"),
            ));
        }
        let mut values = Vec::with_capacity(value_cols.len());
        for (i, name) in &value_cols {
            values.push(parse_cell(record.get(*i).unwrap_or_default(), name, file, line)?);
        }
        builder.push_row(entity, year, values)?;
    }
    builder.build()
}

fn parse_cell(text: &str, column: &str, file: &str, line: u64) -> Result<Cell> {
    if text.is_empty() {
        return Ok(None);
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::parse(
            file,
            line,
            format!("non-numeric value `{text}` in column `{column}`"),
        )),
    }
}

fn fmt_cell(cell: Cell) -> String {
    cell.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_panel(panel: &Panel, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(&path.display().to_string(), e))?;
    let names: Vec<&str> = panel.column_names().collect();
    let cols = names.iter().map(|n| panel.column(n)).collect::<Result<Vec<_>>>()?;
    let mut header = vec![ENTITY.to_string(), YEAR.to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    let file = path.display().to_string();
    w.write_record(&header).map_err(|e| csv_error(&file, e))?;
    for (r, key) in panel.keys().iter().enumerate() {
        let mut rec = vec![panel.entity_name(*key).to_string(), key.period.to_string()];
        rec.extend(cols.iter().map(|c| fmt_cell(c[r])));
        w.write_record(&rec).map_err(|e| csv_error(&file, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Converts thousand tonnes of carbon to thousand tonnes of CO₂.
pub fn carbon_to_co2(panel: &Panel, var: &str) -> Result<Panel> {
    panel.scale(var, CO2_PER_CARBON)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeReport {
    /// Entities missing from at least one input.
    pub unmatched_entities: Vec<String>,
}

/// Outer join on (entity, year). Variable names must be disjoint.
pub fn merge(panels: &[Panel]) -> Result<(Panel, MergeReport)> {
    let mut names: Vec<String> = Vec::new();
    for p in panels {
        for n in p.column_names() {
            if names.iter().any(|m| m == n) {
                return Err(Error::ColumnCollision(n.to_string()));
            }
            names.push(n.to_string());
        }
    }
    let mut keys: BTreeSet<(String, i64)> = BTreeSet::new();
    let mut presence: BTreeMap<String, usize> = BTreeMap::new();
    for p in panels {
        for e in p.entities() {
            *presence.entry(e.clone()).or_default() += 1;
        }
        keys.extend(p.keys().iter().map(|k| (p.entity_name(*k).to_string(), k.period)));
    }
    let mut builder = PanelBuilder::new(&names);
    for (entity, year) in keys {
        let mut values = Vec::with_capacity(names.len());
        for p in panels {
            let row = p.row(&entity, year);
            for n in p.column_names() {
                values.push(row.and_then(|r| p.column(n).expect("own column")[r]));
            }
        }
        builder.push_row(entity, year, values)?;
    }
    let report = MergeReport {
        unmatched_entities: presence
            .into_iter()
            .filter(|(_, n)| *n < panels.len())
            .map(|(e, _)| e)
            .collect(),
    };
    Ok((builder.build()?, report))
}

/// Event list CSV (`event_name,year,iso3`), plus optional mortality CSV
/// (`event_name,iso3,mortality`).
pub fn read_events(path: &Path, mortality: Option<&Path>) -> Result<EventList> {
    let file = path.display().to_string();
    let mut rdr = reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(&file, e))?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(&file, 1, format!("missing required column `{name}`")))
    };
    let (name_col, year_col, iso_col) = (idx("event_name")?, idx("year")?, idx("iso3")?);
    let mut events: Vec<Event> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&file, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let name = record.get(name_col).unwrap_or_default();
        let year_text = record.get(year_col).unwrap_or_default();
        let iso = record.get(iso_col).unwrap_or_default();
        let year: i64 = year_text
            .parse()
            .map_err(|_| Error::parse(&file, line, format!("year `{year_text}` is not an integer")))?;
        if name.is_empty() || iso.is_empty() {
            return Err(Error::parse(&file, line, "event_name and iso3 must be non-empty"));
        }
        match events.iter_mut().find(|e| e.name == name) {
            Some(e) if e.year != year => {
                return Err(Error::parse(
                    &file,
                    line,
                    format!("event {name} listed with years {} and {year}", e.year),
                ))
            }
            Some(e) if e.entities.iter().any(|x| x == iso) => {
                return Err(Error::parse(&file, line, format!("{iso} listed twice for event {name}")))
            }
            Some(e) => e.entities.push(iso.to_string()),
            None => events.push(Event {
                name: name.to_string(),
                year,
                entities: vec![iso.to_string()],
            }),
        }
    }
    let list = EventList::new(events)?;
    let Some(mpath) = mortality else {
        return Ok(list);
    };
    let mfile = mpath.display().to_string();
    let mut rdr = reader(open(mpath)?);
    let headers = rdr.headers().map_err(|e| csv_error(&mfile, e))?.clone();
    let midx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(&mfile, 1, format!("missing required column `{name}`")))
    };
    let (name_col, iso_col, m_col) = (midx("event_name")?, midx("iso3")?, midx("mortality")?);
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&mfile, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let text = record.get(m_col).unwrap_or_default();
        let m = parse_cell(text, "mortality", &mfile, line)?
            .ok_or_else(|| Error::parse(&mfile, line, "empty mortality"))?;
        values.push((
            record.get(name_col).unwrap_or_default().to_string(),
            record.get(iso_col).unwrap_or_default().to_string(),
            m,
        ));
    }
    list.with_mortality(values)
}

pub fn write_events(list: &EventList, path: &Path) -> Result<()> {
    let file = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(&file, e))?;
    w.write_record(["event_name", "year", "iso3"]).map_err(|e| csv_error(&file, e))?;
    for e in list.events() {
        for iso in &e.entities {
            w.write_record([e.name.as_str(), &e.year.to_string(), iso.as_str()])
                .map_err(|err| csv_error(&file, err))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_mortality(list: &EventList, path: &Path) -> Result<()> {
    let file = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(&file, e))?;
    w.write_record(["event_name", "iso3", "mortality"]).map_err(|e| csv_error(&file, e))?;
    for (event, entity, m) in list.mortality_entries() {
        w.write_record([event, entity, &m.to_string()]).map_err(|e| csv_error(&file, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Group membership CSV: `iso3` plus one 0/1 column per group; `column`
/// selects the group.
pub fn read_groups(path: &Path, column: &str) -> Result<GroupSpec> {
    let file = path.display().to_string();
    let mut rdr = reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(&file, e))?.clone();
    let iso_col = headers
        .iter()
        .position(|h| h == "iso3")
        .ok_or_else(|| Error::parse(&file, 1, "missing required column `iso3`"))?;
    let g_col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::parse(&file, 1, format!("missing group column `{column}`")))?;
    let mut membership = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&file, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let flag = match record.get(g_col).unwrap_or_default() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::parse(&file, line, format!("group flag `{other}` is not 0 or 1"))),
        };
        membership.push((record.get(iso_col).unwrap_or_default().to_string(), flag));
    }
    Ok(GroupSpec::new(column, membership))
}

/// One row per (horizon, reported coefficient).
#[derive(Debug, Clone, PartialEq)]
pub struct IrfRow {
    pub horizon: usize,
    pub coef_name: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p: f64,
    pub stars: String,
    pub n_obs: usize,
    pub n_entities: usize,
    pub n_periods: usize,
    pub r2: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrfTable {
    pub rows: Vec<IrfRow>,
}

const IRF_HEADER: [&str; 12] = [
    "horizon",
    "coef_name",
    "estimate",
    "se",
    "ci_low",
    "ci_high",
    "p",
    "stars",
    "n_obs",
    "n_entities",
    "n_periods",
    "r2",
];

impl IrfTable {
    pub fn from_irf(irf: &Irf) -> Self {
        let rows = irf
            .entries
            .iter()
            .flat_map(|entry| {
                entry.effects.iter().map(move |eff| IrfRow {
                    horizon: entry.horizon,
                    coef_name: eff.name.clone(),
                    estimate: eff.interval.estimate,
                    se: eff.interval.std_error,
                    ci_low: eff.interval.ci_low,
                    ci_high: eff.interval.ci_high,
                    p: eff.interval.p_value,
                    stars: eff.interval.stars.to_string(),
                    n_obs: entry.n_obs,
                    n_entities: entry.n_entities,
                    n_periods: entry.n_periods,
                    r2: entry.r_squared,
                })
            })
            .collect();
        Self { rows }
    }

    pub fn write_to<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let wrap = |e: csv::Error| Error::Invariant(format!("csv write: {e}"));
        w.write_record(IRF_HEADER).map_err(wrap)?;
        for r in &self.rows {
            w.write_record([
                r.horizon.to_string(),
                r.coef_name.clone(),
                r.estimate.to_string(),
                r.se.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.p.to_string(),
                r.stars.clone(),
                r.n_obs.to_string(),
                r.n_entities.to_string(),
                r.n_periods.to_string(),
                r.r2.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Invariant(format!("csv flush: {e}")))
    }

    pub fn read_from<R: Read>(source: R, file: &str) -> Result<Self> {
        let mut rdr = reader(source);
        let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
        if headers.iter().ne(IRF_HEADER) {
            return Err(Error::parse(file, 1, "not an IRF table header"));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(file, e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let f = |i: usize| -> Result<f64> {
                record[i]
                    .parse()
                    .map_err(|_| Error::parse(file, line, format!("bad number `{}` in `{}`", &record[i], IRF_HEADER[i])))
            };
            let u = |i: usize| -> Result<usize> {
                record[i]
                    .parse()
                    .map_err(|_| Error::parse(file, line, format!("bad count `{}` in `{}`", &record[i], IRF_HEADER[i])))
            };
            rows.push(IrfRow {
                horizon: u(0)?,
                coef_name: record[1].to_string(),
                estimate: f(2)?,
                se: f(3)?,
                ci_low: f(4)?,
                ci_high: f(5)?,
                p: f(6)?,
                stars: record[7].to_string(),
                n_obs: u(8)?,
                n_entities: u(9)?,
                n_periods: u(10)?,
                r2: f(11)?,
            });
        }
        Ok(Self { rows })
    }
}

pub fn write_irf(irf: &Irf, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    IrfTable::from_irf(irf).write_to(file)
}

pub fn read_irf(path: &Path) -> Result<IrfTable> {
    IrfTable::read_from(open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_cell_is_missing() {
        let csv = "entity,year,x,y\nA,2000,1.5,\nA,2001,2,3\nB,2000,4,5\n";
        let p = read_panel_from(csv.as_bytes(), "t.csv").unwrap();
        assert_eq!(p.n_rows(), 3);
        let missing = ["x", "y"]
            .iter()
            .map(|c| p.column(c).unwrap().iter().filter(|v| v.is_none()).count())
            .sum::<usize>();
        assert_eq!(missing, 1);
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let csv = "entity,year,x\nFRA,2003,1\nDEU,2003,2\nFRA,2003,3\n";
        let err = read_panel_from(csv.as_bytes(), "dup.csv").unwrap_err().to_string();
        assert!(err.contains("dup.csv:4"), "{err}");
        assert!(err.contains("(FRA, 2003) at lines 2 and 4"), "{err}");
    }

    #[test]
    fn non_numeric_cell_carries_file_and_line() {
        let csv = "entity,year,x\nA,2000,1\nA,2001,abc\n";
        let err = read_panel_from(csv.as_bytes(), "bad.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(err.to_string().starts_with("bad.csv:3:"));
    }

    #[test]
    fn missing_key_column() {
        let csv = "country,year,x\nA,2000,1\n";
        assert!(read_panel_from(csv.as_bytes(), "k.csv").is_err());
    }

    #[test]
    fn carbon_conversion() {
        let p = read_panel_from("entity,year,c\nA,1,1000\nA,2,0\nA,3,\n".as_bytes(), "c.csv").unwrap();
        let q = carbon_to_co2(&p, "c").unwrap();
        assert_eq!(q.column("c").unwrap(), &[Some(3667.0), Some(0.0), None]);
        assert!(carbon_to_co2(&p, "nope").is_err());
    }

    #[test]
    fn merge_examples() {
        let a = read_panel_from("entity,year,x\nA,1,1\nA,2,2\n".as_bytes(), "a").unwrap();
        let b = read_panel_from("entity,year,y\nA,1,3\nA,2,4\n".as_bytes(), "b").unwrap();
        let (m, report) = merge(&[a.clone(), b]).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert!(m.column("x").unwrap().iter().chain(m.column("y").unwrap()).all(Option::is_some));
        assert!(report.unmatched_entities.is_empty());

        let c = read_panel_from("entity,year,z\nB,1,5\n".as_bytes(), "c").unwrap();
        let (m, report) = merge(&[a.clone(), c]).unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.value("B", 1, "x").unwrap(), None);
        assert_eq!(m.value("A", 2, "z").unwrap(), None);
        assert_eq!(report.unmatched_entities, vec!["A".to_string(), "B".to_string()]);

        let clash = read_panel_from("entity,year,x\nA,1,9\n".as_bytes(), "d").unwrap();
        assert!(matches!(merge(&[a, clash]), Err(Error::ColumnCollision(ref n)) if n == "x"));
    }
}
