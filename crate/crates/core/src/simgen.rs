//! Synthetic panels with a known impulse response.
//!
//! Growth of the latent outcome follows
//! `Δw_it = ar·Δw_i,t-1 + a_i + b_t + u_it` with `u_it = ρ·u_i,t-1 + e_it`,
//! and the observed level is `y_it = w_it + Σ_s θ_{min(t-s, H)}` over the
//! entity's shock years `s ≤ t`. Shocks act on levels, so `θ_k` is exactly
//! the `k`-step level response the local projection estimates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::events::{Event, EventList};
use crate::lp::smooth_transition;
use crate::panel::{Panel, PanelBuilder};

pub const OUTCOME: &str = "y";
pub const GROWTH: &str = "growth";
pub const GDP: &str = "gdp_pc";
pub const TRADE: &str = "trade";

const BURN_IN: usize = 50;

/// Recession and expansion response paths, blended by F(z) of the state
/// variable at the shock date.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDependence {
    pub theta_low: Vec<f64>,
    pub theta_high: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shocks {
    /// Independent Bernoulli draw per entity-year.
    Probability(f64),
    /// Explicit (entity index, year) list.
    Schedule(Vec<(usize, i64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub n_entities: usize,
    pub n_periods: usize,
    pub start_year: i64,
    pub entity_sd: f64,
    pub time_sd: f64,
    pub idio_sd: f64,
    /// AR(1) coefficient of the within-entity error.
    pub rho: f64,
    /// AR coefficient on Δy.
    pub ar: f64,
    /// Response path θ_0..θ_H; the last value persists beyond H.
    pub theta: Vec<f64>,
    pub shocks: Shocks,
    pub state: Option<StateDependence>,
    pub seed: u64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            n_entities: 200,
            n_periods: 40,
            start_year: 1961,
            entity_sd: 0.01,
            time_sd: 0.01,
            idio_sd: 0.04,
            rho: 0.3,
            ar: 0.2,
            theta: vec![0.0, -0.034, -0.037, 0.0, 0.0, 0.0],
            shocks: Shocks::Probability(0.05),
            state: None,
            seed: 0,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_entities == 0 || self.n_periods == 0 {
            return bad("a simulated panel needs at least one entity and one period".into());
        }
        for (name, sd) in [("entity_sd", self.entity_sd), ("time_sd", self.time_sd), ("idio_sd", self.idio_sd)] {
            if !(sd >= 0.0 && sd.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {sd}"));
            }
        }
        if [self.ar, self.rho].iter().any(|c| c.is_nan() || c.abs() >= 1.0) {
            return bad(format!("ar and rho must lie in (-1, 1), got {} and {}", self.ar, self.rho));
        }
        match &self.shocks {
            Shocks::Probability(p) if !(0.0..=1.0).contains(p) => {
                return bad(format!("shock probability must lie in [0, 1], got {p}"))
            }
            Shocks::Schedule(s) => {
                let end = self.start_year + self.n_periods as i64;
                if let Some((i, t)) = s.iter().find(|(i, t)| *i >= self.n_entities || *t < self.start_year || *t >= end) {
                    return bad(format!("scheduled shock ({i}, {t}) lies outside the panel"));
                }
            }
            _ => {}
        }
        if self.theta.is_empty() {
            return bad("theta needs at least one value".into());
        }
        if let Some(st) = &self.state {
            if st.theta_low.is_empty() || st.theta_high.is_empty() || st.sigma.is_nan() || st.sigma <= 0.0 {
                return bad("state dependence needs non-empty paths and sigma > 0".into());
            }
        }
        Ok(())
    }

    pub fn entity_name(i: usize) -> String {
        format!("E{i:03}")
    }

    /// Reads `key = value` lines whose keys match the field names;
    /// `theta`, `theta_low` and `theta_high` are comma lists, and
    /// `shock_prob` sets a Bernoulli shock rate.
    pub fn parse_config(text: &str, file: &str) -> Result<Self> {
        let mut spec = DgpSpec::default();
        let mut state: Option<StateDependence> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i as u64 + 1;
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parse(file, lineno, format!("expected `key = value`, got `{line}`")))?;
            let err = |e: &dyn std::fmt::Display| Error::parse(file, lineno, format!("{key}: {e}"));
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(&e));
            let path = |v: &str| v.split(',').map(|x| num(x.trim())).collect::<Result<Vec<_>>>();
            let st = || StateDependence {
                theta_low: Vec::new(),
                theta_high: Vec::new(),
                sigma: crate::lp::DEFAULT_SIGMA,
            };
            match key {
                "n_entities" => spec.n_entities = value.parse().map_err(|e| err(&e))?,
                "n_periods" => spec.n_periods = value.parse().map_err(|e| err(&e))?,
                "start_year" => spec.start_year = value.parse().map_err(|e| err(&e))?,
                "seed" => spec.seed = value.parse().map_err(|e| err(&e))?,
                "entity_sd" => spec.entity_sd = num(value)?,
                "time_sd" => spec.time_sd = num(value)?,
                "idio_sd" => spec.idio_sd = num(value)?,
                "rho" => spec.rho = num(value)?,
                "ar" => spec.ar = num(value)?,
                "theta" => spec.theta = path(value)?,
                "shock_prob" => spec.shocks = Shocks::Probability(num(value)?),
                "theta_low" => state.get_or_insert_with(st).theta_low = path(value)?,
                "theta_high" => state.get_or_insert_with(st).theta_high = path(value)?,
                "sigma" => state.get_or_insert_with(st).sigma = num(value)?,
                other => return Err(Error::parse(file, lineno, format!("unknown key `{other}`"))),
            }
        }
        spec.state = state;
        spec.validate()?;
        Ok(spec)
    }
}

/// Ground truth behind a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub seed: u64,
    pub theta: Vec<f64>,
    pub state: Option<StateDependence>,
    /// (entity, year) of every shock.
    pub shocks: Vec<(String, i64)>,
}

impl Truth {
    /// Flat `key = value` rendering.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "theta = {}", join(&self.theta));
        if let Some(st) = &self.state {
            let _ = writeln!(s, "theta_low = {}", join(&st.theta_low));
            let _ = writeln!(s, "theta_high = {}", join(&st.theta_high));
            let _ = writeln!(s, "sigma = {}", st.sigma);
        }
        let _ = writeln!(s, "shock_count = {}", self.shocks.len());
        for (i, (e, t)) in self.shocks.iter().enumerate() {
            let _ = writeln!(s, "shock.{i} = {e},{t}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub panel: Panel,
    pub events: EventList,
    pub truth: Truth,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn path_value(theta: &[f64], lag: usize) -> f64 {
    theta[lag.min(theta.len() - 1)]
}

/// Draws a panel with columns `y`, `growth`, `gdp_pc` and `trade`, the
/// events behind its shocks (one event per shock year, with mortality), and
/// the truth record. Identical specs give identical output.
pub fn generate(dgp: &DgpSpec) -> Result<Simulated> {
    dgp.validate()?;
    let (n, t_len) = (dgp.n_entities, dgp.n_periods);
    let total = BURN_IN + t_len;

    let mut noise = stream(dgp.seed, 0);
    let time_effects: Vec<f64> = (0..total).map(|_| dgp.time_sd * normal(&mut noise)).collect();
    let mut latent = vec![0.0; n * t_len];
    for i in 0..n {
        let a = dgp.entity_sd * normal(&mut noise);
        let mut u = dgp.idio_sd * normal(&mut noise) / (1.0 - dgp.rho * dgp.rho).sqrt();
        let mut dw = 0.0;
        let mut w = 0.0;
        for (t, b) in time_effects.iter().enumerate() {
            u = dgp.rho * u + dgp.idio_sd * normal(&mut noise);
            dw = dgp.ar * dw + a + b + u;
            if t >= BURN_IN {
                w += dw;
                latent[i * t_len + t - BURN_IN] = w;
            }
        }
    }

    let mut cycle = stream(dgp.seed, 1);
    let mut growth = vec![0.0; n * t_len];
    let mut gdp = vec![0.0; n * t_len];
    let mut trade = vec![0.0; n * t_len];
    for i in 0..n {
        let mut g = normal(&mut cycle);
        let mut level = 9.0 + normal(&mut cycle);
        let openness = 60.0 + 20.0 * normal(&mut cycle);
        for t in 0..t_len {
            g = 0.5 * g + 0.75f64.sqrt() * normal(&mut cycle);
            level += 0.02 + 0.03 * normal(&mut cycle);
            growth[i * t_len + t] = 2.0 + 3.0 * g;
            gdp[i * t_len + t] = level.exp();
            trade[i * t_len + t] = openness + 5.0 * normal(&mut cycle);
        }
    }

    let mut shock_rng = stream(dgp.seed, 2);
    let mut shocked = vec![false; n * t_len];
    match &dgp.shocks {
        Shocks::Probability(p) => {
            for s in shocked.iter_mut() {
                *s = shock_rng.random_bool(*p);
            }
        }
        Shocks::Schedule(list) => {
            for &(i, year) in list {
                shocked[i * t_len + (year - dgp.start_year) as usize] = true;
            }
        }
    }

    let weights: Option<Vec<f64>> = dgp.state.as_ref().map(|st| {
        let m = growth.iter().sum::<f64>() / growth.len() as f64;
        let var = growth.iter().map(|g| (g - m) * (g - m)).sum::<f64>() / (growth.len().max(2) - 1) as f64;
        let sd = var.sqrt();
        growth
            .iter()
            .map(|g| if sd > 0.0 { smooth_transition((g - m) / sd, st.sigma) } else { 0.5 })
            .collect()
    });

    let mut y = latent;
    let mut shocks = Vec::new();
    for i in 0..n {
        for s in 0..t_len {
            if !shocked[i * t_len + s] {
                continue;
            }
            shocks.push((DgpSpec::entity_name(i), dgp.start_year + s as i64));
            for t in s..t_len {
                let lag = t - s;
                let effect = match (&dgp.state, &weights) {
                    (Some(st), Some(w)) => {
                        let f = w[i * t_len + s];
                        f * path_value(&st.theta_low, lag) + (1.0 - f) * path_value(&st.theta_high, lag)
                    }
                    _ => path_value(&dgp.theta, lag),
                };
                y[i * t_len + t] += effect;
            }
        }
    }

    let mut builder = PanelBuilder::new(&[OUTCOME, GROWTH, GDP, TRADE]);
    for i in 0..n {
        for t in 0..t_len {
            let r = i * t_len + t;
            builder.push_row(
                DgpSpec::entity_name(i),
                dgp.start_year + t as i64,
                vec![Some(y[r]), Some(growth[r]), Some(gdp[r]), Some(trade[r])],
            )?;
        }
    }
    let panel = builder.build()?;

    let mut by_year: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for (e, year) in &shocks {
        by_year.entry(*year).or_default().push(e.clone());
    }
    let mut mortality_rng = stream(dgp.seed, 3);
    let mut mortality = Vec::new();
    let events: Vec<Event> = by_year
        .into_iter()
        .map(|(year, entities)| {
            let name = format!("sim_{year}");
            for e in &entities {
                mortality.push((name.clone(), e.clone(), (normal(&mut mortality_rng) - 6.0).exp()));
            }
            Event { name, year, entities }
        })
        .collect();
    let events = EventList::new(events)?.with_mortality(mortality)?;

    Ok(Simulated {
        panel,
        events,
        truth: Truth {
            seed: dgp.seed,
            theta: dgp.theta.clone(),
            state: dgp.state.clone(),
            shocks,
        },
    })
}
