//! Oracle and Monte Carlo suites that check the estimator against
//! independent computations and simulated ground truth.

pub mod oracle;

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{lsdv_fit, ols_fit, DesignMatrix, LsdvOptions};
use crate::events::{build_dummies, PercentileRule, SHOCK};
use crate::lp::{build_baseline_design, estimate_irf, Baseline, LpSpec, Transition, DEFAULT_SIGMA, EFFECT_HIGH, EFFECT_LOW};
use crate::panel::{demean_columns, DemeanOptions, FeGroups, Standardization, VariableSpec};
use crate::simgen::{generate, DgpSpec, Shocks, StateDependence, GROWTH, OUTCOME};

pub const SUITES: [&str; 7] = [
    "ols-oracle",
    "fe-oracle",
    "cluster-oracle",
    "fwl-oracle",
    "irf-recovery",
    "size-control",
    "transition-separation",
];

/// The response path used by the recovery suite.
pub const RECOVERY_THETA: [f64; 6] = [0.0, -0.034, -0.037, 0.0, 0.0, 0.0];
pub const TRANSITION_LOW: f64 = -0.05;
pub const TRANSITION_HIGH: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// Inclusive pass range; `None` for informational metrics.
    pub bounds: Option<(f64, f64)>,
}

impl Metric {
    fn checked(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bounds: Some((lo, hi)),
        }
    }

    fn info(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bounds: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.bounds.is_none_or(|(lo, hi)| self.value >= lo && self.value <= hi)
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub replications: usize,
    pub metrics: Vec<Metric>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(Metric::passed)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {} ({} replications, {:.2?})", self.suite, self.replications, self.elapsed)?;
        let width = self.metrics.iter().map(|m| m.name.len()).max().unwrap_or(0);
        for m in &self.metrics {
            match m.bounds {
                Some((lo, hi)) => writeln!(
                    f,
                    "  {:<width$}  {:>14.6e}  [{lo:e}, {hi:e}]  {}",
                    m.name,
                    m.value,
                    if m.passed() { "PASS" } else { "FAIL" }
                )?,
                None => writeln!(f, "  {:<width$}  {:>14.6e}", m.name, m.value)?,
            }
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

pub fn default_reps(suite: &str) -> Option<usize> {
    Some(match suite {
        "ols-oracle" | "cluster-oracle" | "fwl-oracle" => 20,
        "fe-oracle" => 50,
        "irf-recovery" | "transition-separation" => 200,
        "size-control" => 500,
        _ => return None,
    })
}

/// Runs a suite by name with `reps` replications (or its default).
pub fn run_suite(suite: &str, reps: Option<usize>, seed: u64) -> Result<SuiteReport> {
    let reps = match (reps, default_reps(suite)) {
        (_, None) => {
            return Err(Error::Config(format!("unknown suite `{suite}` (known: {})", SUITES.join(", "))))
        }
        (Some(r), _) => r,
        (None, Some(d)) => d,
    };
    if reps == 0 {
        return Err(Error::Config("replication count must be positive".into()));
    }
    let start = Instant::now();
    let metrics = match suite {
        "ols-oracle" => ols_oracle(reps, seed)?,
        "fe-oracle" => fe_oracle(reps, seed)?,
        "cluster-oracle" => cluster_oracle(reps, seed)?,
        "fwl-oracle" => fwl_oracle(reps, seed)?,
        "irf-recovery" => irf_recovery(reps, seed)?,
        "size-control" => size_control(reps, seed)?,
        "transition-separation" => transition_separation(reps, seed)?,
        _ => unreachable!("checked above"),
    };
    Ok(SuiteReport {
        suite: suite.to_string(),
        replications: reps,
        metrics,
        elapsed: start.elapsed(),
    })
}

fn rng(seed: u64, rep: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(rep as u64))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{j}")).collect()
}

fn replicate<T: Send>(reps: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..reps).into_par_iter().map(f).collect()
}

fn ols_oracle(reps: usize, seed: u64) -> Result<Vec<Metric>> {
    let gaps = replicate(reps, |r| {
        let mut rng = rng(seed, r);
        let n = rng.random_range(20..=200);
        let k = rng.random_range(1..=6);
        let columns: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| gaussian(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| columns.iter().enumerate().map(|(j, c)| (j as f64 + 1.0) * c[i]).sum::<f64>() + gaussian(&mut rng))
            .collect();
        let design = DesignMatrix::new(names(k), columns, y.clone())?;
        let fit = ols_fit(&design)?;
        let oracle = oracle::normal_equations(&design.to_matrix(), &y)?;
        let coef_gap = fit
            .coefficients
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);

        // A duplicated column must be flagged and the rest left unchanged.
        let mut dup = design.clone();
        dup.names.push("dup".into());
        dup.columns.push(design.columns[0].clone());
        let dup_fit = ols_fit(&dup)?;
        let flagged = dup_fit.dropped.len() == 1;
        let dup_gap = dup_fit
            .coefficients
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);
        Ok((coef_gap.max(dup_gap), flagged))
    })?;
    let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let flagged = gaps.iter().filter(|g| g.1).count() as f64 / gaps.len() as f64;
    Ok(vec![
        Metric::checked("max_relative_coefficient_gap", worst, 0.0, 1e-8),
        Metric::checked("collinear_column_flagged_share", flagged, 1.0, 1.0),
    ])
}

/// A random unbalanced two-way panel design with up to `max_drop` of its
/// cells deleted.
fn random_panel_design(rng: &mut ChaCha8Rng, max_entities: usize, max_periods: usize, max_drop: f64) -> Result<DesignMatrix> {
    let ne = rng.random_range(5..=max_entities);
    let nt = rng.random_range(5..=max_periods);
    let drop = rng.random_range(0.0..=max_drop);
    let k = 3;
    let alpha: Vec<f64> = (0..ne).map(|_| 2.0 * gaussian(rng)).collect();
    let gamma: Vec<f64> = (0..nt).map(|_| gaussian(rng)).collect();
    let (mut entities, mut periods) = (Vec::new(), Vec::new());
    let mut columns = vec![Vec::new(); k];
    let mut y = Vec::new();
    for (i, a) in alpha.iter().enumerate() {
        for (t, g) in gamma.iter().enumerate() {
            if rng.random_bool(drop) {
                continue;
            }
            let mut yi = a + g + 0.5 * gaussian(rng);
            for (j, c) in columns.iter_mut().enumerate() {
                let x = gaussian(rng) + 0.5 * a - 0.3 * g;
                yi += (j as f64 - 1.0) * x;
                c.push(x);
            }
            entities.push(i);
            periods.push(t as i64);
            y.push(yi);
        }
    }
    DesignMatrix::new(names(k), columns, y)?.with_panel_index(entities, periods)
}

fn fe_oracle(reps: usize, seed: u64) -> Result<Vec<Metric>> {
    let gaps = replicate(reps, |r| {
        let mut rng = rng(seed, r);
        let raw = random_panel_design(&mut rng, 20, 15, 0.15)?;
        let lsdv = lsdv_fit(&raw, LsdvOptions::default())?;

        let mut data: Vec<Vec<f64>> = std::iter::once(raw.response.clone()).chain(raw.columns.iter().cloned()).collect();
        let groups = FeGroups::from_labels(&raw.entities, &raw.periods);
        demean_columns(&groups, &mut data, &DemeanOptions::default())?;
        let response = data.remove(0);
        let within = DesignMatrix::new(raw.names.clone(), data, response)?
            .with_panel_index(raw.entities.clone(), raw.periods.clone())?;
        let fit = ols_fit(&within)?;
        fit.names
            .iter()
            .map(|n| Ok((fit.coefficient(n)? - lsdv.coefficient(n)?).abs()))
            .try_fold(0.0f64, |acc, g: Result<f64>| Ok(acc.max(g?)))
    })?;
    Ok(vec![Metric::checked(
        "max_coefficient_gap_vs_lsdv",
        gaps.into_iter().fold(0.0, f64::max),
        0.0,
        1e-8,
    )])
}

fn cluster_oracle(reps: usize, seed: u64) -> Result<Vec<Metric>> {
    let gaps = replicate(reps, |r| {
        let mut rng = rng(seed, r);
        let n = rng.random_range(30..=150);
        let k = rng.random_range(1..=5);
        let g = rng.random_range(3..=20);
        let clusters: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
        let shared: Vec<f64> = (0..g).map(|_| gaussian(&mut rng)).collect();
        let columns: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| gaussian(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| columns.iter().map(|c| c[i]).sum::<f64>() + shared[clusters[i]] + gaussian(&mut rng))
            .collect();

        let design = DesignMatrix::new(names(k), columns, y)?.with_clusters(clusters.clone())?;
        let fit = ols_fit(&design)?;
        let x = design.to_matrix();
        let cov = fit.covariance.as_ref().ok_or(Error::InsufficientClusters(fit.n_clusters))?;
        let brute = oracle::brute_force_cr1(&x, &fit.residuals, &design.clusters)?;
        let cr1_gap = oracle::max_abs_diff(cov, &brute);

        let singleton = design.clone().with_clusters((0..n).collect())?;
        let fit = ols_fit(&singleton)?;
        let cov: &DMatrix<f64> = fit.covariance.as_ref().ok_or(Error::InsufficientClusters(fit.n_clusters))?;
        let hc1_gap = oracle::max_abs_diff(cov, &oracle::hc1(&x, &fit.residuals)?);
        Ok((cr1_gap, hc1_gap))
    })?;
    Ok(vec![
        Metric::checked("max_gap_vs_brute_force_cr1", gaps.iter().map(|g| g.0).fold(0.0, f64::max), 0.0, 1e-12),
        Metric::checked("max_gap_singletons_vs_hc1", gaps.iter().map(|g| g.1).fold(0.0, f64::max), 0.0, 1e-12),
    ])
}

fn fwl_oracle(reps: usize, seed: u64) -> Result<Vec<Metric>> {
    let gaps = replicate(reps, |r| {
        let mut pick = rng(seed, r);
        let dgp = DgpSpec {
            n_entities: pick.random_range(15..=40),
            n_periods: pick.random_range(15..=25),
            shocks: Shocks::Probability(0.1),
            seed: pick.random(),
            ..DgpSpec::default()
        };
        let k = pick.random_range(0..=5);
        let sim = generate(&dgp)?;
        let events = build_dummies(&sim.events, &sim.panel, PercentileRule::Linear)?;
        let lp = LpSpec::new(VariableSpec::level(OUTCOME));
        let design = build_baseline_design(&sim.panel, &events, &lp, k)?;
        let full = ols_fit(&design)?.coefficient(SHOCK)?;

        let d_idx = design.names.iter().position(|n| n == SHOCK).expect("shock column");
        let others: Vec<usize> = (0..design.names.len()).filter(|&j| j != d_idx).collect();
        let z = DMatrix::from_fn(design.n_obs(), others.len(), |i, j| design.columns[others[j]][i]);
        let d = &design.columns[d_idx];
        let gamma = oracle::normal_equations(&z, d)?;
        let rd = oracle::residuals(&z, d, &gamma);
        let num: f64 = rd.iter().zip(&design.response).map(|(a, b)| a * b).sum();
        let den: f64 = rd.iter().map(|a| a * a).sum();
        Ok((full - num / den).abs())
    })?;
    Ok(vec![Metric::checked(
        "max_gap_full_vs_partialled",
        gaps.into_iter().fold(0.0, f64::max),
        0.0,
        1e-8,
    )])
}

/// Per-horizon estimates and 95% coverage indicators for the baseline DGP.
pub fn recovery_draws(reps: usize, seed: u64, theta: &[f64]) -> Result<Vec<Vec<(f64, bool, f64)>>> {
    let horizons = theta.len() - 1;
    replicate(reps, |r| {
        let dgp = DgpSpec {
            theta: theta.to_vec(),
            seed: rng(seed, r).random(),
            ..DgpSpec::default()
        };
        let sim = generate(&dgp)?;
        let events = build_dummies(&sim.events, &sim.panel, PercentileRule::Linear)?;
        let lp = LpSpec {
            horizons,
            ..LpSpec::new(VariableSpec::level(OUTCOME))
        };
        let irf = estimate_irf(&sim.panel, &events, &lp, &Baseline)?;
        Ok(irf
            .entries
            .iter()
            .map(|e| {
                let ci = &e.effects[0].interval;
                let truth = theta[e.horizon];
                (ci.estimate, ci.ci_low <= truth && truth <= ci.ci_high, ci.p_value)
            })
            .collect())
    })
}

fn irf_recovery(reps: usize, seed: u64) -> Result<Vec<Metric>> {
    let draws = recovery_draws(reps, seed, &RECOVERY_THETA)?;
    let mut metrics = Vec::new();
    let mut covered = 0usize;
    for (k, truth) in RECOVERY_THETA.iter().enumerate() {
        let mean = draws.iter().map(|d| d[k].0).sum::<f64>() / reps as f64;
        let hits = draws.iter().filter(|d| d[k].1).count();
        covered += hits;
        metrics.push(Metric::checked(format!("bias_k{k}"), mean - truth, -0.005, 0.005));
        metrics.push(Metric::info(format!("coverage_k{k}"), hits as f64 / reps as f64));
    }
    let pooled = covered as f64 / (reps * RECOVERY_THETA.len()) as f64;
    metrics.push(Metric::checked("coverage_pooled", pooled, 0.93, 0.97));
    Ok(metrics)
}

fn size_control(reps: usize, seed: u64) -> Result<Vec<Metric>> {
    let draws = recovery_draws(reps, seed, &[0.0; 6])?;
    let rejections = draws.iter().filter(|d| d[1].2 < 0.05).count();
    let mut metrics = vec![Metric::checked(
        "rejection_rate_k1",
        rejections as f64 / reps as f64,
        0.02,
        0.09,
    )];
    for k in [0, 2, 3, 4, 5] {
        let r = draws.iter().filter(|d| d[k].2 < 0.05).count();
        metrics.push(Metric::info(format!("rejection_rate_k{k}"), r as f64 / reps as f64));
    }
    Ok(metrics)
}

/// (β_L, β_H) per replication and horizon under the state-dependent DGP.
pub fn transition_draws(reps: usize, seed: u64, horizons: usize) -> Result<Vec<Vec<(f64, f64)>>> {
    replicate(reps, |r| {
        let dgp = DgpSpec {
            state: Some(StateDependence {
                theta_low: vec![TRANSITION_LOW],
                theta_high: vec![TRANSITION_HIGH],
                sigma: DEFAULT_SIGMA,
            }),
            seed: rng(seed, r).random(),
            ..DgpSpec::default()
        };
        let sim = generate(&dgp)?;
        let events = build_dummies(&sim.events, &sim.panel, PercentileRule::Linear)?;
        let lp = LpSpec {
            horizons,
            ..LpSpec::new(VariableSpec::level(OUTCOME)).with_controls(Vec::new())
        };
        let spec = Transition::new(GROWTH, DEFAULT_SIGMA, Standardization::Pooled)?;
        let irf = estimate_irf(&sim.panel, &events, &lp, &spec)?;
        irf.entries
            .iter()
            .map(|e| {
                let get = |name| {
                    e.effect(name)
                        .map(|x| x.interval.estimate)
                        .ok_or_else(|| Error::UnknownColumn(name.to_string()))
                };
                Ok((get(EFFECT_LOW)?, get(EFFECT_HIGH)?))
            })
            .collect()
    })
}

fn transition_separation(reps: usize, seed: u64) -> Result<Vec<Metric>> {
    let horizons = 5;
    let draws = transition_draws(reps, seed, horizons)?;
    let mut metrics = Vec::new();
    for k in 0..=horizons {
        let ordered = draws.iter().filter(|d| d[k].0 < d[k].1).count() as f64 / reps as f64;
        let mean_l = draws.iter().map(|d| d[k].0).sum::<f64>() / reps as f64;
        let mean_h = draws.iter().map(|d| d[k].1).sum::<f64>() / reps as f64;
        metrics.push(Metric::checked(format!("ordered_share_k{k}"), ordered, 0.95, 1.0));
        metrics.push(Metric::checked(format!("bias_low_k{k}"), mean_l - TRANSITION_LOW, -0.01, 0.01));
        metrics.push(Metric::checked(format!("bias_high_k{k}"), mean_h - TRANSITION_HIGH, -0.01, 0.01));
    }
    Ok(metrics)
}
