//! Least-squares core: pivoted-QR OLS, CR1 cluster-robust covariance,
//! t-based intervals and linear combinations, plus an explicit-dummy LSDV fit.

mod inference;
mod lsdv;
mod qr;

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use inference::{
    cluster_covariance, coefficient_interval, linear_combination, stars, CoefficientInterval, InferenceOptions,
    Reference,
};
pub use lsdv::{lsdv_fit, LsdvOptions};

/// Relative pivot threshold for declaring a column collinear.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A complete-case regression problem. Columns are stored individually so
/// they can be fed to the QR without copying into a dense matrix.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub response: Vec<f64>,
    /// Cluster label per row; clustering is by entity in every LP run.
    pub clusters: Vec<usize>,
    pub entities: Vec<usize>,
    pub periods: Vec<i64>,
    /// Total sum of squares of the response before fixed effects were
    /// absorbed, when the caller has it. Enables the overall R².
    pub raw_tss: Option<f64>,
}

impl DesignMatrix {
    /// A design with every row in its own cluster, entity and period.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if names.len() != columns.len() {
            return Err(Error::InvalidSpec(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some((name, _)) = names.iter().zip(&columns).find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidSpec(format!("column `{name}` length differs from response ({n})")));
        }
        if columns.iter().flatten().chain(&response).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("design contains non-finite values".into()));
        }
        Ok(Self {
            names,
            columns,
            response,
            clusters: (0..n).collect(),
            entities: (0..n).collect(),
            periods: vec![0; n],
            raw_tss: None,
        })
    }

    pub fn with_clusters(mut self, clusters: Vec<usize>) -> Result<Self> {
        if clusters.len() != self.n_obs() {
            return Err(Error::InvalidSpec("cluster labels do not match row count".into()));
        }
        self.clusters = clusters;
        Ok(self)
    }

    /// Attaches (entity, period) labels; clusters default to the entity.
    pub fn with_panel_index(mut self, entities: Vec<usize>, periods: Vec<i64>) -> Result<Self> {
        if entities.len() != self.n_obs() || periods.len() != self.n_obs() {
            return Err(Error::InvalidSpec("panel index does not match row count".into()));
        }
        self.clusters = entities.clone();
        self.entities = entities;
        self.periods = periods;
        Ok(self)
    }

    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_obs(), self.columns.len(), |i, j| self.columns[j][i])
    }
}

#[derive(Debug, Clone)]
pub struct RegressionResult {
    /// Retained regressors, in design order.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Regressors removed by the rank check, in design order.
    pub dropped: Vec<String>,
    /// (XᵀX)⁻¹ over the retained columns.
    pub bread: DMatrix<f64>,
    /// CR1 covariance; `None` with fewer than two clusters or no residual
    /// degrees of freedom.
    pub covariance: Option<DMatrix<f64>>,
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub n_entities: usize,
    pub n_periods: usize,
    pub rss: f64,
    pub tss: f64,
    /// 1 − RSS/TSS on the response as given (within R² after demeaning).
    pub r_squared: f64,
    /// 1 − RSS/TSS with TSS taken before fixed-effect absorption.
    pub r_squared_overall: Option<f64>,
}

impl RegressionResult {
    /// A result assembled from known estimates, e.g. published coefficients.
    pub fn from_estimates(names: Vec<String>, coefficients: Vec<f64>, covariance: DMatrix<f64>, n_clusters: usize) -> Self {
        let k = names.len();
        Self {
            names,
            coefficients,
            dropped: Vec::new(),
            bread: DMatrix::zeros(k, k),
            covariance: Some(covariance),
            residuals: Vec::new(),
            n_obs: 0,
            n_clusters,
            n_entities: n_clusters,
            n_periods: 0,
            rss: 0.0,
            tss: 0.0,
            r_squared: 0.0,
            r_squared_overall: None,
        }
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Ok(i);
        }
        if self.dropped.iter().any(|n| n == name) {
            Err(Error::DroppedColumn(name.to_string()))
        } else {
            Err(Error::UnknownColumn(name.to_string()))
        }
    }

    pub fn coefficient(&self, name: &str) -> Result<f64> {
        Ok(self.coefficients[self.index_of(name)?])
    }

    pub fn std_error(&self, name: &str) -> Result<f64> {
        let i = self.index_of(name)?;
        let v = self
            .covariance
            .as_ref()
            .ok_or(Error::InsufficientClusters(self.n_clusters))?;
        Ok(v[(i, i)].max(0.0).sqrt())
    }
}

/// Ordinary least squares through a column-pivoted QR factorization.
pub fn ols_fit(design: &DesignMatrix) -> Result<RegressionResult> {
    let n = design.n_obs();
    if n == 0 {
        return Err(Error::EmptySample { missing: Vec::new() });
    }
    if design.columns.is_empty() {
        return Err(Error::DegenerateDesign);
    }
    let qr = qr::factor(&design.columns, &design.response, RANK_TOLERANCE);
    if qr.rank == 0 {
        return Err(Error::DegenerateDesign);
    }

    // Pivot order -> design order.
    let mut order: Vec<(usize, usize)> = qr.perm[..qr.rank].iter().enumerate().map(|(k, &j)| (j, k)).collect();
    order.sort_unstable();
    let retained: Vec<usize> = order.iter().map(|&(j, _)| j).collect();
    let pivot_pos: Vec<usize> = order.iter().map(|&(_, k)| k).collect();

    let solved = qr.solve();
    let coefficients: Vec<f64> = pivot_pos.iter().map(|&k| solved[k]).collect();
    let gram_inv = qr.inverse_gram();
    let bread = DMatrix::from_fn(qr.rank, qr.rank, |a, b| gram_inv[(pivot_pos[a], pivot_pos[b])]);

    let mut residuals = design.response.clone();
    for (&j, &b) in retained.iter().zip(&coefficients) {
        for (r, x) in residuals.iter_mut().zip(&design.columns[j]) {
            *r -= b * x;
        }
    }
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = design.response.iter().sum::<f64>() / n as f64;
    let tss: f64 = design.response.iter().map(|y| (y - mean) * (y - mean)).sum();

    let names: Vec<String> = retained.iter().map(|&j| design.names[j].clone()).collect();
    let retained_set: BTreeSet<usize> = retained.iter().copied().collect();
    let dropped = (0..design.names.len())
        .filter(|j| !retained_set.contains(j))
        .map(|j| design.names[j].clone())
        .collect();

    let mut result = RegressionResult {
        names,
        coefficients,
        dropped,
        bread,
        covariance: None,
        residuals,
        n_obs: n,
        n_clusters: count_distinct(&design.clusters),
        n_entities: count_distinct(&design.entities),
        n_periods: count_distinct(&design.periods),
        rss,
        tss,
        r_squared: r_squared(rss, tss),
        r_squared_overall: design.raw_tss.map(|raw| r_squared(rss, raw)),
    };
    if result.n_clusters >= 2 && n > qr.rank {
        result.covariance = Some(inference::sandwich(&result, design, &retained));
    }
    Ok(result)
}

fn r_squared(rss: f64, tss: f64) -> f64 {
    if tss > 0.0 {
        1.0 - rss / tss
    } else {
        0.0
    }
}

fn count_distinct<T: Ord + Copy>(values: &[T]) -> usize {
    values.iter().copied().collect::<BTreeSet<_>>().len()
}
