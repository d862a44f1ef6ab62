use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::{DesignMatrix, RegressionResult};
use crate::error::{Error, Result};

/// Reference distribution for intervals and p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reference {
    /// Student t with G − 1 degrees of freedom (G = number of clusters).
    #[default]
    StudentT,
    Normal,
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" | "student-t" => Ok(Reference::StudentT),
            "normal" => Ok(Reference::Normal),
            other => Err(Error::Config(format!("unknown reference distribution `{other}` (expected t or normal)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceOptions {
    pub level: f64,
    pub reference: Reference,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            reference: Reference::StudentT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientInterval {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

/// Significance marks: `***` p < 0.01, `**` p < 0.05, `*` p < 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// CR1 sandwich: c · B (Σ_g s_g s_gᵀ) B with s_g = X_gᵀ ε̂_g and
/// c = G/(G − 1) · (N − 1)/(N − K).
pub(crate) fn sandwich(result: &RegressionResult, design: &DesignMatrix, retained: &[usize]) -> DMatrix<f64> {
    let k = retained.len();
    let mut labels: Vec<usize> = design.clusters.clone();
    labels.sort_unstable();
    labels.dedup();
    let g = labels.len();

    let mut scores = vec![0.0; g * k];
    for (row, (&cluster, &e)) in design.clusters.iter().zip(&result.residuals).enumerate() {
        let c = labels.binary_search(&cluster).expect("label present");
        let s = &mut scores[c * k..(c + 1) * k];
        for (slot, &j) in s.iter_mut().zip(retained) {
            *slot += design.columns[j][row] * e;
        }
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in scores.chunks(k) {
        for a in 0..k {
            for b in a..k {
                meat[(a, b)] += s[a] * s[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }
    let n = result.n_obs as f64;
    let (gf, kf) = (g as f64, k as f64);
    let c = gf / (gf - 1.0) * (n - 1.0) / (n - kf);
    let mut v = &result.bread * meat * &result.bread * c;
    // Symmetrize away rounding so downstream eigen checks see an exact mirror.
    for a in 0..k {
        for b in 0..a {
            let m = 0.5 * (v[(a, b)] + v[(b, a)]);
            v[(a, b)] = m;
            v[(b, a)] = m;
        }
    }
    v
}

/// Recomputes the CR1 covariance of `result` from the design it was fitted on.
pub fn cluster_covariance(result: &RegressionResult, design: &DesignMatrix) -> Result<DMatrix<f64>> {
    if result.n_clusters < 2 {
        return Err(Error::InsufficientClusters(result.n_clusters));
    }
    if result.n_obs <= result.names.len() {
        return Err(Error::InvalidSpec("no residual degrees of freedom for a covariance".into()));
    }
    let retained = result
        .names
        .iter()
        .map(|name| {
            design
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sandwich(result, design, &retained))
}

fn interval(estimate: f64, se: f64, clusters: usize, opts: &InferenceOptions) -> Result<CoefficientInterval> {
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidSpec(format!("confidence level {} outside (0, 1)", opts.level)));
    }
    let upper = 1.0 - (1.0 - opts.level) / 2.0;
    let (crit, tail) = match opts.reference {
        Reference::StudentT => {
            let df = clusters.saturating_sub(1).max(1) as f64;
            let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Invariant(e.to_string()))?;
            (t.inverse_cdf(upper), Box::new(move |x: f64| t.sf(x)) as Box<dyn Fn(f64) -> f64>)
        }
        Reference::Normal => {
            let z = Normal::standard();
            (z.inverse_cdf(upper), Box::new(move |x: f64| z.sf(x)) as Box<dyn Fn(f64) -> f64>)
        }
    };
    let p_value = if se > 0.0 {
        (2.0 * tail((estimate / se).abs())).min(1.0)
    } else if estimate != 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(CoefficientInterval {
        estimate,
        std_error: se,
        ci_low: estimate - crit * se,
        ci_high: estimate + crit * se,
        p_value,
        stars: stars(p_value),
    })
}

pub fn coefficient_interval(result: &RegressionResult, column: &str, opts: &InferenceOptions) -> Result<CoefficientInterval> {
    linear_combination(result, &[(column, 1.0)], opts)
}

/// Estimate and interval for Σ w_j β_j, with variance wᵀVw.
pub fn linear_combination(result: &RegressionResult, weights: &[(&str, f64)], opts: &InferenceOptions) -> Result<CoefficientInterval> {
    let v = result
        .covariance
        .as_ref()
        .ok_or(Error::InsufficientClusters(result.n_clusters))?;
    let idx: Vec<(usize, f64)> = weights
        .iter()
        .map(|(name, w)| Ok((result.index_of(name)?, *w)))
        .collect::<Result<_>>()?;
    let estimate: f64 = idx.iter().map(|&(i, w)| w * result.coefficients[i]).sum();
    let mut var = 0.0;
    for &(a, wa) in &idx {
        for &(b, wb) in &idx {
            var += wa * wb * v[(a, b)];
        }
    }
    interval(estimate, var.max(0.0).sqrt(), result.n_clusters, opts)
}
