//! Textbook reference computations, written for transparency rather than
//! speed or stability. Every one works on a dense `n × k` matrix.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn gram_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    (x.transpose() * x)
        .try_inverse()
        .ok_or_else(|| Error::Invariant("oracle design is singular".into()))
}

/// β = (XᵀX)⁻¹ Xᵀy.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let beta = gram_inverse(x)? * (x.transpose() * DVector::from_column_slice(y));
    Ok(beta.iter().copied().collect())
}

pub fn residuals(x: &DMatrix<f64>, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let fitted = x * DVector::from_column_slice(beta);
    y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect()
}

/// c · (XᵀX)⁻¹ [Σ_g X_gᵀ e_g e_gᵀ X_g] (XᵀX)⁻¹ with
/// c = G/(G − 1) · (N − 1)/(N − K), building each cluster block explicitly.
pub fn brute_force_cr1(x: &DMatrix<f64>, e: &[f64], clusters: &[usize]) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, &c) in clusters.iter().enumerate() {
        members.entry(c).or_default().push(row);
    }
    let g = members.len();
    let mut meat = DMatrix::zeros(k, k);
    for rows in members.values() {
        let xg = x.select_rows(rows.iter());
        let eg = DVector::from_iterator(rows.len(), rows.iter().map(|&r| e[r]));
        let block = xg.transpose() * &eg * eg.transpose() * &xg;
        meat += block;
    }
    let bread = gram_inverse(x)?;
    let c = g as f64 / (g as f64 - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    Ok(&bread * meat * &bread * c)
}

/// White's heteroskedasticity-robust covariance with the n/(n − k) scaling.
pub fn hc1(x: &DMatrix<f64>, e: &[f64]) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let mut meat = DMatrix::zeros(k, k);
    for (i, ei) in e.iter().enumerate() {
        let xi = x.row(i).transpose();
        meat += &xi * xi.transpose() * (ei * ei);
    }
    let bread = gram_inverse(x)?;
    Ok(&bread * meat * &bread * (n as f64 / (n as f64 - k as f64)))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}
