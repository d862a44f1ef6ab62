//! Householder QR with column pivoting (largest remaining column norm first).

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub(crate) struct PivotedQr {
    /// Number of columns whose remaining norm cleared the rank threshold.
    pub rank: usize,
    /// `perm[k]` is the original index of the k-th pivot column.
    pub perm: Vec<usize>,
    /// Leading `rank × rank` block of R, in pivot order.
    pub r: DMatrix<f64>,
    /// First `rank` entries of Qᵀy.
    pub qty: Vec<f64>,
}

/// Factorizes the columns of `x` against response `y`. Column k is accepted
/// while its remaining norm exceeds `rel_tol · |R₁₁|`.
pub(crate) fn factor(columns: &[Vec<f64>], y: &[f64], rel_tol: f64) -> PivotedQr {
    let n = y.len();
    let p = columns.len();
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut b = y.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut rank = 0;
    let mut r11 = 0.0;

    for k in 0..n.min(p) {
        let (mut best, mut best_norm) = (k, -1.0);
        for (j, col) in a.iter().enumerate().skip(k) {
            let norm = col[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > best_norm {
                best = j;
                best_norm = norm;
            }
        }
        if k == 0 {
            r11 = best_norm;
        }
        if best_norm <= rel_tol * r11 || best_norm == 0.0 {
            break;
        }
        a.swap(k, best);
        perm.swap(k, best);

        let alpha = if a[k][k] > 0.0 { -best_norm } else { best_norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            let beta = 2.0 / vnorm2;
            for col in a.iter_mut().skip(k + 1) {
                reflect(&mut col[k..], &v, beta);
            }
            reflect(&mut b[k..], &v, beta);
        }
        a[k][k] = alpha;
        for x in a[k][k + 1..].iter_mut() {
            *x = 0.0;
        }
        rank = k + 1;
    }

    let r = DMatrix::from_fn(rank, rank, |i, j| if i <= j { a[j][i] } else { 0.0 });
    PivotedQr {
        rank,
        perm,
        r,
        qty: b[..rank].to_vec(),
    }
}

fn reflect(x: &mut [f64], v: &[f64], beta: f64) {
    let s: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    let s = beta * s;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

impl PivotedQr {
    /// Solves R b = Qᵀy; coefficients are returned in pivot order.
    pub fn solve(&self) -> Vec<f64> {
        back_substitute(&self.r, &self.qty)
    }

    /// (XᵀX)⁻¹ = R⁻¹R⁻ᵀ over the retained columns, in pivot order.
    pub fn inverse_gram(&self) -> DMatrix<f64> {
        let k = self.rank;
        let mut rinv = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            let col = back_substitute(&self.r, &e);
            for (i, v) in col.into_iter().enumerate() {
                rinv[(i, j)] = v;
            }
        }
        &rinv * rinv.transpose()
    }
}

fn back_substitute(r: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let k = rhs.len();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in i + 1..k {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}
