//! Chebyshev extreme-point collocation on `[−τ, 0]`.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Nodes `θ_k = τ (cos(kπ/N) − 1) / 2`, so `θ_0 = 0` and `θ_N = −τ`.
pub fn nodes(n: usize, tau: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let x = (k as f64 * PI / n as f64).cos();
            0.5 * tau * (x - 1.0)
        })
        .collect()
}

fn unit_nodes(n: usize) -> Vec<f64> {
    (0..=n).map(|k| (k as f64 * PI / n as f64).cos()).collect()
}

fn bary_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Differentiation matrix on the nodes of [`nodes`].
pub fn diff_matrix(n: usize, tau: f64) -> DMatrix<f64> {
    let x = unit_nodes(n);
    let c: Vec<f64> = (0..=n)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n {
                2.0 * s
            } else {
                s
            }
        })
        .collect();
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c[i] / c[j] / (x[i] - x[j]);
            }
        }
    }
    // negative-sum trick for the diagonal
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    d * (2.0 / tau)
}

/// Barycentric interpolation weights `ℓ_k(θ)` of the node values at `θ ∈ [−τ, 0]`.
pub fn interpolation_row(n: usize, tau: f64, theta: f64) -> Vec<f64> {
    let x = unit_nodes(n);
    let w = bary_weights(n);
    let t = 2.0 * theta / tau + 1.0;
    let mut row = vec![0.0; n + 1];
    if let Some(k) = x.iter().position(|&xk| (t - xk).abs() <= 4.0 * f64::EPSILON) {
        row[k] = 1.0;
        return row;
    }
    let mut total = 0.0;
    for k in 0..=n {
        row[k] = w[k] / (t - x[k]);
        total += row[k];
    }
    row.iter_mut().for_each(|r| *r /= total);
    row
}
