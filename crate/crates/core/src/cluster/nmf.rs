//! Non-negative matrix factorization by multiplicative updates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    /// `n_samples × k`.
    pub w: Matrix,
    /// `k × dim`.
    pub h: Matrix,
    /// Squared Frobenius error after each iteration.
    pub reconstruction_history: Vec<f64>,
}

impl NmfFactors {
    pub fn reconstruction(&self) -> Matrix {
        self.w.matmul(&self.h)
    }

    pub fn final_error(&self) -> f64 {
        self.reconstruction_history.last().copied().unwrap_or(f64::NAN)
    }
}

pub fn squared_error(x: &Matrix, w: &Matrix, h: &Matrix) -> f64 {
    let wh = w.matmul(h);
    x.as_slice()
        .iter()
        .zip(wh.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

pub fn squared_norm(x: &Matrix) -> f64 {
    x.as_slice().iter().map(|v| v * v).sum()
}

/// Subtracts the global minimum when it is negative.
pub fn shift_to_min(x: &Matrix) -> Matrix {
    let min = x.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = x.clone();
    if min < 0.0 {
        out.as_mut_slice().iter_mut().for_each(|v| *v -= min);
    }
    out
}

/// `target ← target ∘ num / den`, entries with a zero denominator kept.
fn multiplicative_step(target: &mut Matrix, num: &Matrix, den: &Matrix) {
    for ((t, n), d) in target
        .as_mut_slice()
        .iter_mut()
        .zip(num.as_slice())
        .zip(den.as_slice())
    {
        if *d > 0.0 {
            *t *= n / d;
        }
    }
}

/// Lee–Seung updates for `min ‖X − WH‖²` with `W, H ≥ 0`. Initial entries
/// are uniform in (0, 1) times `sqrt(mean(X) / k)`.
pub fn nmf(x: &Matrix, k: usize, iterations: usize, seed_value: u64) -> Result<NmfFactors> {
    let (n, dim) = (x.rows(), x.cols());
    if k < 1 || k > n.min(dim) {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={} for a {n}x{dim} matrix, got {k}",
            n.min(dim)
        )));
    }
    if let Some(pos) = x.as_slice().iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "NMF input must be finite and non-negative; entry ({}, {}) is {}",
            pos / dim,
            pos % dim,
            x.as_slice()[pos]
        )));
    }
    let mean = x.as_slice().iter().sum::<f64>() / (n * dim) as f64;
    let scale = (mean / k as f64).sqrt();
    let mut rng = seed::rng(seed_value);
    let mut draw = |rows, cols| {
        let data = (0..rows * cols)
            .map(|_| scale * rng.random_range(f64::EPSILON..1.0))
            .collect();
        Matrix::from_vec(rows, cols, data)
    };
    let mut w = draw(n, k)?;
    let mut h = draw(k, dim)?;
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let wt = w.transpose();
        let num_h = wt.matmul(x);
        let den_h = wt.matmul(&w).matmul(&h);
        multiplicative_step(&mut h, &num_h, &den_h);
        let ht = h.transpose();
        let num_w = x.matmul(&ht);
        let den_w = w.matmul(&h.matmul(&ht));
        multiplicative_step(&mut w, &num_w, &den_w);
        history.push(squared_error(x, &w, &h));
    }
    Ok(NmfFactors {
        w,
        h,
        reconstruction_history: history,
    })
}
