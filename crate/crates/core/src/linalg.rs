//! Dense symmetric positive-definite factorization for the small systems used
//! here (at most a few hundred unknowns). Matrices are row-major `Vec<f64>`.

use crate::error::{Error, Result};

/// Diagonal jitter ladder tried after a plain factorization fails.
pub const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Lower triangle, row-major; entries above the diagonal are zero.
    l: Vec<f64>,
    jitter: f64,
}

enum Attempt {
    Ok(Vec<f64>),
    Failed { condition_estimate: f64 },
}

/// Dot product with four independent accumulators (lets the compiler vectorize).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn try_factor(a: &[f64], n: usize, jitter: f64) -> Attempt {
    let mut l = vec![0.0; n * n];
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for j in 0..n {
        let row_j = j * n;
        let lj = &l[row_j..row_j + j];
        let d = a[row_j + j] + jitter - dot(lj, lj);
        if !(d > 0.0) || !d.is_finite() {
            let condition_estimate = if dmin.is_finite() { dmax / dmin.max(f64::MIN_POSITIVE) } else { f64::INFINITY };
            return Attempt::Failed { condition_estimate };
        }
        dmin = dmin.min(d);
        dmax = dmax.max(d);
        let djj = d.sqrt();
        l[row_j + j] = djj;
        for i in (j + 1)..n {
            let row_i = i * n;
            let s = a[row_i + j] - dot(&l[row_i..row_i + j], &l[row_j..row_j + j]);
            l[row_i + j] = s / djj;
        }
    }
    Attempt::Ok(l)
}

impl Cholesky {
    /// Plain factorization, no jitter.
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        Self::factor_with_ladder(a, n, &[])
    }

    /// Factorizes `a`, retrying with each jitter in `JITTER_LADDER` on failure.
    pub fn factor_with_jitter(a: &[f64], n: usize) -> Result<Self> {
        Self::factor_with_ladder(a, n, &JITTER_LADDER)
    }

    fn factor_with_ladder(a: &[f64], n: usize, ladder: &[f64]) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix shape mismatch");
        let mut worst = 0.0f64;
        for &jitter in std::iter::once(&0.0).chain(ladder) {
            match try_factor(a, n, jitter) {
                Attempt::Ok(l) => {
                    if jitter > 0.0 {
                        log::debug!("cholesky succeeded with jitter {jitter:e}");
                    }
                    return Ok(Self { n, l, jitter });
                }
                Attempt::Failed { condition_estimate } => worst = worst.max(condition_estimate),
            }
        }
        Err(Error::Numerical {
            message: format!("{n}x{n} matrix is not positive definite"),
            condition_estimate: worst,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Jitter that was added to the diagonal to obtain the factor.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Squared ratio of the extreme pivots.
    pub fn condition_estimate(&self) -> f64 {
        let diag = (0..self.n).map(|i| self.l(i, i));
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        (hi / lo).powi(2)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l(i, i).ln()).sum::<f64>()
    }

    /// Solves `L x = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = dot(row, &b[..i]);
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn backward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    /// `L z`, used to colour white noise.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| self.l[i * n..i * n + i + 1].iter().zip(z).map(|(l, v)| l * v).sum())
            .collect()
    }
}
