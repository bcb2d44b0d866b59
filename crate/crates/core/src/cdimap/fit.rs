//! Maximum-marginal-likelihood hyperparameter fit.
//!
//! The constant mean (GLS) and the signal variance are profiled out
//! analytically; Nelder–Mead searches the remaining two log-parameters
//! `(ln ℓ, ln λ)` with `λ = σ_n² / σ²`, from several deterministic starts.
//! Writing `K = σ² (C_ℓ + λ I)` and `Q = rᵀ (C_ℓ + λ I)⁻¹ r`, the likelihood in
//! `σ²` is unimodal with peak `Q / D`, so clamping that peak into the feasible
//! interval gives the exact constrained optimum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GpHyperparameters, KernelFamily, QuantileDataset, LN_2PI};
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky};
use crate::rng::RandomStream;

/// Box for the fitted parameters (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    /// meters
    pub length_scale: (f64, f64),
    /// Shared by the signal and noise variances, log-gain².
    pub variance: (f64, f64),
}

impl Default for ParameterBox {
    fn default() -> Self {
        Self { length_scale: (0.5, 500.0), variance: (1e-6, 1e3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub bounds: ParameterBox,
    pub kernel: KernelFamily,
    /// Lower bound on `σ_n²`; defaults to the mean sampling variance of the
    /// quantile estimates.
    pub noise_floor: Option<f64>,
    pub max_evaluations: usize,
    /// Stop when the simplex's objective spread falls below this.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            bounds: ParameterBox::default(),
            kernel: KernelFamily::Exponential,
            noise_floor: None,
            max_evaluations: 400,
            tolerance: 1e-9,
        }
    }
}

pub const MIN_TRAINING_POINTS: usize = 3;

pub fn fit_hyperparameters(data: &QuantileDataset) -> Result<GpHyperparameters> {
    fit_hyperparameters_with(data, &FitOptions::default())
}

pub fn fit_hyperparameters_with(data: &QuantileDataset, options: &FitOptions) -> Result<GpHyperparameters> {
    if data.len() < MIN_TRAINING_POINTS {
        return Err(Error::InsufficientData { got: data.len(), need: MIN_TRAINING_POINTS });
    }
    let b = options.bounds;
    if !(b.length_scale.0 > 0.0 && b.length_scale.0 <= b.length_scale.1 && b.variance.0 > 0.0 && b.variance.0 <= b.variance.1)
    {
        return Err(Error::Config(format!("invalid parameter box {b:?}")));
    }
    let floor = options
        .noise_floor
        .unwrap_or_else(|| data.mean_sampling_variance())
        .clamp(b.variance.0, b.variance.1);

    let data = data.canonical();
    let profile = Profile::new(&data, options.kernel, floor, b);

    let y = data.values();
    let ymean = y.iter().sum::<f64>() / y.len() as f64;
    let yvar = y.iter().map(|v| (v - ymean).powi(2)).sum::<f64>() / y.len() as f64;
    let spread = profile.median_distance().clamp(b.length_scale.0, b.length_scale.1);

    let lo = [b.length_scale.0.ln(), profile.ln_ratio_bounds.0];
    let hi = [b.length_scale.1.ln(), profile.ln_ratio_bounds.1];
    let clamp = |p: [f64; 2]| [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])];

    // first start from the data, the rest uniform over the box
    let ratio0 = (floor.max(0.1 * yvar) / yvar.max(b.variance.0)).max(1e-3);
    let mut starts = vec![clamp([spread.ln(), ratio0.ln()])];
    let mut rng = RandomStream::new(options.seed).derive("gp-starts", 0);
    while starts.len() < options.starts.max(1) {
        starts.push([rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])]);
    }

    let mut best: Option<(f64, [f64; 2])> = None;
    for s in &starts {
        let (f, p) = nelder_mead(|p| profile.objective(clamp(p)), *s, 1.0, options.max_evaluations, options.tolerance);
        let p = clamp(p);
        if f.is_finite() && best.is_none_or(|(bf, _)| f < bf) {
            best = Some((f, p));
        }
    }
    let (_, p) = best.ok_or_else(|| Error::Numerical {
        message: "marginal likelihood could not be evaluated at any start".into(),
        condition_estimate: f64::INFINITY,
    })?;
    profile.hyperparameters(p).ok_or_else(|| Error::Numerical {
        message: "optimum is numerically infeasible".into(),
        condition_estimate: f64::INFINITY,
    })
}

struct Profile {
    n: usize,
    dist: Vec<f64>,
    y: Vec<f64>,
    kernel: KernelFamily,
    floor: f64,
    variance: (f64, f64),
    ln_ratio_bounds: (f64, f64),
}

struct Evaluation {
    neg_lml: f64,
    mean: f64,
    signal_variance: f64,
    ratio: f64,
}

impl Profile {
    fn new(data: &QuantileDataset, kernel: KernelFamily, floor: f64, b: ParameterBox) -> Self {
        let (vlo, vhi) = b.variance;
        Self {
            n: data.len(),
            dist: data.distance_matrix(),
            y: data.values(),
            kernel,
            floor,
            variance: b.variance,
            ln_ratio_bounds: ((floor / vhi).ln(), (vhi / vlo).ln()),
        }
    }

    fn median_distance(&self) -> f64 {
        let n = self.n;
        let mut d: Vec<f64> = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| self.dist[i * n + j]).collect();
        if d.is_empty() {
            return 1.0;
        }
        let mid = d.len() / 2;
        *d.select_nth_unstable_by(mid, f64::total_cmp).1
    }

    fn evaluate(&self, p: [f64; 2]) -> Option<Evaluation> {
        let (ell, ratio) = (p[0].exp(), p[1].exp());
        let n = self.n;
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = self.kernel.correlation(self.dist[i * n + j] / ell);
                c[i * n + j] = v;
                c[j * n + i] = v;
            }
            c[i * n + i] = 1.0 + ratio;
        }
        let chol = Cholesky::factor_with_jitter(&c, n).ok()?;
        let mut a = self.y.clone();
        let mut ones = vec![1.0; n];
        chol.forward_in_place(&mut a);
        chol.forward_in_place(&mut ones);
        let bb = dot(&ones, &ones);
        let mean = dot(&ones, &a) / bb;
        let q: f64 = a.iter().zip(&ones).map(|(a, o)| (a - mean * o).powi(2)).sum();

        // σ² ∈ [vlo, vhi] and λσ² ∈ [floor, vhi]
        let s_lo = self.variance.0.max(self.floor / ratio);
        let s_hi = self.variance.1.min(self.variance.1 / ratio);
        if s_lo > s_hi * (1.0 + 1e-12) {
            return None;
        }
        let s = (q / n as f64).clamp(s_lo, s_hi.max(s_lo));
        let log_det = chol.log_det() + n as f64 * s.ln();
        let neg_lml = 0.5 * (q / s + log_det + n as f64 * LN_2PI);
        neg_lml.is_finite().then_some(Evaluation { neg_lml, mean, signal_variance: s, ratio })
    }

    fn objective(&self, p: [f64; 2]) -> f64 {
        self.evaluate(p).map_or(f64::INFINITY, |e| e.neg_lml)
    }

    fn hyperparameters(&self, p: [f64; 2]) -> Option<GpHyperparameters> {
        let e = self.evaluate(p)?;
        Some(GpHyperparameters {
            mean_const: e.mean,
            signal_variance: e.signal_variance,
            length_scale: p[0].exp(),
            noise_variance: (e.ratio * e.signal_variance).max(self.floor),
            kernel: self.kernel,
        })
    }
}

/// Nelder–Mead minimization in two dimensions. Returns the best value and point.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: f64, max_evals: usize, tol: f64) -> (f64, [f64; 2]) {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    let mut simplex: Vec<([f64; 2], f64)> = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]]
        .into_iter()
        .map(|p| (p, f(p)))
        .collect();
    let mut evals = 3;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[2].1);
        let diameter = simplex[1..]
            .iter()
            .map(|(p, _)| (p[0] - simplex[0].0[0]).abs().max((p[1] - simplex[0].0[1]).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= tol * (1.0 + best.abs()) && diameter < 1e-4 {
            break;
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let xr = lerp(centroid, simplex[2].0, -ALPHA);
        let fr = f(xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = lerp(centroid, simplex[2].0, -GAMMA);
            let fe = f(xe);
            evals += 1;
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[2].1 {
                let xc = lerp(centroid, xr, RHO);
                (xc, f(xc))
            } else {
                let xc = lerp(centroid, simplex[2].0, RHO);
                (xc, f(xc))
            };
            evals += 1;
            if fc < simplex[2].1.min(fr) {
                simplex[2] = (xc, fc);
            } else {
                let x_best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(x_best, v.0, SIGMA);
                    v.1 = f(v.0);
                }
                evals += 2;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].1, simplex[0].0)
}
