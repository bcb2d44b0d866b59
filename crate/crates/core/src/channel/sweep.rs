use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{CfrSweep, Cir, FrequencyGrid, MultipathProfile};
use crate::error::{Error, Result};

/// `e^{−2πj f τ}` with the phase reduced to one cycle before scaling by 2π.
fn rotor(f: f64, tau: f64) -> Complex64 {
    let cycles = f * tau;
    let (s, c) = (TAU * (cycles - cycles.floor())).sin_cos();
    Complex64::new(c, -s)
}

/// Evaluates the tapped-delay line at every grid frequency.
pub fn cfr_from_profile(profile: &MultipathProfile, grid: &FrequencyGrid) -> CfrSweep {
    let values = grid
        .frequencies()
        .map(|f| {
            profile
                .paths()
                .iter()
                .map(|p| p.coefficient * rotor(f, p.delay))
                .sum()
        })
        .collect();
    CfrSweep::new(*grid, values).expect("grid and values have equal length")
}

/// Inverse DFT of the sweep (rectangular window, `1/N` scaling), so a single
/// on-bin path of coefficient `α` yields a tap of magnitude `|α|`.
///
/// Tap `n` sits at delay `n / (N Δf)`.
pub fn cir_from_cfr(sweep: &CfrSweep) -> Result<Cir> {
    let grid = *sweep.grid();
    let n = grid.n_points();
    if sweep.values().len() != n {
        return Err(Error::Format("sweep length does not match its grid".into()));
    }
    let step = grid.step();
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Format("sweep grid is not uniform".into()));
    }
    let mut taps = sweep.values().to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut taps);
    let scale = 1.0 / n as f64;
    taps.iter_mut().for_each(|t| *t *= scale);
    Ok(Cir {
        delay_step: 1.0 / (n as f64 * step),
        taps,
        grid,
    })
}

/// Forward DFT back onto the sweep's frequency grid.
pub fn cfr_from_cir(cir: &Cir) -> CfrSweep {
    let mut values = cir.taps().to_vec();
    FftPlanner::new().plan_fft_forward(values.len()).process(&mut values);
    CfrSweep::new(*cir.source_grid(), values).expect("cir length equals grid size")
}
