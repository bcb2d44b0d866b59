use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{cir_from_cfr, CfrSweep, Cir, FadingSampleSet, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::scenario::{distance, Location};

/// Absolute CIR tap power above which a tap counts towards the delay spread.
pub const DEFAULT_PEAK_THRESHOLD_DB: f64 = -110.0;

/// `ρ_i = |H(f_i)|²` at every sweep point.
pub fn fading_samples_from_cfr(location_id: usize, sweep: &CfrSweep) -> Result<FadingSampleSet> {
    FadingSampleSet::new(location_id, sweep.values().iter().map(|h| h.norm_sqr()).collect())
}

/// `1 / D` where `D` is the max-excess delay spread between the first and last
/// taps whose power exceeds `threshold_db`. A single tap gives `+∞`.
pub fn coherence_bandwidth(cir: &Cir, threshold_db: f64) -> Result<f64> {
    let powers = cir.powers_db();
    let mut above = powers.iter().enumerate().filter(|(_, p)| **p > threshold_db).map(|(i, _)| i);
    let first = above
        .next()
        .ok_or_else(|| Error::Analysis(format!("no CIR taps above {threshold_db} dB")))?;
    let last = above.last().unwrap_or(first);
    let spread = cir.delay(last) - cir.delay(first);
    Ok(if spread > 0.0 { 1.0 / spread } else { f64::INFINITY })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossFit {
    /// `ρ ∝ f^{−η}`.
    pub eta: f64,
    /// RMS residual of the log-log fit, in nepers of power.
    pub residual_rms: f64,
}

/// Least-squares slope of `ln ρ` against `ln f`, negated.
pub fn fit_pathloss_exponent(sweep: &CfrSweep) -> Result<PathlossFit> {
    let grid = sweep.grid();
    let n = grid.n_points();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for (i, h) in sweep.values().iter().enumerate() {
        let rho = h.norm_sqr();
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Analysis(format!(
                "gain at {:.6e} Hz is {rho}; pathloss fit needs positive gains",
                grid.frequency(i)
            )));
        }
        xs.push(grid.frequency(i).ln());
        ys.push(rho.ln());
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum();
    Ok(PathlossFit {
        eta: -slope,
        residual_rms: (ss / nf).sqrt(),
    })
}

/// `20 log10(c / (4π d f_c))` in dB (negative for any realistic link).
pub fn free_space_loss(distance_m: f64, f_c: f64) -> Result<f64> {
    if !(distance_m > 0.0 && f_c > 0.0) {
        return Err(Error::Domain(format!(
            "free-space loss needs positive distance and frequency, got d = {distance_m}, f = {f_c}"
        )));
    }
    Ok(20.0 * (SPEED_OF_LIGHT / (4.0 * PI * distance_m * f_c)).log10())
}

/// Data checks for one measured (or synthesized) sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepValidation {
    pub location_id: usize,
    pub peak_delay_s: f64,
    pub implied_distance_m: f64,
    pub geometric_distance_m: Option<f64>,
    pub peak_power_db: f64,
    pub free_space_db: f64,
    /// Peak power minus free-space loss at the implied distance, dB.
    pub free_space_deviation_db: f64,
    pub eta: f64,
    pub eta_residual_rms: f64,
    pub coherence_bandwidth_hz: f64,
    /// Sweep span divided by coherence bandwidth.
    pub span_over_coherence: f64,
}

pub fn validate_sweep(
    location: &Location,
    sweep: &CfrSweep,
    bs: Option<&Location>,
    threshold_db: f64,
) -> Result<SweepValidation> {
    let cir = cir_from_cfr(sweep)?;
    let peak = cir.peak_index();
    let peak_delay = cir.delay(peak);
    let implied = peak_delay * SPEED_OF_LIGHT;
    let peak_power_db = 20.0 * cir.taps()[peak].norm().log10();
    let fsl = free_space_loss(implied.max(f64::MIN_POSITIVE), sweep.grid().center())?;
    let pl = fit_pathloss_exponent(sweep)?;
    let bc = coherence_bandwidth(&cir, threshold_db)?;
    Ok(SweepValidation {
        location_id: location.id,
        peak_delay_s: peak_delay,
        implied_distance_m: implied,
        geometric_distance_m: bs.map(|b| distance(location, b)),
        peak_power_db,
        free_space_db: fsl,
        free_space_deviation_db: peak_power_db - fsl,
        eta: pl.eta,
        eta_residual_rms: pl.residual_rms,
        coherence_bandwidth_hz: bc,
        span_over_coherence: sweep.grid().span() / bc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cfr_from_profile, FrequencyGrid, MultipathProfile, Path};
    use num_complex::Complex64;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(2e9, 10e9, 8001).unwrap()
    }

    #[test]
    fn samples_are_squared_magnitudes() {
        let g = FrequencyGrid::new(1e9, 2e9, 3).unwrap();
        let s = CfrSweep::new(g, vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(3.0, 4.0)]).unwrap();
        let f = fading_samples_from_cfr(7, &s).unwrap();
        assert_eq!(f.rho(), &[4.0, 1.0, 25.0]);
        assert_eq!(f.location_id(), 7);
    }

    #[test]
    fn sweep_of_8001_points_gives_8001_samples() {
        let p = MultipathProfile::new(vec![Path { coefficient: Complex64::new(1e-4, 0.0), delay: 100e-9 }]).unwrap();
        let f = fading_samples_from_cfr(0, &cfr_from_profile(&p, &grid())).unwrap();
        assert_eq!(f.len(), 8001);
    }

    #[test]
    fn all_zero_sweep_rejected() {
        let g = FrequencyGrid::new(1e9, 2e9, 4).unwrap();
        let s = CfrSweep::new(g, vec![Complex64::new(0.0, 0.0); 4]).unwrap();
        assert!(fading_samples_from_cfr(0, &s).is_err());
        assert!(matches!(fit_pathloss_exponent(&s), Err(Error::Analysis(_))));
    }

    #[test]
    fn coherence_bandwidth_examples() {
        let g = grid();
        // taps at bins 0 and 5000: span 5000 / (8001 · 1 MHz)
        let mut taps = vec![Complex64::new(0.0, 0.0); 8001];
        taps[10] = Complex64::new(1e-3, 0.0);
        taps[5010] = Complex64::new(1e-5, 0.0);
        let cir = Cir { delay_step: 1.0 / (8001.0 * g.step()), taps: taps.clone(), grid: g };
        let bc = coherence_bandwidth(&cir, -110.0).unwrap();
        assert!((bc - 8001.0e6 / 5000.0).abs() < 1e-3);

        let mut one = vec![Complex64::new(0.0, 0.0); 8001];
        one[100] = Complex64::new(1e-3, 0.0);
        let cir = Cir { delay_step: 1.25e-10, taps: one, grid: g };
        assert_eq!(coherence_bandwidth(&cir, -110.0).unwrap(), f64::INFINITY);

        let quiet = Cir { delay_step: 1.25e-10, taps: vec![Complex64::new(1e-7, 0.0); 10], grid: g };
        assert!(matches!(coherence_bandwidth(&quiet, -110.0), Err(Error::Analysis(_))));
    }

    #[test]
    fn coherence_bandwidth_reference_spreads() {
        // 625 ns ↔ 1.6 MHz, 30.49 ns ↔ 32.8 MHz, with taps placed on a 0.125 ns axis.
        let g = grid();
        for (bins, expect) in [(5000usize, 1.6e6), (244, 32.8e6)] {
            let mut taps = vec![Complex64::new(0.0, 0.0); 8001];
            taps[3] = Complex64::new(1e-4, 0.0);
            taps[3 + bins] = Complex64::new(1e-5, 0.0);
            let cir = Cir { delay_step: 0.125e-9, taps, grid: g };
            let bc = coherence_bandwidth(&cir, -110.0).unwrap();
            assert!((bc - expect).abs() / expect < 2e-3, "{bc} vs {expect}");
        }
    }

    #[test]
    fn pathloss_exponent_of_exact_power_laws() {
        let g = FrequencyGrid::new(2e9, 10e9, 801).unwrap();
        let sq = CfrSweep::new(g, g.frequencies().map(|f| Complex64::new(3e5 / f, 0.0)).collect()).unwrap();
        let fit = fit_pathloss_exponent(&sq).unwrap();
        assert!((fit.eta - 2.0).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-9);
        let flat = CfrSweep::new(g, vec![Complex64::new(0.0, 2e-4); 801]).unwrap();
        assert!(fit_pathloss_exponent(&flat).unwrap().eta.abs() < 1e-9);
    }

    #[test]
    fn free_space_loss_examples() {
        let l = free_space_loss(43.4, 6e9).unwrap();
        assert!((l + 80.8).abs() < 0.05, "{l}");
        let l10 = free_space_loss(434.0, 6e9).unwrap();
        assert!((l - l10 - 20.0).abs() < 1e-9);
        let l2 = free_space_loss(43.4, 12e9).unwrap();
        assert!((l - l2 - 6.02).abs() < 1e-2);
        assert!(matches!(free_space_loss(0.0, 6e9), Err(Error::Domain(_))));
        assert!(free_space_loss(1.0, -1.0).is_err());
    }

    #[test]
    fn validation_of_los_path() {
        let d = 43.4;
        let bs = Location::new(999, 0.0, 0.0, 0.0);
        let loc = Location::new(35, d, 0.0, 0.0);
        let alpha = 10f64.powf(free_space_loss(d, 6e9).unwrap() / 20.0);
        let p = MultipathProfile::new(vec![Path { coefficient: Complex64::new(alpha, 0.0), delay: d / SPEED_OF_LIGHT }]).unwrap();
        let v = validate_sweep(&loc, &cfr_from_profile(&p, &grid()), Some(&bs), DEFAULT_PEAK_THRESHOLD_DB).unwrap();
        assert!((v.implied_distance_m - d).abs() <= SPEED_OF_LIGHT * 0.125e-9, "{}", v.implied_distance_m);
        assert_eq!(v.geometric_distance_m, Some(d));
        assert!(v.eta.abs() < 1e-9);
        // rectangular-window scalloping loss is at most ~3.92 dB
        assert!(v.free_space_deviation_db <= 1e-6 && v.free_space_deviation_db > -4.0);
    }
}
