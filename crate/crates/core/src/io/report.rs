//! Campaign report files.
//!
//! - `report.json`: [`EvalReport`] without the records.
//! - `records.csv`: one row per record. Columns: `d_train`, `repetition`,
//!   `location_id`, `method`, `rate_bps_hz` (bits/s/Hz), `p_out` (linear
//!   probability), `r_eps_bps_hz` (bits/s/Hz), `normalized_throughput`
//!   (dimensionless, empty when undefined).
//! - plot data (`x,y` CSVs and per-location maps), see [`write_plot_data`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ensure_absent, fmt_f64, read_text, write_new};
use crate::channel::SweepValidation;
use crate::error::{Error, Result};
use crate::evaluate::{EvalRecord, EvalReport};
use crate::rateselect::Method;

pub const REPORT_FILE: &str = "report.json";
pub const RECORDS_FILE: &str = "records.csv";
const RECORDS_HEADER: &str = "d_train,repetition,location_id,method,rate_bps_hz,p_out,r_eps_bps_hz,normalized_throughput";

pub fn report_json(report: &EvalReport) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Format(format!("report: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn records_csv(records: &[EvalRecord]) -> Vec<u8> {
    let mut s = String::with_capacity(110 * records.len() + 100);
    s.push_str(RECORDS_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.d_train,
            r.repetition,
            r.location_id,
            r.method,
            fmt_f64(r.rate),
            fmt_f64(r.p_out),
            fmt_f64(r.r_eps),
            r.normalized_throughput.map(fmt_f64).unwrap_or_default()
        );
    }
    s.into_bytes()
}

fn parse_records(text: &str) -> Result<Vec<EvalRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RECORDS_HEADER => {}
        _ => return Err(Error::Format(format!("records: expected header `{RECORDS_HEADER}`"))),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let ln = i + 1;
            let c: Vec<&str> = line.trim().split(',').collect();
            if c.len() != 8 {
                return Err(Error::Format(format!("records line {ln}: expected 8 columns, found {}", c.len())));
            }
            let bad = |name: &str| Error::Format(format!("records line {ln}: bad {name}"));
            let int = |s: &str, name: &str| s.parse::<usize>().map_err(|_| bad(name));
            let float = |s: &str, name: &str| s.parse::<f64>().map_err(|_| bad(name));
            Ok(EvalRecord {
                d_train: int(c[0], "d_train")?,
                repetition: int(c[1], "repetition")?,
                location_id: int(c[2], "location_id")?,
                method: Method::parse(c[3]).ok_or_else(|| bad("method"))?,
                rate: float(c[4], "rate_bps_hz")?,
                p_out: float(c[5], "p_out")?,
                r_eps: float(c[6], "r_eps_bps_hz")?,
                normalized_throughput: if c[7].is_empty() { None } else { Some(float(c[7], "normalized_throughput")?) },
            })
        })
        .collect()
}

/// Writes `report.json` and `records.csv` into `dir`; returns both paths.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let paths = vec![dir.join(REPORT_FILE), dir.join(RECORDS_FILE)];
    ensure_absent(&paths)?;
    write_new(&paths[1], &records_csv(&report.records))?;
    write_new(&paths[0], &report_json(report)?)?;
    Ok(paths)
}

pub fn load_report(dir: &Path) -> Result<EvalReport> {
    let json_path = dir.join(REPORT_FILE);
    let mut report: EvalReport = serde_json::from_str(&read_text(&json_path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", json_path.display())))?;
    report.records = parse_records(&read_text(&dir.join(RECORDS_FILE))?)?;
    Ok(report)
}

fn xy_csv(points: &[crate::evaluate::CurvePoint]) -> Vec<u8> {
    let mut s = String::from("x,y\n");
    for p in points {
        let _ = writeln!(s, "{},{}", fmt_f64(p.x), fmt_f64(p.y));
    }
    s.into_bytes()
}

/// Plot-ready CSVs under `dir`:
///
/// - `outage_cdf_d{D}_{method}.csv`: `x` = outage probability, `y` = empirical CDF
/// - `throughput_cdf_d{D}_{method}.csv`: `x` = normalized throughput, `y` = empirical CDF
/// - `location_meta_d{D}_{method}.csv`: `location_id,x_m,y_m,exceedances,count,meta_probability`
/// - `summary.csv`: one row per training size and method
pub fn write_plot_data(dir: &Path, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for c in &report.outage_cdf {
        files.push((dir.join(format!("outage_cdf_d{}_{}.csv", c.d_train, c.method)), xy_csv(&c.points)));
    }
    for c in &report.throughput_cdf {
        files.push((dir.join(format!("throughput_cdf_d{}_{}.csv", c.d_train, c.method)), xy_csv(&c.points)));
    }
    for set in &report.conditional_meta {
        let mut s = String::from("location_id,x_m,y_m,exceedances,count,meta_probability\n");
        for m in &set.locations {
            let loc = report.locations.iter().find(|l| l.id == m.location_id);
            let (x, y) = loc.map_or((String::new(), String::new()), |l| (fmt_f64(l.x), fmt_f64(l.y)));
            let _ = writeln!(s, "{},{x},{y},{},{},{}", m.location_id, m.exceedances, m.count, fmt_f64(m.probability));
        }
        files.push((dir.join(format!("location_meta_d{}_{}.csv", set.d_train, set.method)), s.into_bytes()));
    }
    let mut s = String::from(
        "d_train,method,records,meta_probability,meta_std_error,mean_normalized_throughput,throughput_excluded\n",
    );
    for m in &report.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.d_train,
            m.method,
            m.records,
            fmt_f64(m.meta_probability),
            fmt_f64(m.meta_std_error),
            m.mean_normalized_throughput.map(fmt_f64).unwrap_or_default(),
            m.throughput_excluded
        );
    }
    files.push((dir.join("summary.csv"), s.into_bytes()));

    let paths: Vec<PathBuf> = files.iter().map(|(p, _)| p.clone()).collect();
    ensure_absent(&paths)?;
    for (p, b) in &files {
        write_new(p, b)?;
    }
    Ok(paths)
}

/// Human-readable campaign summary.
pub fn summary_text(report: &EvalReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "campaign: {} locations x {} samples, epsilon = {}, delta = {}, {} repetitions, M = {}",
        report.n_locations, report.n_samples, c.epsilon, c.delta, c.repetitions, c.baseline_samples
    );
    let _ = writeln!(s, "{:>6}  {:<18} {:>9} {:>16} {:>12}", "D", "method", "records", "meta-prob", "throughput");
    for m in &report.summaries {
        let tp = m.mean_normalized_throughput.map_or("n/a".to_string(), |t| format!("{t:.4}"));
        let _ = writeln!(
            s,
            "{:>6}  {:<18} {:>9} {:>8.4} ± {:.4} {:>12}",
            m.d_train, m.method.as_str(), m.records, m.meta_probability, m.meta_std_error, tp
        );
    }
    for f in report.failures.iter().filter(|f| f.failed > 0) {
        let _ = writeln!(s, "D = {}: {} of {} repetitions failed", f.d_train, f.failed, f.total);
    }
    s
}

/// One row per validated sweep; powers in dB, delays in s, distances in m, bandwidths in Hz.
pub fn validation_csv(rows: &[SweepValidation]) -> Vec<u8> {
    let mut s = String::from(
        "location_id,peak_delay_s,implied_distance_m,geometric_distance_m,peak_power_db,free_space_db,\
         free_space_deviation_db,eta,eta_residual_rms,coherence_bandwidth_hz,span_over_coherence\n",
    );
    for v in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            v.location_id,
            fmt_f64(v.peak_delay_s),
            fmt_f64(v.implied_distance_m),
            v.geometric_distance_m.map(fmt_f64).unwrap_or_default(),
            fmt_f64(v.peak_power_db),
            fmt_f64(v.free_space_db),
            fmt_f64(v.free_space_deviation_db),
            fmt_f64(v.eta),
            fmt_f64(v.eta_residual_rms),
            fmt_f64(v.coherence_bandwidth_hz),
            fmt_f64(v.span_over_coherence)
        );
    }
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{EvalConfig, FailureSummary};
    use crate::scenario::Location;

    fn report() -> EvalReport {
        let mut records = Vec::new();
        for rep in 0..3 {
            for loc in 0..4usize {
                for (method, p) in [(Method::CdiMap, 0.004 * loc as f64), (Method::BaselineRayleigh, 0.02), (Method::Genie, 0.0099)] {
                    records.push(EvalRecord {
                        d_train: 10,
                        repetition: rep,
                        location_id: loc,
                        method,
                        rate: 1.0 / 3.0 + loc as f64,
                        p_out: p,
                        r_eps: 2.0,
                        normalized_throughput: if loc == 3 && method == Method::CdiMap { None } else { Some(0.1 * loc as f64) },
                    });
                }
            }
        }
        let failures = vec![FailureSummary { d_train: 10, failed: 0, total: 3, messages: vec![] }];
        let mut r = EvalReport::from_records(EvalConfig::default(), 4, 100, records, failures).unwrap();
        r.locations = (0..4).map(|i| Location::new(i, i as f64, 0.0, 0.0)).collect();
        r
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = report();
        write_report(dir.path(), &r).unwrap();
        assert_eq!(load_report(dir.path()).unwrap(), r);
        assert!(matches!(write_report(dir.path(), &r), Err(Error::OutputExists(_))));
    }

    #[test]
    fn plot_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = report();
        let paths = write_plot_data(dir.path(), &r).unwrap();
        assert_eq!(paths.len(), 3 + 3 + 3 + 1);
        let map = std::fs::read_to_string(dir.path().join("location_meta_d10_cdi_map.csv")).unwrap();
        assert_eq!(map.lines().count(), 5);
        let cdf = std::fs::read_to_string(dir.path().join("outage_cdf_d10_cdi_map.csv")).unwrap();
        let ys: Vec<f64> = cdf.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] <= w[1]));
        assert!(summary_text(&r).contains("cdi_map"));
    }

    #[test]
    fn bad_records_rejected() {
        assert!(parse_records("nope\n").is_err());
        let bad = format!("{RECORDS_HEADER}\n10,0,1,cdi_map,1.0,0.1,2.0\n");
        assert!(parse_records(&bad).unwrap_err().to_string().contains("line 2"));
    }
}
