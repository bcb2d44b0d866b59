use std::collections::HashMap;

use rand::seq::index;
use rayon::prelude::*;

use super::{normalized_throughput, EvalConfig, EvalRecord, EvalReport, FailureSummary};
use crate::cdimap::{CdiMap, QuantileDataset, QuantileEntry};
use crate::channel::{fading_samples_from_cfr, CfrSweep, FadingSampleSet};
use crate::error::{Error, Result};
use crate::rateselect::{select_rate_baseline, select_rate_cdi, select_rate_genie, Method};
use crate::rng::RandomStream;
use crate::scenario::{split_train_test, Location};
use crate::stats::{empirical_quantile_log, rate_for_gain, SortedGains};

/// Per-location fading samples: the ground truth a campaign runs against.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    locations: Vec<Location>,
    samples: Vec<FadingSampleSet>,
}

impl World {
    /// `samples[i]` belongs to `locations[i]`.
    pub fn new(locations: Vec<Location>, samples: Vec<FadingSampleSet>) -> Result<Self> {
        if locations.is_empty() || locations.len() != samples.len() {
            return Err(Error::Config(format!(
                "world needs one sample set per location ({} locations, {} sets)",
                locations.len(),
                samples.len()
            )));
        }
        if let Some((l, s)) = locations.iter().zip(&samples).find(|(l, s)| l.id != s.location_id()) {
            return Err(Error::Config(format!("sample set {} paired with location {}", s.location_id(), l.id)));
        }
        let mut ids: Vec<usize> = locations.iter().map(|l| l.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("world has repeated location ids".into()));
        }
        let n = samples[0].len();
        if samples.iter().any(|s| s.len() != n) {
            return Err(Error::Config("all locations must carry the same number of samples".into()));
        }
        Ok(Self { locations, samples })
    }

    pub fn from_sweeps(locations: Vec<Location>, sweeps: &[CfrSweep]) -> Result<Self> {
        let samples = locations
            .iter()
            .zip(sweeps)
            .map(|(l, s)| fading_samples_from_cfr(l.id, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(locations, samples)
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn samples(&self) -> &[FadingSampleSet] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn n_samples(&self) -> usize {
        self.samples[0].len()
    }
}

/// Per-location quantities that do not depend on the repetition.
struct Prepared {
    sorted: SortedGains,
    entry: QuantileEntry,
    genie_rate: f64,
    genie_p_out: f64,
}

fn prepare(world: &World, cfg: &EvalConfig) -> Result<Vec<Prepared>> {
    world
        .locations
        .par_iter()
        .zip(&world.samples)
        .map(|(loc, s)| {
            let sorted = SortedGains::new(s);
            let genie = select_rate_genie(s, cfg.epsilon, cfg.gamma_tx)?;
            let q_hat = empirical_quantile_log(s, cfg.epsilon)?.q_hat;
            let genie_p_out = sorted.outage_count(genie.rate, cfg.gamma_tx) as f64 / s.len() as f64;
            Ok(Prepared {
                entry: QuantileEntry {
                    location: *loc,
                    q_hat,
                    sampling_variance: sorted.quantile_log_variance(cfg.epsilon)?,
                },
                sorted,
                genie_rate: genie.rate,
                genie_p_out,
            })
        })
        .collect()
}

/// Runs `cfg.repetitions` splits for every training size in `cfg.d_list`.
///
/// Repetition `l` of the `k`-th training size draws everything from the
/// substream `("repetition", k << 32 | l)` of `rng`, so results do not depend
/// on scheduling. A repetition whose map cannot be fitted is counted as
/// failed; more than 1% failures for any training size abort the campaign.
pub fn run_campaign(world: &World, cfg: &EvalConfig, rng: &RandomStream) -> Result<EvalReport> {
    let n = world.n_samples();
    cfg.validate(world.len(), n)?;
    let prepared = prepare(world, cfg)?;
    let index_of: HashMap<usize, usize> = world.locations.iter().enumerate().map(|(i, l)| (l.id, i)).collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (k, &d_train) in cfg.d_list.iter().enumerate() {
        let outcomes: Vec<Result<Vec<EvalRecord>>> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|l| {
                let stream = rng.derive("repetition", ((k as u64) << 32) | l as u64);
                repetition(world, cfg, &prepared, &index_of, d_train, l, &stream)
            })
            .collect();
        let mut failed = 0;
        let mut messages = Vec::new();
        for (l, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(r) => records.extend(r),
                Err(e) => {
                    failed += 1;
                    log::warn!("D = {d_train}, repetition {l} failed: {e}");
                    if messages.len() < 10 {
                        messages.push(format!("{l}: {e}"));
                    }
                }
            }
        }
        if failed * 100 > cfg.repetitions {
            return Err(Error::CampaignAborted { d_train, failed, total: cfg.repetitions });
        }
        failures.push(FailureSummary { d_train, failed, total: cfg.repetitions, messages });
    }
    let mut report = EvalReport::from_records(cfg.clone(), world.len(), n, records, failures)?;
    report.locations = world.locations.clone();
    Ok(report)
}

fn repetition(
    world: &World,
    cfg: &EvalConfig,
    prepared: &[Prepared],
    index_of: &HashMap<usize, usize>,
    d_train: usize,
    rep: usize,
    stream: &RandomStream,
) -> Result<Vec<EvalRecord>> {
    let (train, test) = split_train_test(&world.locations, d_train, &mut stream.derive("split", 0))?;
    let entries = train.iter().map(|l| prepared[index_of[&l.id]].entry).collect();
    let data = QuantileDataset::new(entries, cfg.epsilon, world.n_samples())?;
    let map = CdiMap::fit(&data, &cfg.fit)?;

    let n = world.n_samples();
    let m = cfg.baseline_samples;
    let gamma = cfg.gamma_tx;
    let per_location = if cfg.include_genie { 3 } else { 2 };
    let mut out = Vec::with_capacity(test.len() * per_location);
    for loc in &test {
        let i = index_of[&loc.id];
        let p = &prepared[i];
        let record = |method, rate: f64, p_out: f64| EvalRecord {
            d_train,
            repetition: rep,
            location_id: loc.id,
            method,
            rate,
            p_out,
            r_eps: p.genie_rate,
            normalized_throughput: normalized_throughput(rate, p_out, p.genie_rate, p.genie_p_out).ok(),
        };

        let cdi = select_rate_cdi(&map.predict(loc)?, gamma, cfg.delta)?;
        let p_cdi = p.sorted.outage_count(cdi.rate, gamma) as f64 / n as f64;
        out.push(record(Method::CdiMap, cdi.rate, p_cdi));

        // the M probe samples are excluded from the baseline's own evaluation set
        let rho = world.samples[i].rho();
        let picks = index::sample(&mut stream.derive("baseline", loc.id as u64), n, m);
        let snr: Vec<f64> = picks.iter().map(|j| gamma * rho[j]).collect();
        let base = select_rate_baseline(&snr, cfg.epsilon, cfg.delta)?;
        let probe_hits = picks.iter().filter(|&j| rate_for_gain(gamma, rho[j]) <= base.rate).count();
        let p_base = (p.sorted.outage_count(base.rate, gamma) - probe_hits) as f64 / (n - m) as f64;
        out.push(record(Method::BaselineRayleigh, base.rate, p_base));

        if cfg.include_genie {
            out.push(record(Method::Genie, p.genie_rate, p.genie_p_out));
        }
    }
    Ok(out)
}
