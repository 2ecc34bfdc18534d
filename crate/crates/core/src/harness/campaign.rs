//! Sweeps of protocols over loads, one independent run per point.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;

use super::config::{CampaignConfig, PreamblePool, ProtocolSpec, Scenario};
use super::seed::derive_seed;
use crate::enumeration::{poisson_cap, NoiseModel};
use crate::metrics::{MetricsLedger, Summary};
use crate::protocols::{
    Cra2, Pima, PreambleAssignment, PriorModel, Protocol, Saloha, SimRng, System, Tdma,
};
use crate::scheduling::ScheduleMode;
use crate::traffic::{per_user_rate, TrafficModel};
use crate::{Error, Result};

/// PIA overhead with an unbounded population: request beacon, activity
/// symbol and a one-symbol scheduling beacon.
pub const UNBOUNDED_PIA_OVERHEAD_USD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub protocol: ProtocolSpec,
    pub load: f64,
    pub seed: u64,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub scenario: Scenario,
    pub points: Vec<PointResult>,
}

impl CampaignResult {
    pub fn point(&self, protocol: ProtocolSpec, load: f64) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.protocol == protocol && p.load == load)
    }

    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario",
            "protocol",
            "load",
            "eta_bar",
            "eta_se",
            "d_bar_usd",
            "d_bar_se",
            "p_drop",
            "p_drop_se",
            "d_burst_usd",
            "d_burst_se",
            "n_frames",
            "n_generated",
            "n_delivered",
            "n_dropped",
            "seed",
        ])?;
        for p in &self.points {
            let s = &p.summary;
            w.write_record([
                self.scenario.to_string(),
                p.protocol.to_string(),
                p.load.to_string(),
                opt(s.eta_bar),
                opt(s.eta_se),
                opt(s.d_bar_usd),
                opt(s.d_bar_se),
                opt(s.p_drop),
                opt(s.p_drop_se),
                opt(s.d_burst_usd),
                opt(s.d_burst_se),
                s.frames.to_string(),
                s.generated.to_string(),
                s.delivered.to_string(),
                s.dropped.to_string(),
                p.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_eccdf_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario",
            "protocol",
            "load",
            "value_usd",
            "tail_probability",
        ])?;
        for p in &self.points {
            for (x, tail) in &p.summary.eccdf {
                w.write_record([
                    self.scenario.to_string(),
                    p.protocol.to_string(),
                    p.load.to_string(),
                    x.to_string(),
                    tail.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `results.csv` and `eccdf.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_results_csv(std::fs::File::create(dir.join("results.csv"))?)?;
        self.write_eccdf_csv(std::fs::File::create(dir.join("eccdf.csv"))?)?;
        Ok(())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Traffic of a sweep point: `load` is packets per slot, or the mean burst
/// size for bursty traffic.
pub fn traffic_model(cfg: &CampaignConfig, load: f64) -> TrafficModel {
    let rate = per_user_rate(load, cfg.users, cfg.slot_len);
    match cfg.scenario {
        Scenario::Iid => TrafficModel::IidSinglePacket { rate },
        Scenario::Correlated => TrafficModel::CorrelatedQueued { rate },
        Scenario::Bursty => TrafficModel::Bursty {
            burst_rate: load,
            burst_gap: None,
        },
    }
}

pub fn build_protocol(cfg: &CampaignConfig, spec: ProtocolSpec, load: f64) -> Result<Protocol> {
    let noise = NoiseModel::from_snr_db(cfg.snr_db);
    let rate = traffic_model(cfg, load).per_user_rate();
    let bursty = cfg.scenario == Scenario::Bursty;
    Ok(match spec {
        ProtocolSpec::Pima if bursty => Protocol::Pima(Pima::unbounded(
            noise,
            PriorModel::Poisson {
                mean: load,
                cap: poisson_cap(load),
            },
            UNBOUNDED_PIA_OVERHEAD_USD,
        )),
        ProtocolSpec::Pima => Protocol::Pima(Pima::new(
            cfg.users,
            noise,
            PriorModel::Binomial { rate },
            ScheduleMode::Finite,
            cfg.pool_size,
        )),
        ProtocolSpec::Tdma | ProtocolSpec::Saloha if bursty => {
            return Err(Error::Unsupported(format!(
                "{spec} is excluded from the bursty scenario"
            )))
        }
        ProtocolSpec::Tdma => Protocol::Tdma(Tdma),
        ProtocolSpec::Saloha => Protocol::Saloha(Saloha::new(
            cfg.users,
            rate,
            cfg.slot_len,
            cfg.scenario != Scenario::Iid,
        )),
        ProtocolSpec::Cra2(pool) => {
            let preambles = pool.size(cfg.users);
            let assignment = if !bursty && pool == PreamblePool::Users {
                PreambleAssignment::Dedicated
            } else {
                PreambleAssignment::Random
            };
            Protocol::Cra2(Cra2::new(preambles, assignment, cfg.misdetection))
        }
    })
}

/// Simulates one sweep point and returns its ledger.
pub fn run_point(
    cfg: &CampaignConfig,
    spec: ProtocolSpec,
    load: f64,
    seed: u64,
) -> Result<MetricsLedger> {
    let mut protocol = build_protocol(cfg, spec, load)?;
    let traffic = traffic_model(cfg, load);
    let mut rng = SimRng::seed_from_u64(seed);

    if cfg.scenario == Scenario::Bursty {
        let mut ledger = MetricsLedger::new();
        for _ in 0..cfg.bursts {
            let mut sys = System::new(traffic, 0, cfg.slot_len);
            loop {
                let report = protocol.run_frame(&mut sys, &mut rng);
                ledger.ingest(&report);
                if sys.bursts_drained() {
                    break;
                }
            }
        }
        return Ok(ledger);
    }

    let mut sys = System::new(traffic, cfg.users, cfg.slot_len);
    if cfg.scenario == Scenario::Correlated {
        let warmup = (cfg.frames as f64 * cfg.warmup_fraction).round() as u64;
        for _ in 0..warmup {
            protocol.run_frame(&mut sys, &mut rng);
        }
    }
    let start = sys.clock();
    let mut ledger = MetricsLedger::measuring_from(start);
    let mut frames = 0;
    while frames < cfg.frames || sys.clock() - start < cfg.min_duration_usd {
        let report = protocol.run_frame(&mut sys, &mut rng);
        ledger.ingest(&report);
        frames += 1;
    }
    Ok(ledger)
}

/// Runs every (protocol, sweep value) pair of the campaign. Points run in
/// parallel; the output order follows the configuration.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let jobs: Vec<(ProtocolSpec, usize, f64)> = cfg
        .protocols
        .iter()
        .flat_map(|&p| cfg.sweep.iter().enumerate().map(move |(i, &x)| (p, i, x)))
        .collect();
    let run = |&(protocol, index, load): &(ProtocolSpec, usize, f64)| -> Result<PointResult> {
        let seed = derive_seed(cfg.seed, &protocol.to_string(), index as u64, 0);
        let ledger = run_point(cfg, protocol, load, seed)?;
        Ok(PointResult {
            protocol,
            load,
            seed,
            summary: ledger.finalize(),
        })
    };

    #[cfg(feature = "parallel")]
    let points: Vec<Result<PointResult>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<Result<PointResult>> = jobs.iter().map(run).collect();

    Ok(CampaignResult {
        scenario: cfg.scenario,
        points: points.into_iter().collect::<Result<_>>()?,
    })
}
