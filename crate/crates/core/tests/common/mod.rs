#![allow(dead_code)]

use pima::harness::{build_protocol, traffic_model, CampaignConfig, ProtocolSpec, Scenario};
use pima::metrics::MetricsLedger;
use pima::protocols::{Protocol, SimRng, SlotResult, System};
use rand::SeedableRng;

/// Runs `frames` frames (or bursts to completion) and checks the traffic,
/// protocol and metric invariants along the way.
pub fn check_run(
    scenario: Scenario,
    protocol: ProtocolSpec,
    load: f64,
    users: usize,
    frames: u64,
    seed: u64,
) -> Result<(), String> {
    let mut cfg = CampaignConfig::new(scenario, vec![protocol], vec![load]);
    cfg.users = users;
    cfg.frames = frames;
    cfg.bursts = 1;
    cfg.validate().map_err(|e| e.to_string())?;
    let mut proto = build_protocol(&cfg, protocol, load).map_err(|e| e.to_string())?;
    let mut sys = System::new(traffic_model(&cfg, load), users, cfg.slot_len);
    let mut rng = SimRng::seed_from_u64(seed);
    let mut ledger = MetricsLedger::new();
    let (mut generated, mut delivered, mut dropped) = (0usize, 0usize, 0usize);
    let mut elapsed = 0.0;
    let mut n = 0u64;
    loop {
        let report = proto.run_frame(&mut sys, &mut rng);
        ledger.ingest(&report);
        elapsed += report.duration;
        generated += report.generated.len();
        delivered += report.delivered.len();
        dropped += report.dropped.len();

        for o in &report.outcomes {
            let single = o.transmitters.len() == 1;
            if single != matches!(o.result, SlotResult::Success(_)) {
                return Err(format!("collision rule broken in slot {}", o.slot_index));
            }
        }
        if matches!(proto, Protocol::Tdma(_)) && report.collisions() > 0 {
            return Err("TDMA collided".into());
        }
        // PIMA and CRA-2 only serve users active when the frame begins
        let snapshot = matches!(proto, Protocol::Pima(_) | Protocol::Cra2(_));
        if snapshot && report.successes() > report.active {
            return Err(format!(
                "{} successes with {} users active",
                report.successes(),
                report.active
            ));
        }
        if let Protocol::Saloha(s) = &proto {
            let a = s.transmit_probability();
            if s.backlog() < 0.0 || !(a > 0.0 && a <= 1.0) {
                return Err(format!("backlog {} alpha {a}", s.backlog()));
            }
        }
        if let Some(p) = report
            .delivered
            .iter()
            .find(|p| !matches!(p.latency(), Some(l) if l > 0.0))
        {
            return Err(format!("nonpositive latency {:?}", p));
        }
        if ledger.delivered() + ledger.dropped() > ledger.generated() {
            return Err("ledger counted more outcomes than packets".into());
        }
        n += 1;
        let done = if scenario == Scenario::Bursty {
            sys.bursts_drained()
        } else {
            n >= frames
        };
        if done {
            break;
        }
        if n > 10_000_000 {
            return Err("run did not finish".into());
        }
    }

    if elapsed != sys.clock() {
        return Err(format!(
            "durations sum to {elapsed}, clock at {}",
            sys.clock()
        ));
    }
    let buffered = sys.population().buffered() as usize;
    if generated != delivered + dropped + buffered {
        return Err(format!(
            "generated {generated} != delivered {delivered} + dropped {dropped} + buffered {buffered}"
        ));
    }
    let s = ledger.finalize();
    for (name, v) in [("eta_bar", s.eta_bar), ("p_drop", s.p_drop)] {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v}"));
            }
        }
    }
    if s.eccdf
        .windows(2)
        .any(|w| w[1].1 > w[0].1 || w[1].0 <= w[0].0)
    {
        return Err("eccdf not monotone".into());
    }
    if let Some(last) = s.eccdf.last() {
        if last.1 != 0.0 || s.eccdf[0].1 > 1.0 {
            return Err("eccdf endpoints".into());
        }
    }
    Ok(())
}
