use pima::enumeration::NoiseModel;
use pima::harness::{run_point, CampaignConfig, ProtocolSpec, Scenario};
use pima::protocols::{
    Cra2, Pima, PreambleAssignment, PriorModel, Protocol, SimRng, SlotResult, System, Tdma,
    DEFAULT_SLOT_LEN,
};
use pima::scheduling::ScheduleMode;
use pima::traffic::TrafficModel;
use rand::SeedableRng;

const N: usize = 50;

fn quiet(traffic: TrafficModel) -> System {
    System::new(traffic, N, DEFAULT_SLOT_LEN)
}

fn silent_iid() -> System {
    quiet(TrafficModel::IidSinglePacket { rate: 0.0 })
}

fn silent_queued() -> System {
    quiet(TrafficModel::CorrelatedQueued { rate: 0.0 })
}

fn clean_pima() -> Pima {
    Pima::new(
        N,
        NoiseModel::from_variance(1e-6).unwrap(),
        PriorModel::Uniform { max: N },
        ScheduleMode::Finite,
        64,
    )
}

#[test]
fn pima_idle_frame_costs_the_overhead() {
    let mut sys = silent_iid();
    let mut rng = SimRng::seed_from_u64(1);
    let report = clean_pima().run_frame(&mut sys, &mut rng);
    assert_eq!(report.duration, 3.0);
    assert!(report.outcomes.is_empty());
    assert_eq!(report.estimate, Some(0));
}

#[test]
fn pima_single_user_frame() {
    let mut sys = silent_iid();
    sys.enqueue(7, 0.0);
    let mut rng = SimRng::seed_from_u64(2);
    let report = clean_pima().run_frame(&mut sys, &mut rng);
    assert_eq!(report.estimate, Some(1));
    assert_eq!(report.duration, 13.0);
    assert_eq!(report.successes(), 1);
    assert_eq!(report.delivered[0].latency(), Some(13.0));
    assert!(!sys.population().user(7).is_active());
}

#[test]
fn pima_overestimate_leaves_idle_slots() {
    let mut seen = false;
    for seed in 0..200 {
        let mut sys = silent_iid();
        for u in [1, 20, 33] {
            sys.enqueue(u, 0.0);
        }
        let mut pima = Pima::new(
            N,
            NoiseModel::from_variance(1.0).unwrap(),
            PriorModel::Poisson { mean: 30.0, cap: N },
            ScheduleMode::Finite,
            64,
        );
        let mut rng = SimRng::seed_from_u64(seed);
        let report = pima.run_frame(&mut sys, &mut rng);
        assert!(report.successes() <= 3);
        if report.estimate.unwrap() > 3 {
            seen = true;
            assert!(report.outcomes.iter().any(|o| o.result == SlotResult::Idle));
        }
    }
    assert!(seen, "the tilted prior never overestimated");
}

#[test]
fn pima_collisions_keep_or_drop_by_mode() {
    let active: Vec<usize> = (0..10).collect();
    for queued in [false, true] {
        let mut collided = 0;
        for seed in 0..20 {
            let mut sys = if queued {
                silent_queued()
            } else {
                silent_iid()
            };
            for &u in &active {
                sys.enqueue(u, 0.0);
            }
            let mut rng = SimRng::seed_from_u64(seed);
            let report = clean_pima().run_frame(&mut sys, &mut rng);
            let in_collisions: usize = report
                .outcomes
                .iter()
                .filter(|o| o.result == SlotResult::Collision)
                .map(|o| o.transmitters.len())
                .sum();
            collided += in_collisions;
            let buffered = sys.population().buffered() as usize;
            if queued {
                assert_eq!(buffered, in_collisions);
                assert!(report.dropped.is_empty());
            } else {
                assert_eq!(buffered, 0);
                assert_eq!(report.dropped.len(), in_collisions);
            }
            assert_eq!(report.successes() + in_collisions, active.len());
        }
        assert!(collided > 0);
    }
}

#[test]
fn tdma_empty_frame() {
    let mut sys = silent_iid();
    let mut rng = SimRng::seed_from_u64(4);
    let report = Tdma.run_frame(&mut sys, &mut rng);
    assert_eq!(report.duration, 500.0);
    assert_eq!(report.outcomes.len(), N);
    assert!(report.outcomes.iter().all(|o| o.result == SlotResult::Idle));
}

#[test]
fn tdma_one_packet_per_user_per_frame() {
    let mut sys = silent_queued();
    sys.enqueue(3, 0.0);
    sys.enqueue(3, 0.0);
    let mut rng = SimRng::seed_from_u64(5);
    let report = Tdma.run_frame(&mut sys, &mut rng);
    assert_eq!(report.successes(), 1);
    assert_eq!(report.collisions(), 0);
    assert_eq!(sys.population().user(3).len(), 1);
    // slot 3 ends at 40 usd
    assert_eq!(report.delivered[0].delivered_at, Some(40.0));
}

#[test]
fn cra2_dedicated_preambles_are_collision_free() {
    let mut sys = silent_queued();
    for u in [4, 9, 17, 40] {
        sys.enqueue(u, 0.0);
    }
    let mut rng = SimRng::seed_from_u64(6);
    let report = Cra2::new(N, PreambleAssignment::Dedicated, 0.0).run_frame(&mut sys, &mut rng);
    assert_eq!(report.successes(), 4);
    assert_eq!(report.duration, (N + 4 + 40) as f64);
}

#[test]
fn cra2_shared_preamble_collides() {
    let mut sys = silent_queued();
    sys.enqueue(0, 0.0);
    sys.enqueue(1, 0.0);
    let mut rng = SimRng::seed_from_u64(7);
    let report = Cra2::new(1, PreambleAssignment::Random, 0.0).run_frame(&mut sys, &mut rng);
    assert_eq!(report.outcomes.len(), 1);
    assert_eq!(report.outcomes[0].result, SlotResult::Collision);
    assert_eq!(report.duration, 1.0 + 1.0 + 10.0);
    // retained for retransmission under queued traffic
    assert_eq!(sys.population().buffered(), 2);
}

#[test]
fn cra2_misdetected_users_keep_their_packets() {
    let mut sys = silent_iid();
    sys.enqueue(2, 0.0);
    let mut rng = SimRng::seed_from_u64(8);
    let report = Cra2::new(N, PreambleAssignment::Dedicated, 1.0).run_frame(&mut sys, &mut rng);
    assert_eq!(report.estimate, Some(0));
    assert_eq!(report.duration, N as f64);
    assert!(sys.population().user(2).is_active());
}

#[test]
fn cra2_detected_preamble_occupancy() {
    // E[distinct of 4 draws from 25] * (1 - P_md)
    const EXPECTED: f64 = 3.389_702_4;
    let trials = 1_000_000;
    let mut sys = silent_queued();
    let mut cra = Cra2::new(25, PreambleAssignment::Random, 0.1);
    let mut rng = SimRng::seed_from_u64(9);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        for u in 0..4 {
            if !sys.population().user(u).is_active() {
                sys.enqueue(u, sys.clock());
            }
        }
        let d = cra.run_frame(&mut sys, &mut rng).estimate.unwrap() as f64;
        sum += d;
        sum_sq += d * d;
    }
    let n = trials as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / n).sqrt();
    assert!(
        (mean - EXPECTED).abs() < 3.0 * se,
        "{mean} vs {EXPECTED} (se {se})"
    );
}

#[test]
fn tdma_light_load_latency() {
    // half a frame of waiting plus the slot itself
    let expected = N as f64 / 2.0 * DEFAULT_SLOT_LEN + DEFAULT_SLOT_LEN;
    let mut cfg = CampaignConfig::new(Scenario::Iid, vec![ProtocolSpec::Tdma], vec![0.01]);
    cfg.frames = 40_000;
    let d = run_point(&cfg, ProtocolSpec::Tdma, 0.01, 11)
        .unwrap()
        .finalize()
        .d_bar_usd
        .unwrap();
    assert!((d - expected).abs() / expected < 0.05, "{d} vs {expected}");
}

#[test]
fn runs_are_reproducible() {
    let cfg = CampaignConfig::new(Scenario::Correlated, vec![], vec![2.0]);
    for spec in ["pima", "tdma", "saloha", "cra2:N/2", "cra2:N"] {
        let spec: ProtocolSpec = spec.parse().unwrap();
        let trace = || {
            let mut proto: Protocol = pima::harness::build_protocol(&cfg, spec, 2.0).unwrap();
            let mut sys = System::new(pima::harness::traffic_model(&cfg, 2.0), N, DEFAULT_SLOT_LEN);
            let mut rng = SimRng::seed_from_u64(12);
            (0..300)
                .map(|_| proto.run_frame(&mut sys, &mut rng).outcomes)
                .collect::<Vec<_>>()
        };
        assert_eq!(trace(), trace(), "{spec}");
    }
}

#[test]
fn unstabilized_saloha_drops_every_collision() {
    let mut cfg = CampaignConfig::new(Scenario::Iid, vec![ProtocolSpec::Saloha], vec![5.0]);
    cfg.frames = 20_000;
    let s = run_point(&cfg, ProtocolSpec::Saloha, 5.0, 13)
        .unwrap()
        .finalize();
    // at load 5 per slot the offered traffic is 0.5 packets per slot; an
    // always-transmitting ALOHA keeps about e^-0.5 of it
    let p = s.p_drop.unwrap();
    assert!((p - (1.0 - (-0.5f64).exp())).abs() < 0.02, "{p}");
}
