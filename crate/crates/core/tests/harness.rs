use std::process::Command;

use pima::harness::{derive_seed, run_campaign, CampaignConfig, ProtocolSpec, Scenario};
use pima::protocols::{SimRng, System};
use rand::SeedableRng;

fn small(scenario: Scenario) -> CampaignConfig {
    let protocols = match scenario {
        Scenario::Bursty => vec![ProtocolSpec::Pima, "cra2:64".parse().unwrap()],
        _ => vec![
            ProtocolSpec::Pima,
            ProtocolSpec::Tdma,
            ProtocolSpec::Saloha,
            "cra2:N/2".parse().unwrap(),
            "cra2:N".parse().unwrap(),
        ],
    };
    let sweep = match scenario {
        Scenario::Bursty => vec![10.0, 60.0],
        _ => vec![0.2, 2.0],
    };
    let mut cfg = CampaignConfig::new(scenario, protocols, sweep);
    cfg.frames = 2_000;
    cfg.bursts = 30;
    cfg
}

fn render(cfg: &CampaignConfig) -> (String, String) {
    let r = run_campaign(cfg).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    r.write_results_csv(&mut a).unwrap();
    r.write_eccdf_csv(&mut b).unwrap();
    (String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap())
}

#[test]
fn campaigns_are_deterministic() {
    for scenario in [Scenario::Iid, Scenario::Correlated, Scenario::Bursty] {
        let cfg = small(scenario);
        assert_eq!(render(&cfg), render(&cfg), "{scenario}");
    }
}

#[test]
fn seed_changes_the_output() {
    let mut cfg = small(Scenario::Iid);
    let a = render(&cfg);
    cfg.seed += 1;
    assert_ne!(a, render(&cfg));
}

#[test]
fn results_have_one_row_per_point() {
    let cfg = small(Scenario::Correlated);
    let (results, eccdf) = render(&cfg);
    let lines: Vec<&str> = results.lines().collect();
    assert!(lines[0].starts_with("scenario,protocol,load,eta_bar"));
    assert_eq!(lines.len(), 1 + 5 * 2);
    // no bursts, no tail samples
    assert_eq!(eccdf.lines().count(), 1);
    // slotted ALOHA has no frame efficiency: the cell is empty
    let saloha = lines.iter().find(|l| l.contains(",saloha,")).unwrap();
    assert_eq!(saloha.split(',').nth(3), Some(""));
}

#[test]
fn bursty_rows_carry_burst_times() {
    let r = run_campaign(&small(Scenario::Bursty)).unwrap();
    for p in &r.points {
        let s = &p.summary;
        assert!(s.d_burst_usd.unwrap() > 0.0);
        assert_eq!(s.p_drop, Some(0.0));
        assert_eq!(s.generated, s.delivered);
        assert!(!s.eccdf.is_empty());
    }
}

#[test]
fn clock_is_the_sum_of_frame_durations() {
    let cfg = small(Scenario::Correlated);
    for &spec in &cfg.protocols {
        let mut proto = pima::harness::build_protocol(&cfg, spec, 2.0).unwrap();
        let mut sys = System::new(
            pima::harness::traffic_model(&cfg, 2.0),
            cfg.users,
            cfg.slot_len,
        );
        let mut rng = SimRng::seed_from_u64(derive_seed(1, &spec.to_string(), 0, 0));
        let mut total = 0.0;
        for _ in 0..500 {
            let r = proto.run_frame(&mut sys, &mut rng);
            assert_eq!(r.start, total);
            total += r.duration;
        }
        assert_eq!(sys.clock(), total);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small(Scenario::Iid);
    cfg.sweep.clear();
    assert!(run_campaign(&cfg).is_err());
    let mut cfg = small(Scenario::Bursty);
    cfg.protocols = vec![ProtocolSpec::Saloha];
    let err = run_campaign(&cfg).unwrap_err().to_string();
    assert!(err.contains("saloha"), "{err}");
    let mut cfg = small(Scenario::Iid);
    cfg.frames = 0;
    assert!(run_campaign(&cfg).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pima-sim"))
}

#[test]
fn cli_simulate_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("campaign.json");
    std::fs::write(
        &config,
        r#"{"scenario":"iid","protocols":["pima","tdma"],"sweep":[1.0],"frames":500}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = |seed: &str, out: &std::path::Path| {
        let status = cli()
            .args(["simulate", "--config"])
            .arg(&config)
            .args(["--protocol", "pima", "--seed", seed, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out.join("results.csv")).unwrap()
    };
    let first = run("5", &out);
    assert!(out.join("eccdf.csv").exists());
    // the flag narrowed the protocol list
    assert_eq!(first.lines().count(), 2);
    assert!(first.contains(",pima,"));
    let again = run("5", &dir.path().join("again"));
    assert_eq!(first, again);
}

#[test]
fn cli_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{"scenario":"bursty","protocols":["tdma"],"sweep":[10]}"#,
    )
    .unwrap();
    let out = cli()
        .args(["simulate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tdma"));
}

#[test]
fn cli_table() {
    let out = cli().args(["table", "--nu-max", "5"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "nu,l2_star,eta_star");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,1,1.0"));
}

#[test]
fn cli_validate_passes() {
    let out = cli().arg("validate").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
