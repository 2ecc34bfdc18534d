//! wasm-bindgen bindings for the static page in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested natively.

use pima::enumeration::{decision_regions, error_probability, iid_prior, NoiseModel};
use pima::harness::{run_point, CampaignConfig, ProtocolSpec, Scenario};
use pima::scheduling::{
    asymptotic_efficiency, efficiency, optimal_l2_asymptotic, optimal_l2_finite,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest population the page lets you pick.
pub const MAX_USERS: usize = 500;
/// Frame budget per simulation request; keeps the page responsive.
pub const MAX_FRAMES: u64 = 200_000;

fn check_population(users: usize, active: usize) -> Result<(), String> {
    if users == 0 || users > MAX_USERS {
        return Err(format!("users must be in 1..={MAX_USERS}"));
    }
    if active > users {
        return Err(format!("active count {active} exceeds population {users}"));
    }
    Ok(())
}

/// Frame efficiency against the number of data slots for `active` of
/// `users` users, finite population and unbounded approximation.
pub fn efficiency_curve_json(users: usize, active: usize) -> Result<Value, String> {
    check_population(users, active)?;
    let finite: Vec<f64> = (1..=users).map(|l| efficiency(users, active, l)).collect();
    let unbounded: Vec<f64> = (1..=users)
        .map(|l| asymptotic_efficiency(active, l))
        .collect();
    Ok(json!({
        "users": users,
        "active": active,
        "l2_finite": optimal_l2_finite(users, active),
        "l2_unbounded": optimal_l2_asymptotic(active),
        "finite": finite,
        "unbounded": unbounded,
    }))
}

/// Decision thresholds and per-count error probability of the MAP counter
/// when each of `users` users is active with probability `activity`.
pub fn estimator_json(users: usize, activity: f64, snr_db: f64) -> Result<Value, String> {
    check_population(users, 0)?;
    if !(0.0..=1.0).contains(&activity) {
        return Err("activity probability must be in [0, 1]".into());
    }
    if !snr_db.is_finite() {
        return Err("SNR must be finite".into());
    }
    let noise = NoiseModel::from_snr_db(snr_db);
    // p = 1 - exp(-rate) over a unit window
    let prior = iid_prior(users, -(-activity).ln_1p(), 1.0);
    let regions = decision_regions(&prior, &noise);
    let errors: Vec<f64> = (0..=users)
        .map(|b| error_probability(b, &regions, &noise))
        .collect();
    let overall: f64 = prior.pmf().iter().zip(&errors).map(|(p, e)| p * e).sum();
    // JSON has no infinities; empty regions sit at the neighbors' boundary
    let thresholds: Vec<Option<f64>> = regions
        .thresholds()
        .iter()
        .map(|t| t.is_finite().then_some(*t))
        .collect();
    Ok(json!({
        "users": users,
        "snr_db": snr_db,
        "noise_std": noise.real_std(),
        "prior": prior.pmf(),
        "thresholds": thresholds,
        "error": errors,
        "error_overall": overall,
    }))
}

/// One sweep point of the simulator.
pub fn simulate_json(
    scenario: &str,
    protocol: &str,
    load: f64,
    frames: u64,
    seed: u64,
) -> Result<Value, String> {
    let scenario: Scenario = scenario.parse().map_err(|e: pima::Error| e.to_string())?;
    let spec: ProtocolSpec = protocol.parse().map_err(|e: pima::Error| e.to_string())?;
    if frames == 0 || frames > MAX_FRAMES {
        return Err(format!("frames must be in 1..={MAX_FRAMES}"));
    }
    let mut cfg = CampaignConfig::new(scenario, vec![spec], vec![load]);
    cfg.frames = frames;
    cfg.bursts = frames.min(50);
    cfg.seed = seed;
    cfg.validate().map_err(|e| e.to_string())?;
    let s = run_point(&cfg, spec, load, seed)
        .map_err(|e| e.to_string())?
        .finalize();
    Ok(json!({
        "scenario": scenario.to_string(),
        "protocol": spec.to_string(),
        "load": load,
        "eta_bar": s.eta_bar,
        "eta_se": s.eta_se,
        "d_bar_usd": s.d_bar_usd,
        "d_bar_se": s.d_bar_se,
        "p_drop": s.p_drop,
        "d_burst_usd": s.d_burst_usd,
        "eccdf": s.eccdf,
        "frames": s.frames,
        "generated": s.generated,
        "delivered": s.delivered,
        "dropped": s.dropped,
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = efficiencyCurve)]
pub fn efficiency_curve(users: usize, active: usize) -> Result<String, JsError> {
    to_js(efficiency_curve_json(users, active))
}

#[wasm_bindgen]
pub fn estimator(users: usize, activity: f64, snr_db: f64) -> Result<String, JsError> {
    to_js(estimator_json(users, activity, snr_db))
}

#[wasm_bindgen]
pub fn simulate(
    scenario: &str,
    protocol: &str,
    load: f64,
    frames: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(simulate_json(
        scenario,
        protocol,
        load,
        frames.into(),
        seed.into(),
    ))
}
