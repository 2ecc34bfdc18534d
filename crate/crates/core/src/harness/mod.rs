//! Campaign configuration, seeding and orchestration.

mod campaign;
mod config;
mod seed;

pub use campaign::{
    build_protocol, run_campaign, run_point, traffic_model, CampaignResult, PointResult,
    UNBOUNDED_PIA_OVERHEAD_USD,
};
pub use config::{CampaignConfig, PreamblePool, ProtocolSpec, Scenario};
pub use seed::derive_seed;
