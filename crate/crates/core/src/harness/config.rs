//! Campaign manifests.
//!
//! A campaign is a JSON object; every field except `scenario` and `sweep`
//! has a default:
//!
//! ```json
//! {
//!   "scenario": "correlated",
//!   "protocols": ["pima", "tdma", "saloha", "cra2:N/2", "cra2:N"],
//!   "users": 50,
//!   "slot_len": 10.0,
//!   "snr_db": 10.0,
//!   "sweep": [0.01, 0.1, 1.0],
//!   "frames": 100000,
//!   "min_duration_usd": 0.0,
//!   "bursts": 1000,
//!   "warmup_fraction": 0.1,
//!   "pool_size": 64,
//!   "misdetection": 0.1,
//!   "seed": 1
//! }
//! ```
//!
//! `sweep` holds total loads in packets per slot, or mean burst sizes for
//! the bursty scenario.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Iid,
    Correlated,
    Bursty,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Iid => "iid",
            Scenario::Correlated => "correlated",
            Scenario::Bursty => "bursty",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(Scenario::Iid),
            "correlated" => Ok(Scenario::Correlated),
            "bursty" => Ok(Scenario::Bursty),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// CRA-2 preamble pool size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreamblePool {
    HalfUsers,
    Users,
    Fixed(usize),
}

impl PreamblePool {
    pub fn size(self, users: usize) -> usize {
        match self {
            PreamblePool::HalfUsers => users / 2,
            PreamblePool::Users => users,
            PreamblePool::Fixed(k) => k,
        }
    }
}

/// A protocol entry of a campaign, written `pima`, `tdma`, `saloha`,
/// `cra2:N/2`, `cra2:N` or `cra2:<preambles>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProtocolSpec {
    Pima,
    Tdma,
    Saloha,
    Cra2(PreamblePool),
}

impl fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolSpec::Pima => f.write_str("pima"),
            ProtocolSpec::Tdma => f.write_str("tdma"),
            ProtocolSpec::Saloha => f.write_str("saloha"),
            ProtocolSpec::Cra2(PreamblePool::HalfUsers) => f.write_str("cra2:N/2"),
            ProtocolSpec::Cra2(PreamblePool::Users) => f.write_str("cra2:N"),
            ProtocolSpec::Cra2(PreamblePool::Fixed(k)) => write!(f, "cra2:{k}"),
        }
    }
}

impl FromStr for ProtocolSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pima" => Ok(ProtocolSpec::Pima),
            "tdma" => Ok(ProtocolSpec::Tdma),
            "saloha" => Ok(ProtocolSpec::Saloha),
            "cra2:N/2" => Ok(ProtocolSpec::Cra2(PreamblePool::HalfUsers)),
            "cra2:N" => Ok(ProtocolSpec::Cra2(PreamblePool::Users)),
            other => match other.strip_prefix("cra2:").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(ProtocolSpec::Cra2(PreamblePool::Fixed(k))),
                _ => Err(Error::Config(format!("unknown protocol `{other}`"))),
            },
        }
    }
}

impl TryFrom<String> for ProtocolSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProtocolSpec> for String {
    fn from(p: ProtocolSpec) -> String {
        p.to_string()
    }
}

fn default_protocols() -> Vec<ProtocolSpec> {
    vec![
        ProtocolSpec::Pima,
        ProtocolSpec::Tdma,
        ProtocolSpec::Saloha,
        ProtocolSpec::Cra2(PreamblePool::HalfUsers),
        ProtocolSpec::Cra2(PreamblePool::Users),
    ]
}

fn default_users() -> usize {
    50
}

fn default_slot_len() -> f64 {
    10.0
}

fn default_snr_db() -> f64 {
    10.0
}

fn default_frames() -> u64 {
    100_000
}

fn default_bursts() -> u64 {
    1_000
}

fn default_warmup() -> f64 {
    0.1
}

fn default_pool_size() -> usize {
    64
}

fn default_misdetection() -> f64 {
    0.1
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub scenario: Scenario,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolSpec>,
    #[serde(default = "default_users")]
    pub users: usize,
    #[serde(default = "default_slot_len")]
    pub slot_len: f64,
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    pub sweep: Vec<f64>,
    /// Measured frames per point (slots for slotted ALOHA).
    #[serde(default = "default_frames")]
    pub frames: u64,
    /// Keep simulating past `frames` until this much time is measured.
    #[serde(default)]
    pub min_duration_usd: f64,
    /// Independent bursts per point in the bursty scenario.
    #[serde(default = "default_bursts")]
    pub bursts: u64,
    /// Share of extra leading frames discarded in the correlated scenario.
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_misdetection")]
    pub misdetection: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl CampaignConfig {
    /// A configuration with defaults for everything but the essentials.
    pub fn new(scenario: Scenario, protocols: Vec<ProtocolSpec>, sweep: Vec<f64>) -> Self {
        Self {
            scenario,
            protocols,
            users: default_users(),
            slot_len: default_slot_len(),
            snr_db: default_snr_db(),
            sweep,
            frames: default_frames(),
            min_duration_usd: 0.0,
            bursts: default_bursts(),
            warmup_fraction: default_warmup(),
            pool_size: default_pool_size(),
            misdetection: default_misdetection(),
            seed: default_seed(),
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sweep.is_empty() {
            return bad("sweep must list at least one value".into());
        }
        if let Some(x) = self.sweep.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return bad(format!("sweep value {x} is not a nonnegative number"));
        }
        if self.protocols.is_empty() {
            return bad("no protocols selected".into());
        }
        if !(self.slot_len.is_finite() && self.slot_len > 0.0) {
            return bad("slot_len must be positive".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.misdetection) {
            return bad("misdetection must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)".into());
        }
        if self.pool_size == 0 {
            return bad("pool_size must be at least 1".into());
        }
        match self.scenario {
            Scenario::Bursty => {
                if self.bursts == 0 {
                    return bad("bursts must be at least 1".into());
                }
                for p in &self.protocols {
                    match p {
                        ProtocolSpec::Saloha | ProtocolSpec::Tdma => {
                            return bad(format!(
                                "{p} is not evaluated under bursty traffic: \
                                 simultaneous arrivals collide with probability one \
                                 under slotted ALOHA, and TDMA needs a known population"
                            ));
                        }
                        ProtocolSpec::Cra2(PreamblePool::Fixed(_)) | ProtocolSpec::Pima => {}
                        ProtocolSpec::Cra2(_) => {
                            return bad(format!(
                                "{p} ties the preamble pool to the population size, \
                                 which is unbounded under bursty traffic; give an explicit pool"
                            ));
                        }
                    }
                }
            }
            Scenario::Iid | Scenario::Correlated => {
                if self.users == 0 {
                    return bad("users must be at least 1".into());
                }
                if self.frames == 0 {
                    return bad("frames must be at least 1".into());
                }
                for p in &self.protocols {
                    if let ProtocolSpec::Cra2(pool) = p {
                        if pool.size(self.users) == 0 {
                            return bad(format!("{p} leaves no preambles"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
