use rand::Rng;

use super::{FrameReport, SimRng, SlotResult, System};

/// Backlog estimate increment after a collision, `1 / (e - 2)`.
pub const BACKLOG_COLLISION_INCREMENT: f64 = 1.392_211_191_177_332_8;

/// Slotted ALOHA, optionally stabilized by a pseudo-Bayesian backlog
/// estimate `G` with transmit probability `min(1, 1/G)`.
///
/// Time is discrete: a packet generated during a slot contends in that
/// slot, so a first-attempt success waits on average half a slot.
#[derive(Debug, Clone)]
pub struct Saloha {
    backlog: f64,
    /// Expected new packets per slot, `N * theta` with
    /// `theta = 1 - exp(-lambda_slot)`.
    arrivals_per_slot: f64,
    stabilized: bool,
}

impl Saloha {
    /// `rate` is the per-user packet rate in packets per usd.
    pub fn new(users: usize, rate: f64, slot_len: f64, stabilized: bool) -> Self {
        let theta = -(-rate * slot_len).exp_m1();
        Self {
            backlog: 0.0,
            arrivals_per_slot: users as f64 * theta,
            stabilized,
        }
    }

    pub fn backlog(&self) -> f64 {
        self.backlog
    }

    pub fn arrivals_per_slot(&self) -> f64 {
        self.arrivals_per_slot
    }

    pub fn transmit_probability(&self) -> f64 {
        if !self.stabilized || self.backlog <= 1.0 {
            1.0
        } else {
            1.0 / self.backlog
        }
    }

    /// Pseudo-Bayesian update after a slot. A collision raises the estimate
    /// by `N theta + 1/(e-2)`; an idle or successful slot moves it to
    /// `max(N theta, G + N theta - 1)`.
    pub fn update(&mut self, result: SlotResult) {
        let inflow = self.arrivals_per_slot;
        self.backlog = match result {
            SlotResult::Collision => self.backlog + inflow + BACKLOG_COLLISION_INCREMENT,
            SlotResult::Idle | SlotResult::Success(_) => inflow.max(self.backlog + inflow - 1.0),
        };
    }

    pub fn run_frame(&mut self, sys: &mut System, rng: &mut SimRng) -> FrameReport {
        let mut report = sys.begin_frame(rng);
        let slot_len = sys.slot_len();
        report.duration = slot_len;
        report.data_slots = 1;
        let end = report.start + slot_len;

        let mut timeline = sys.frame_arrivals(slot_len, rng);
        sys.admit_until(&mut timeline, end, &mut report);
        let alpha = self.transmit_probability();
        let transmitters = sys
            .population()
            .active_set()
            .into_iter()
            .filter(|_| alpha >= 1.0 || rng.random_bool(alpha))
            .collect();
        sys.resolve_slot(0, transmitters, end, &mut report);
        let result = report.outcomes[0].result;
        self.update(result);
        sys.end_frame(timeline, report)
    }
}
