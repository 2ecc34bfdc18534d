use std::collections::BTreeMap;

use rand::Rng;

use super::{FrameReport, SimRng, System};
use crate::traffic::UserId;

/// How active users pick their preamble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreambleAssignment {
    /// User `n` always sends preamble `n`; needs a preamble per user.
    Dedicated,
    /// Uniform choice from the pool each frame.
    Random,
}

/// Two-step access with orthogonal preambles as temporary identifiers.
///
/// Each detected preamble receives one data slot, announced in preamble
/// order; users sharing a detected preamble collide in that slot. Users
/// whose preamble is missed keep their packets for the next frame.
#[derive(Debug, Clone)]
pub struct Cra2 {
    preambles: usize,
    assignment: PreambleAssignment,
    misdetection: f64,
}

impl Cra2 {
    pub fn new(preambles: usize, assignment: PreambleAssignment, misdetection: f64) -> Self {
        assert!(preambles >= 1, "need at least one preamble");
        assert!(
            (0.0..=1.0).contains(&misdetection),
            "misdetection must be a probability"
        );
        Self {
            preambles,
            assignment,
            misdetection,
        }
    }

    pub fn preambles(&self) -> usize {
        self.preambles
    }

    pub fn run_frame(&mut self, sys: &mut System, rng: &mut SimRng) -> FrameReport {
        let mut report = sys.begin_frame(rng);
        let active = sys.population().active_set();

        let mut groups: BTreeMap<usize, Vec<UserId>> = BTreeMap::new();
        for user in active {
            let preamble = match self.assignment {
                PreambleAssignment::Dedicated => {
                    assert!(user < self.preambles, "dedicated preamble pool too small");
                    user
                }
                PreambleAssignment::Random => rng.random_range(0..self.preambles),
            };
            groups.entry(preamble).or_default().push(user);
        }
        let detect = 1.0 - self.misdetection;
        let detected: Vec<Vec<UserId>> = groups
            .into_values()
            .filter(|_| rng.random_bool(detect))
            .collect();

        let l2 = detected.len();
        // preamble sub-frame plus one feedback symbol per detected preamble
        let overhead = (self.preambles + l2) as f64;
        let slot_len = sys.slot_len();
        report.duration = overhead + l2 as f64 * slot_len;
        report.estimate = Some(l2);
        report.data_slots = l2;

        let mut timeline = sys.frame_arrivals(report.duration, rng);
        for (index, transmitters) in detected.into_iter().enumerate() {
            let start = report.start + overhead + index as f64 * slot_len;
            sys.admit_until(&mut timeline, start, &mut report);
            sys.resolve_slot(index, transmitters, start + slot_len, &mut report);
        }
        sys.end_frame(timeline, report)
    }
}
