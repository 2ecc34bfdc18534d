//! Frame-level state machines for PIMA and the baseline access schemes.
//!
//! All protocols share the collision channel: a slot succeeds iff exactly
//! one user transmits in it, and any two or more transmitters destroy every
//! packet in the slot.

mod cra2;
mod pima;
mod saloha;
mod tdma;

pub use cra2::{Cra2, PreambleAssignment};
pub use pima::{Pima, PriorModel};
pub use saloha::{Saloha, BACKLOG_COLLISION_INCREMENT};
pub use tdma::Tdma;

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use crate::traffic::{
    sample_arrivals, Arrival, ArrivalTarget, Packet, Population, TrafficModel, UserId,
};

/// Random stream driving one simulation run.
pub type SimRng = ChaCha8Rng;

/// Slot duration used throughout, in usd.
pub const DEFAULT_SLOT_LEN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotResult {
    Idle,
    Success(UserId),
    Collision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    pub slot_index: usize,
    pub transmitters: Vec<UserId>,
    pub result: SlotResult,
}

impl SlotOutcome {
    /// Applies the collision rule to a set of transmitters.
    pub fn resolve(slot_index: usize, transmitters: Vec<UserId>) -> Self {
        let result = match transmitters.as_slice() {
            [] => SlotResult::Idle,
            [only] => SlotResult::Success(*only),
            _ => SlotResult::Collision,
        };
        Self {
            slot_index,
            transmitters,
            result,
        }
    }
}

/// Everything that happened in one frame (one slot for slotted ALOHA).
#[derive(Debug, Clone, Default)]
pub struct FrameReport {
    pub start: f64,
    pub duration: f64,
    /// Users active when the frame began.
    pub active: usize,
    /// What the scheduler believed the load to be: the MAP count for PIMA,
    /// detected preambles for CRA-2, transmitting users for TDMA. `None`
    /// for protocols without frames.
    pub estimate: Option<usize>,
    /// Length of the data sub-frame in slots.
    pub data_slots: usize,
    pub outcomes: Vec<SlotOutcome>,
    /// Generation times of the packets that arrived during this frame.
    pub generated: Vec<f64>,
    pub delivered: Vec<Packet>,
    pub dropped: Vec<Packet>,
    /// Burst transmission times completed during this frame.
    pub burst_times: Vec<f64>,
}

impl FrameReport {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn successes(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o.result, SlotResult::Success(_)))
            .count()
    }

    pub fn collisions(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.result == SlotResult::Collision)
            .count()
    }
}

#[derive(Debug, Clone)]
struct BurstRecord {
    at: f64,
    first_user: UserId,
    remaining: usize,
    reported: bool,
}

/// User buffers, traffic and the simulation clock.
#[derive(Debug, Clone)]
pub struct System {
    population: Population,
    traffic: TrafficModel,
    clock: f64,
    slot_len: f64,
    next_burst: Option<f64>,
    bursts: Vec<BurstRecord>,
}

impl System {
    /// `users` is the population size; bursty traffic starts empty and grows.
    pub fn new(traffic: TrafficModel, users: usize, slot_len: f64) -> Self {
        assert!(slot_len > 0.0, "slot length must be positive");
        let (users, next_burst) = match traffic {
            TrafficModel::Bursty { .. } => (0, Some(0.0)),
            _ => (users, None),
        };
        Self {
            population: Population::new(users, traffic.capacity()),
            traffic,
            clock: 0.0,
            slot_len,
            next_burst,
            bursts: Vec::new(),
        }
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn traffic(&self) -> &TrafficModel {
        &self.traffic
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn slot_len(&self) -> f64 {
        self.slot_len
    }

    /// Places a packet generated at `at` in a user's buffer, outside the
    /// traffic model. Returns a packet evicted by a full buffer.
    pub fn enqueue(&mut self, user: UserId, at: f64) -> Option<Packet> {
        assert!(user < self.population.len(), "no such user");
        self.population
            .admit(Arrival {
                at,
                target: ArrivalTarget::User(user),
            })
            .1
    }

    /// Bursts whose packets are not all delivered yet.
    pub fn open_bursts(&self) -> usize {
        self.bursts.iter().filter(|b| b.remaining > 0).count()
    }

    /// True once every burst so far is delivered and no further burst is
    /// scheduled.
    pub fn bursts_drained(&self) -> bool {
        self.next_burst.is_none() && self.open_bursts() == 0
    }

    /// Starts a frame at the current clock: admits bursts due by now, so
    /// their users are active at the request beacon.
    fn begin_frame(&mut self, rng: &mut SimRng) -> FrameReport {
        let mut generated = Vec::new();
        while let Some(at) = self.next_burst.filter(|at| *at <= self.clock) {
            let TrafficModel::Bursty {
                burst_rate,
                burst_gap,
            } = self.traffic
            else {
                unreachable!("bursts only exist under bursty traffic")
            };
            let count = crate::traffic::poisson(burst_rate, rng) as usize;
            let first_user = self.population.len();
            for _ in 0..count {
                generated.push(at);
                self.population.admit(Arrival {
                    at,
                    target: ArrivalTarget::Fresh,
                });
            }
            // an empty burst has nothing to time
            if count > 0 {
                self.bursts.push(BurstRecord {
                    at,
                    first_user,
                    remaining: count,
                    reported: false,
                });
            }
            self.next_burst = burst_gap.map(|gap| at + gap);
        }
        FrameReport {
            start: self.clock,
            active: self.population.active_count(),
            generated,
            ..FrameReport::default()
        }
    }

    /// Samples the Poisson arrivals of a frame that lasts `duration`.
    fn frame_arrivals(&self, duration: f64, rng: &mut SimRng) -> Timeline {
        let arrivals = match self.traffic {
            TrafficModel::Bursty { .. } => Vec::new(),
            _ => sample_arrivals(
                &self.traffic,
                self.population.len(),
                self.clock..self.clock + duration,
                rng,
            ),
        };
        Timeline {
            pending: arrivals.into(),
        }
    }

    /// Admits every pending arrival generated before `t`.
    fn admit_until(&mut self, timeline: &mut Timeline, t: f64, report: &mut FrameReport) {
        while timeline.pending.front().is_some_and(|a| a.at < t) {
            let arrival = timeline.pending.pop_front().expect("checked nonempty");
            report.generated.push(arrival.at);
            if let (_, Some(evicted)) = self.population.admit(arrival) {
                report.dropped.push(evicted);
            }
        }
    }

    /// Applies the collision rule to one slot ending at `slot_end`.
    fn resolve_slot(
        &mut self,
        slot_index: usize,
        transmitters: Vec<UserId>,
        slot_end: f64,
        report: &mut FrameReport,
    ) {
        let outcome = SlotOutcome::resolve(slot_index, transmitters);
        match outcome.result {
            SlotResult::Idle => {}
            SlotResult::Success(user) => {
                let packet = self.population.deliver_head(user, slot_end);
                self.settle_burst_packet(user);
                report.delivered.push(packet);
            }
            SlotResult::Collision => {
                if !self.traffic.retransmissions() {
                    for &user in &outcome.transmitters {
                        let packet = self.population.drop_head(user);
                        report.dropped.push(packet);
                    }
                }
            }
        }
        report.outcomes.push(outcome);
    }

    fn settle_burst_packet(&mut self, user: UserId) {
        if self.bursts.is_empty() {
            return;
        }
        let idx = self.bursts.partition_point(|b| b.first_user <= user) - 1;
        self.bursts[idx].remaining -= 1;
    }

    /// Admits the rest of the frame's arrivals and advances the clock.
    fn end_frame(&mut self, mut timeline: Timeline, mut report: FrameReport) -> FrameReport {
        let end = report.start + report.duration;
        self.admit_until(&mut timeline, f64::INFINITY, &mut report);
        debug_assert!(timeline.pending.is_empty());
        self.clock = end;
        for burst in self
            .bursts
            .iter_mut()
            .filter(|b| b.remaining == 0 && !b.reported)
        {
            report.burst_times.push(end - burst.at);
            burst.reported = true;
        }
        report
    }
}

/// Arrivals of the current frame not yet admitted, in time order.
#[derive(Debug)]
struct Timeline {
    pending: VecDeque<Arrival>,
}

/// The access schemes under comparison.
#[derive(Debug, Clone)]
pub enum Protocol {
    Pima(Pima),
    Tdma(Tdma),
    Saloha(Saloha),
    Cra2(Cra2),
}

impl Protocol {
    pub fn run_frame(&mut self, sys: &mut System, rng: &mut SimRng) -> FrameReport {
        match self {
            Protocol::Pima(p) => p.run_frame(sys, rng),
            Protocol::Tdma(p) => p.run_frame(sys, rng),
            Protocol::Saloha(p) => p.run_frame(sys, rng),
            Protocol::Cra2(p) => p.run_frame(sys, rng),
        }
    }

    /// Whether the protocol organizes time in frames with a data sub-frame,
    /// so that frame efficiency is defined.
    pub fn is_framed(&self) -> bool {
        !matches!(self, Protocol::Saloha(_))
    }
}
