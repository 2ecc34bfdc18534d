//! Packet generation and per-user FIFO buffering.
//!
//! Three activation statistics are supported: single-packet i.i.d. users
//! whose collided packets are discarded, queued users with unbounded buffers
//! and retransmissions, and bursts of fresh single-packet users.

use std::collections::VecDeque;
use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Index of a user in a [`Population`].
pub type UserId = usize;

/// A packet waiting in (or delivered from) a user buffer. Times are in usd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub owner: UserId,
    pub generated_at: f64,
    pub delivered_at: Option<f64>,
}

impl Packet {
    pub fn new(owner: UserId, generated_at: f64) -> Self {
        Self {
            owner,
            generated_at,
            delivered_at: None,
        }
    }

    /// Delivery delay in usd, if delivered.
    pub fn latency(&self) -> Option<f64> {
        self.delivered_at.map(|d| d - self.generated_at)
    }
}

/// Buffer capacity of a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Finite(usize),
    Unbounded,
}

impl Capacity {
    fn admits(self, len: usize) -> bool {
        match self {
            Capacity::Finite(cap) => len < cap,
            Capacity::Unbounded => true,
        }
    }
}

/// FIFO buffer of one user. The user is active iff the buffer is nonempty.
#[derive(Debug, Clone)]
pub struct UserState {
    buffer: VecDeque<Packet>,
    capacity: Capacity,
}

impl UserState {
    pub fn new(capacity: Capacity) -> Self {
        if let Capacity::Finite(cap) = capacity {
            assert!(cap > 0, "finite buffer capacity must be positive");
        }
        Self {
            buffer: VecDeque::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn is_active(&self) -> bool {
        !self.buffer.is_empty()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Oldest buffered packet.
    pub fn head(&self) -> Option<&Packet> {
        self.buffer.front()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.buffer.iter()
    }

    /// Appends a packet. When the buffer is full the oldest packet is evicted
    /// and returned.
    pub fn push(&mut self, packet: Packet) -> Option<Packet> {
        debug_assert!(
            self.buffer
                .back()
                .map_or(true, |last| last.generated_at <= packet.generated_at),
            "arrivals must be admitted in time order"
        );
        let evicted = if self.capacity.admits(self.buffer.len()) {
            None
        } else {
            self.buffer.pop_front()
        };
        self.buffer.push_back(packet);
        evicted
    }

    /// Removes and returns the oldest packet.
    ///
    /// # Panics
    ///
    /// Panics if the buffer is empty; callers only pop users they know to be
    /// active.
    pub fn pop_for_transmission(&mut self) -> Packet {
        self.buffer
            .pop_front()
            .expect("pop_for_transmission called on an empty buffer")
    }
}

/// Free-function form of [`UserState::pop_for_transmission`].
pub fn pop_for_transmission(user: &mut UserState) -> Packet {
    user.pop_for_transmission()
}

/// Activation statistics of the user population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficModel {
    /// Unit buffers, collided packets are discarded. `rate` is the per-user
    /// Poisson rate in packets per usd.
    IidSinglePacket { rate: f64 },
    /// Unbounded buffers with retransmission of collided packets.
    CorrelatedQueued { rate: f64 },
    /// Bursts of `burst_rate` packets on average, each from a fresh
    /// single-packet user. Without `burst_gap` only the burst at time zero
    /// occurs.
    Bursty {
        burst_rate: f64,
        burst_gap: Option<f64>,
    },
}

impl TrafficModel {
    pub fn capacity(&self) -> Capacity {
        match self {
            TrafficModel::CorrelatedQueued { .. } => Capacity::Unbounded,
            _ => Capacity::Finite(1),
        }
    }

    /// Whether collided packets stay buffered for the next frame.
    pub fn retransmissions(&self) -> bool {
        !matches!(self, TrafficModel::IidSinglePacket { .. })
    }

    /// Per-user Poisson rate in packets per usd; zero for bursty traffic.
    pub fn per_user_rate(&self) -> f64 {
        match *self {
            TrafficModel::IidSinglePacket { rate } | TrafficModel::CorrelatedQueued { rate } => {
                rate
            }
            TrafficModel::Bursty { .. } => 0.0,
        }
    }

    pub fn is_bursty(&self) -> bool {
        matches!(self, TrafficModel::Bursty { .. })
    }
}

/// Converts a total normalized load, in packets per slot across the whole
/// population, into the per-user rate in packets per usd.
///
/// The total packet rate is `load / slot_len` per slot, so each user
/// generates `load / (users * slot_len)` packets per slot.
pub fn per_user_rate(load: f64, users: usize, slot_len: f64) -> f64 {
    load / (users as f64 * slot_len * slot_len)
}

/// Target of an arrival: an existing user or a fresh one created by a burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalTarget {
    User(UserId),
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub at: f64,
    pub target: ArrivalTarget,
}

/// Samples every arrival in `window`, sorted by time.
///
/// Poisson arrivals are drawn as one Poisson total over the population with
/// uniform owners and uniform instants, which is the same law as independent
/// per-user processes.
pub fn sample_arrivals<R: Rng + ?Sized>(
    model: &TrafficModel,
    users: usize,
    window: Range<f64>,
    rng: &mut R,
) -> Vec<Arrival> {
    let duration = window.end - window.start;
    if duration <= 0.0 {
        return Vec::new();
    }
    match *model {
        TrafficModel::IidSinglePacket { rate } | TrafficModel::CorrelatedQueued { rate } => {
            let mean = rate * duration * users as f64;
            let count = poisson(mean, rng);
            let mut arrivals: Vec<Arrival> = (0..count)
                .map(|_| Arrival {
                    at: rng.random_range(window.clone()),
                    target: ArrivalTarget::User(rng.random_range(0..users)),
                })
                .collect();
            arrivals.sort_by(|a, b| a.at.total_cmp(&b.at));
            arrivals
        }
        TrafficModel::Bursty {
            burst_rate,
            burst_gap,
        } => {
            let mut arrivals = Vec::new();
            for instant in burst_instants(burst_gap, &window) {
                let count = poisson(burst_rate, rng);
                arrivals.extend((0..count).map(|_| Arrival {
                    at: instant,
                    target: ArrivalTarget::Fresh,
                }));
            }
            arrivals
        }
    }
}

fn burst_instants(gap: Option<f64>, window: &Range<f64>) -> Vec<f64> {
    match gap {
        None => {
            if window.start <= 0.0 && 0.0 < window.end {
                vec![0.0]
            } else {
                Vec::new()
            }
        }
        Some(gap) => {
            assert!(gap > 0.0, "burst gap must be positive");
            let first = (window.start / gap).ceil().max(0.0) as u64;
            (first..)
                .map(|k| k as f64 * gap)
                .take_while(|t| *t < window.end)
                .collect()
        }
    }
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only rejects non-positive or non-finite means.
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as u64
}

/// Running totals used for conservation checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrafficCounters {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_on_arrival: u64,
    pub dropped_on_collision: u64,
}

impl TrafficCounters {
    pub fn dropped(&self) -> u64 {
        self.dropped_on_arrival + self.dropped_on_collision
    }
}

/// All user buffers of a run. Bursty traffic grows the population on demand.
#[derive(Debug, Clone)]
pub struct Population {
    users: Vec<UserState>,
    capacity: Capacity,
    counters: TrafficCounters,
}

impl Population {
    pub fn new(users: usize, capacity: Capacity) -> Self {
        Self {
            users: (0..users).map(|_| UserState::new(capacity)).collect(),
            capacity,
            counters: TrafficCounters::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    pub fn user(&self, id: UserId) -> &UserState {
        &self.users[id]
    }

    pub fn counters(&self) -> TrafficCounters {
        self.counters
    }

    /// Number of packets currently buffered.
    pub fn buffered(&self) -> u64 {
        self.users.iter().map(|u| u.len() as u64).sum()
    }

    pub fn active_set(&self) -> Vec<UserId> {
        active_set(&self.users)
    }

    pub fn active_count(&self) -> usize {
        self.users.iter().filter(|u| u.is_active()).count()
    }

    /// Places one arrival. Returns the owner and any packet evicted by it.
    pub fn admit(&mut self, arrival: Arrival) -> (UserId, Option<Packet>) {
        let owner = match arrival.target {
            ArrivalTarget::User(id) => id,
            ArrivalTarget::Fresh => {
                self.users.push(UserState::new(self.capacity));
                self.users.len() - 1
            }
        };
        self.counters.generated += 1;
        let evicted = self.users[owner].push(Packet::new(owner, arrival.at));
        if evicted.is_some() {
            self.counters.dropped_on_arrival += 1;
        }
        (owner, evicted)
    }

    /// Removes the head packet of `user` as delivered at `at`.
    pub fn deliver_head(&mut self, user: UserId, at: f64) -> Packet {
        let mut packet = self.users[user].pop_for_transmission();
        assert!(at > packet.generated_at, "delivery must follow generation");
        packet.delivered_at = Some(at);
        self.counters.delivered += 1;
        packet
    }

    /// Removes the head packet of `user` after a collision without
    /// retransmission.
    pub fn drop_head(&mut self, user: UserId) -> Packet {
        let packet = self.users[user].pop_for_transmission();
        self.counters.dropped_on_collision += 1;
        packet
    }
}

/// Users with a nonempty buffer, in index order.
pub fn active_set(users: &[UserState]) -> Vec<UserId> {
    users
        .iter()
        .enumerate()
        .filter(|(_, u)| u.is_active())
        .map(|(i, _)| i)
        .collect()
}

/// Samples and admits every arrival in `window`. Returns how many packets
/// were evicted from full buffers.
pub fn generate_arrivals<R: Rng + ?Sized>(
    model: &TrafficModel,
    population: &mut Population,
    window: Range<f64>,
    rng: &mut R,
) -> usize {
    let arrivals = sample_arrivals(model, population.len(), window, rng);
    arrivals
        .into_iter()
        .filter(|a| population.admit(*a).1.is_some())
        .count()
}
