//! Frame-efficiency scheduling of the data-transmission sub-frame.
//!
//! Given an estimate of the active count, the base station picks the number
//! of data slots `L2` and deals every user into exactly one slot so that slot
//! loads differ by at most one. Users learn their slot from the index of a
//! pre-shared permutation, which keeps the scheduling beacon short.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the pre-shared permutation lists ("PIMASEQS").
pub const PERMUTATION_POOL_SEED: u64 = 0x5049_4D41_5345_5153;

/// Bits per 64-QAM symbol on the scheduling beacon.
pub const SB_BITS_PER_SYMBOL: u32 = 6;

/// Balanced slot loads: the first `users mod slots` slots get one extra user.
pub fn slot_loads(users: usize, slots: usize) -> Vec<usize> {
    assert!(slots >= 1, "need at least one slot");
    let (base, extra) = (users / slots, users % slots);
    (0..slots).map(|l| base + usize::from(l < extra)).collect()
}

/// Probability that a slot holding `load` of the `users` scheduled users
/// carries exactly one active user, when `active` users are active and every
/// active set of that size is equally likely:
/// `load * C(users - load, active - 1) / C(users, active)`.
pub fn success_probability(users: usize, active: usize, load: usize) -> f64 {
    assert!(active <= users, "more active than scheduled users");
    assert!(load <= users, "slot load exceeds population");
    if active == 0 || load == 0 || active - 1 > users - load {
        return 0.0;
    }
    // C(n-u, v-1) / C(n, v) = (v/n) prod_{i<v-1} (n-u-i)/(n-1-i)
    let n = users as f64;
    let u = load as f64;
    let ratio = (0..active - 1).fold(active as f64 / n, |acc, i| {
        let i = i as f64;
        acc * (n - u - i) / (n - 1.0 - i)
    });
    (u * ratio).clamp(0.0, 1.0)
}

/// Conditional frame efficiency of the balanced assignment: the mean success
/// probability over the `slots` slots.
pub fn efficiency(users: usize, active: usize, slots: usize) -> f64 {
    assert!(slots >= 1, "need at least one slot");
    let (base, extra) = (users / slots, users % slots);
    let heavy = if extra == 0 {
        0.0
    } else {
        success_probability(users, active, base + 1)
    };
    let light = if base == 0 {
        0.0
    } else {
        success_probability(users, active, base)
    };
    (extra as f64 * heavy + (slots - extra) as f64 * light) / slots as f64
}

/// Efficiency with an unbounded population: `(nu / L2) (1 - 1/L2)^(nu - 1)`.
pub fn asymptotic_efficiency(active: usize, slots: usize) -> f64 {
    assert!(slots >= 1, "need at least one slot");
    let l = slots as f64;
    active as f64 / l * libm::pow(1.0 - 1.0 / l, active as f64 - 1.0)
}

/// Populations up to this size are always scanned exhaustively.
pub const EXHAUSTIVE_SCAN_LIMIT: usize = 1024;

fn improves(candidate: f64, best: f64) -> bool {
    best == f64::NEG_INFINITY || candidate > best + 1e-12 * best.abs()
}

/// `L2` in `1..=users` maximizing [`efficiency`], preferring the smaller
/// length on ties.
pub fn optimal_l2_finite(users: usize, active: usize) -> usize {
    assert!(users >= 1, "population must be nonempty");
    let active = active.min(users);
    if active <= 1 {
        return 1;
    }
    if users <= EXHAUSTIVE_SCAN_LIMIT {
        return scan(users, active, 1..=users);
    }
    // Large populations: ternary search over the (near unimodal) curve, then
    // settle the neighborhood exhaustively.
    let (mut lo, mut hi) = (1usize, users);
    while hi - lo > 8 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if efficiency(users, active, m1) < efficiency(users, active, m2) {
            lo = m1 + 1;
        } else {
            hi = m2;
        }
    }
    let from = lo.saturating_sub(8).max(1);
    let to = (hi + 8).min(users);
    scan(users, active, from..=to)
}

fn scan(users: usize, active: usize, range: std::ops::RangeInclusive<usize>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for l2 in range {
        let eta = efficiency(users, active, l2);
        if improves(eta, best.1) {
            best = (l2, eta);
        }
    }
    best.0
}

/// Optimal length without a population bound: exactly the active count.
pub fn optimal_l2_asymptotic(active: usize) -> usize {
    active.max(1)
}

/// Offline table of the optimal data length for every active count.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Table {
    users: usize,
    /// `(L2*, eta*)` for `nu = 1..=users`.
    entries: Vec<(usize, f64)>,
}

impl L2Table {
    pub fn build(users: usize) -> Self {
        let entries = (1..=users)
            .map(|nu| {
                let l2 = optimal_l2_finite(users, nu);
                (l2, efficiency(users, nu, l2))
            })
            .collect();
        Self { users, entries }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Optimal length for `nu` (clamped to the population); 0 for `nu = 0`.
    pub fn l2(&self, nu: usize) -> usize {
        match nu.min(self.users) {
            0 => 0,
            nu => self.entries[nu - 1].0,
        }
    }

    pub fn efficiency(&self, nu: usize) -> f64 {
        match nu.min(self.users) {
            0 => 0.0,
            nu => self.entries[nu - 1].1,
        }
    }

    /// Rows `(nu, L2*, eta*)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, &(l2, eta))| (i + 1, l2, eta))
    }

    /// Writes the table as CSV with header `nu,l2_star,eta_star`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["nu", "l2_star", "eta_star"])?;
        for (nu, l2, eta) in self.rows() {
            w.write_record([nu.to_string(), l2.to_string(), format!("{eta:.12}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform draw from `0..n` by rejection on the high word of a 64x64
/// multiply. Written out so the permutation lists depend only on the
/// ChaCha8 stream, not on a library's sampling strategy.
fn bounded(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    let zone = n.wrapping_neg() % n;
    loop {
        let m = (rng.next_u64() as u128) * (n as u128);
        if (m as u64) >= zone {
            return (m >> 64) as u64;
        }
    }
}

/// The `J` user orderings shared in advance by the base station and users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationPool {
    orders: Vec<Vec<u32>>,
}

impl PermutationPool {
    /// Fisher-Yates shuffles drawn from ChaCha8 seeded with
    /// `PERMUTATION_POOL_SEED ^ users`.
    pub fn generate(users: usize, size: usize) -> Self {
        assert!(size >= 1, "pool needs at least one permutation");
        let mut rng = ChaCha8Rng::seed_from_u64(PERMUTATION_POOL_SEED ^ users as u64);
        let orders = (0..size)
            .map(|_| {
                let mut order: Vec<u32> = (0..users as u32).collect();
                for i in (1..users).rev() {
                    let j = bounded(&mut rng, i as u64 + 1) as usize;
                    order.swap(i, j);
                }
                order
            })
            .collect();
        Self { orders }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn order(&self, index: usize) -> &[u32] {
        &self.orders[index]
    }
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

/// Cost of the partial-information sub-frame in usd: one activity symbol
/// plus the 64-QAM symbols carrying the permutation index and `L2`.
pub fn pia_overhead_usd(pool_size: usize, users: usize) -> f64 {
    let bits = ceil_log2(pool_size) + ceil_log2(users);
    (1 + bits.div_ceil(SB_BITS_PER_SYMBOL)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Maximize the exact finite-population efficiency.
    Finite,
    /// Use `L2 = nu_hat`.
    Asymptotic,
}

/// Slot assignment of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSchedule {
    /// Zero-based slot of each user; empty when no data sub-frame is held.
    slot_of: Vec<usize>,
    l2: usize,
    permutation_index: Option<usize>,
    overhead_usd: f64,
}

impl FrameSchedule {
    pub fn l2(&self) -> usize {
        self.l2
    }

    pub fn permutation_index(&self) -> Option<usize> {
        self.permutation_index
    }

    pub fn overhead_usd(&self) -> f64 {
        self.overhead_usd
    }

    /// Zero-based slot of `user`.
    pub fn slot_of(&self, user: usize) -> Option<usize> {
        self.slot_of.get(user).copied()
    }

    /// The slot selection vector with one-based slot indices.
    pub fn q(&self) -> Vec<usize> {
        self.slot_of.iter().map(|s| s + 1).collect()
    }

    pub fn loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.l2];
        for &s in &self.slot_of {
            loads[s] += 1;
        }
        loads
    }
}

/// Everything the base station needs to schedule a frame for a known
/// population.
#[derive(Debug, Clone)]
pub struct Scheduler {
    users: usize,
    mode: ScheduleMode,
    pool: PermutationPool,
    table: Option<L2Table>,
    overhead_usd: f64,
}

impl Scheduler {
    pub fn new(users: usize, mode: ScheduleMode, pool_size: usize) -> Self {
        let table = (mode == ScheduleMode::Finite).then(|| L2Table::build(users));
        Self {
            users,
            mode,
            pool: PermutationPool::generate(users, pool_size),
            table,
            overhead_usd: pia_overhead_usd(pool_size, users),
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn overhead_usd(&self) -> f64 {
        self.overhead_usd
    }

    pub fn table(&self) -> Option<&L2Table> {
        self.table.as_ref()
    }

    pub fn data_length(&self, nu_hat: usize) -> usize {
        match (self.mode, &self.table) {
            (_, _) if nu_hat == 0 => 0,
            (ScheduleMode::Finite, Some(table)) => table.l2(nu_hat),
            (ScheduleMode::Finite, None) => optimal_l2_finite(self.users, nu_hat),
            (ScheduleMode::Asymptotic, _) => optimal_l2_asymptotic(nu_hat).min(self.users),
        }
    }

    /// Builds the schedule for an estimated active count. `nu_hat = 0` skips
    /// the data sub-frame; the overhead is still paid.
    pub fn schedule<R: Rng + ?Sized>(&self, nu_hat: usize, rng: &mut R) -> FrameSchedule {
        let l2 = self.data_length(nu_hat);
        if l2 == 0 {
            return FrameSchedule {
                slot_of: Vec::new(),
                l2: 0,
                permutation_index: None,
                overhead_usd: self.overhead_usd,
            };
        }
        let index = rng.random_range(0..self.pool.len());
        let mut slot_of = vec![0; self.users];
        for (position, &user) in self.pool.order(index).iter().enumerate() {
            slot_of[user as usize] = position % l2;
        }
        FrameSchedule {
            slot_of,
            l2,
            permutation_index: Some(index),
            overhead_usd: self.overhead_usd,
        }
    }
}

/// One-shot form of [`Scheduler::schedule`]. Estimates above the population
/// are clamped in finite mode.
pub fn build_schedule<R: Rng + ?Sized>(
    users: usize,
    nu_hat: usize,
    mode: ScheduleMode,
    pool_size: usize,
    rng: &mut R,
) -> FrameSchedule {
    Scheduler::new(users, mode, pool_size).schedule(nu_hat, rng)
}
