//! Exhaustive reference computations for small populations.
//!
//! Everything here enumerates activation subsets directly or works in exact
//! integer arithmetic, independently of the closed forms in
//! [`crate::scheduling`].

use rand::SeedableRng;

use crate::enumeration::{
    decision_regions, error_probability, map_estimate, observe, ActivePrior, NoiseModel,
};
use crate::scheduling::{asymptotic_efficiency, efficiency, optimal_l2_finite};

/// `C(n, k)` exactly; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Slot membership masks of the round-robin assignment `user -> user mod slots`.
fn round_robin(users: usize, slots: usize) -> Vec<u32> {
    let mut members = vec![0u32; slots];
    for user in 0..users {
        members[user % slots] |= 1 << user;
    }
    members
}

/// Users delivered in a frame: the union of slots holding exactly one
/// active member.
fn delivered(active: u32, members: &[u32]) -> u32 {
    members
        .iter()
        .map(|&m| m & active)
        .filter(|a| a.count_ones() == 1)
        .fold(0, |acc, a| acc | a)
}

/// Frame efficiency averaged over every activation subset of size `active`,
/// by enumeration. Limited to 24 users.
pub fn brute_force_efficiency(users: usize, active: usize, slots: usize) -> f64 {
    assert!(users <= 24, "enumeration limited to 24 users");
    assert!(slots >= 1 && active <= users);
    let members = round_robin(users, slots);
    let (mut total, mut subsets) = (0u64, 0u64);
    for mask in 0u32..(1 << users) {
        if mask.count_ones() as usize != active {
            continue;
        }
        subsets += 1;
        total += u64::from(delivered(mask, &members).count_ones());
    }
    total as f64 / (subsets as f64 * slots as f64)
}

/// Expected successes times `C(users, active)`, exactly, for the balanced
/// assignment into `slots` slots.
pub fn efficiency_numerator(users: usize, active: usize, slots: usize) -> u128 {
    if active == 0 {
        return 0;
    }
    let (base, extra) = (users / slots, users % slots);
    let per_slot = |load: usize| -> u128 {
        load as u128 * binomial((users - load) as u64, (active - 1) as u64)
    };
    let heavy = if extra == 0 { 0 } else { per_slot(base + 1) };
    extra as u128 * heavy + (slots - extra) as u128 * per_slot(base)
}

/// Exact argmax of the frame efficiency over `1..=users`, smaller length on
/// ties. Compares `num(a) / a` against `num(b) / b` by cross multiplication.
pub fn exact_optimal_l2(users: usize, active: usize) -> usize {
    let mut best = (1usize, efficiency_numerator(users, active, 1));
    for slots in 2..=users {
        let num = efficiency_numerator(users, active, slots);
        if num * best.0 as u128 > best.1 * slots as u128 {
            best = (slots, num);
        }
    }
    best.0
}

/// A schedule in which one user holding two slots delivers more packets in
/// expectation than the single-slot schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DuplicationGain {
    pub users: usize,
    pub active: usize,
    pub slots: usize,
    pub user: usize,
    pub extra_slot: usize,
}

/// Searches every population up to `max_users` for a duplication that
/// raises the expected number of delivered packets per slot.
pub fn find_duplication_gain(max_users: usize) -> Option<DuplicationGain> {
    assert!(max_users <= 16, "enumeration limited to 16 users");
    for users in 1..=max_users {
        for slots in 1..=users {
            let base = round_robin(users, slots);
            let mut base_total = vec![0u64; users + 1];
            for mask in 0u32..(1 << users) {
                base_total[mask.count_ones() as usize] +=
                    u64::from(delivered(mask, &base).count_ones());
            }
            for user in 0..users {
                for extra_slot in (0..slots).filter(|&s| s != user % slots) {
                    let mut dup = base.clone();
                    dup[extra_slot] |= 1 << user;
                    let mut dup_total = vec![0u64; users + 1];
                    for mask in 0u32..(1 << users) {
                        dup_total[mask.count_ones() as usize] +=
                            u64::from(delivered(mask, &dup).count_ones());
                    }
                    if let Some(active) = (0..=users).find(|&a| dup_total[a] > base_total[a]) {
                        return Some(DuplicationGain {
                            users,
                            active,
                            slots,
                            user,
                            extra_slot,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Argmax over `1..=max_slots` of the unbounded-population efficiency,
/// evaluated in the log domain.
pub fn asymptotic_argmax(active: usize, max_slots: usize) -> usize {
    let score = |l: usize| {
        let l = l as f64;
        (active as f64).ln() - l.ln() + (active as f64 - 1.0) * (1.0 - 1.0 / l).ln()
    };
    (1..=max_slots)
        .map(|l| {
            (
                l,
                if l == 1 && active > 1 {
                    f64::NEG_INFINITY
                } else {
                    score(l)
                },
            )
        })
        .fold((1, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
        .0
}

/// Outcome of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs the exhaustive checks of the scheduler and estimator.
pub fn validate() -> Vec<Check> {
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for users in 1..=12 {
        for active in 0..=users {
            for slots in 1..=users {
                let d = (efficiency(users, active, slots)
                    - brute_force_efficiency(users, active, slots))
                .abs();
                worst = worst.max(d);
            }
        }
    }
    checks.push(Check {
        name: "success probability matches enumeration",
        passed: worst <= 1e-12,
        detail: format!("max abs error {worst:e} over N <= 12"),
    });

    let off: Vec<usize> = (2..=50)
        .filter(|&nu| {
            let lib = (1..=500)
                .map(|l| (l, asymptotic_efficiency(nu, l)))
                .fold((1, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
                .0;
            lib != nu || asymptotic_argmax(nu, 500) != nu
        })
        .collect();
    checks.push(Check {
        name: "unbounded population optimum is L2 = nu",
        passed: off.is_empty(),
        detail: format!("mismatches at nu = {off:?}"),
    });

    let gain = find_duplication_gain(10);
    checks.push(Check {
        name: "single-slot assignment is optimal",
        passed: gain.is_none(),
        detail: format!("counterexample: {gain:?}"),
    });

    let wrong: Vec<usize> = (1..=50)
        .filter(|&nu| optimal_l2_finite(50, nu) != exact_optimal_l2(50, nu))
        .collect();
    checks.push(Check {
        name: "finite-population L2 matches exact argmax",
        passed: wrong.is_empty(),
        detail: format!("mismatches at nu = {wrong:?}"),
    });

    let (rate, analytic, se) = estimator_error_rate(1_000_000, 0x5eed);
    checks.push(Check {
        name: "estimator error rate matches analytic value",
        passed: (rate - analytic).abs() <= 3.0 * se,
        detail: format!("simulated {rate:.5}, analytic {analytic:.5}, se {se:.5}"),
    });

    checks
}

/// Monte Carlo count-estimation error at 10 dB under a flat prior on
/// `0..=50`, drawing interior counts. Returns (simulated, analytic, std error).
pub fn estimator_error_rate(trials: u64, seed: u64) -> (f64, f64, f64) {
    let noise = NoiseModel::from_snr_db(10.0);
    let prior = ActivePrior::uniform(50);
    let regions = decision_regions(&prior, &noise);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let nu = 25;
    let errors = (0..trials)
        .filter(|_| map_estimate(&observe(nu, &noise, &mut rng), &regions) != nu)
        .count();
    let analytic = error_probability(nu, &regions, &noise);
    let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
    (errors as f64 / trials as f64, analytic, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(50, 25), 126_410_606_437_752);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn hand_enumeration() {
        // four users, two slots {0,2},{1,3}, two active: 4 of 6 pairs split
        assert!((brute_force_efficiency(4, 2, 2) - 8.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn slot_counting_would_favor_duplication() {
        // two users, two slots; user 0 also in slot 1. Counting successful
        // slots instead of delivered packets rewards the duplicate.
        let members = [0b01u32, 0b11];
        let slots_ok = |active: u32| {
            members
                .iter()
                .filter(|&&m| (m & active).count_ones() == 1)
                .count()
        };
        assert_eq!(slots_ok(0b01) + slots_ok(0b10), 3);
        assert_eq!(
            delivered(0b01, &members).count_ones() + delivered(0b10, &members).count_ones(),
            2
        );
    }
}
