use std::rc::Rc;

use rand::Rng;

use super::{FrameReport, SimRng, System};
use crate::enumeration::{
    decision_regions, iid_prior, map_estimate, observe, poisson_prior, ActivePrior,
    DecisionRegions, NoiseModel, RegionCache,
};
use crate::scheduling::{optimal_l2_asymptotic, ScheduleMode, Scheduler};
use crate::traffic::UserId;

/// Prior the base station assumes for the active count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorModel {
    /// Binomial over the population with the given per-user rate (per usd),
    /// observed over the duration of the previous frame.
    Binomial { rate: f64 },
    /// Poisson with the given mean, truncated at `cap`.
    Poisson { mean: f64, cap: usize },
    /// Flat over `0..=max`.
    Uniform { max: usize },
}

#[derive(Debug, Clone)]
enum SlotPlan {
    /// Known population dealt along a shared permutation.
    Scheduled(Scheduler),
    /// Unbounded population: an active user's position in a random ordering
    /// of infinitely many users, taken modulo `L2`, is uniform over the slots.
    Implicit { overhead_usd: f64 },
}

/// Partial-information multiple access: count the active users, then size
/// and deal the data sub-frame from that count alone.
#[derive(Debug, Clone)]
pub struct Pima {
    noise: NoiseModel,
    prior: PriorModel,
    plan: SlotPlan,
    users: usize,
    regions: RegionCache,
    prev_duration: f64,
}

impl Pima {
    /// PIMA over a population of `users` known to the base station.
    pub fn new(
        users: usize,
        noise: NoiseModel,
        prior: PriorModel,
        mode: ScheduleMode,
        pool_size: usize,
    ) -> Self {
        let scheduler = Scheduler::new(users, mode, pool_size);
        let overhead = scheduler.overhead_usd();
        Self {
            noise,
            prior,
            plan: SlotPlan::Scheduled(scheduler),
            users,
            regions: RegionCache::default(),
            prev_duration: overhead,
        }
    }

    /// PIMA over an arbitrarily large population, with `L2 = nu_hat`.
    pub fn unbounded(noise: NoiseModel, prior: PriorModel, overhead_usd: f64) -> Self {
        assert!(
            !matches!(prior, PriorModel::Binomial { .. }),
            "a binomial prior needs a finite population"
        );
        Self {
            noise,
            prior,
            plan: SlotPlan::Implicit { overhead_usd },
            users: 0,
            regions: RegionCache::default(),
            prev_duration: overhead_usd,
        }
    }

    pub fn overhead_usd(&self) -> f64 {
        match &self.plan {
            SlotPlan::Scheduled(s) => s.overhead_usd(),
            SlotPlan::Implicit { overhead_usd } => *overhead_usd,
        }
    }

    /// Prior used for the next frame.
    pub fn current_prior(&self) -> ActivePrior {
        match self.prior {
            PriorModel::Binomial { rate } => iid_prior(self.users, rate, self.prev_duration),
            PriorModel::Poisson { mean, cap } => poisson_prior(mean, cap),
            PriorModel::Uniform { max } => ActivePrior::uniform(max),
        }
    }

    fn current_regions(&mut self) -> Rc<DecisionRegions> {
        let key = match self.prior {
            PriorModel::Binomial { .. } => self.prev_duration.to_bits(),
            _ => 0,
        };
        let prior = self.current_prior();
        let noise = self.noise;
        self.regions
            .get_or_insert_with(key, || decision_regions(&prior, &noise))
    }

    pub fn run_frame(&mut self, sys: &mut System, rng: &mut SimRng) -> FrameReport {
        let mut report = sys.begin_frame(rng);
        let active = sys.population().active_set();

        // partial information acquisition
        let regions = self.current_regions();
        let obs = observe(active.len(), &self.noise, rng);
        let nu_hat = map_estimate(&obs, &regions);

        let (l2, overhead, slots) = match &self.plan {
            SlotPlan::Scheduled(scheduler) => {
                assert_eq!(
                    sys.population().len(),
                    scheduler.users(),
                    "scheduler built for a different population"
                );
                let schedule = scheduler.schedule(nu_hat, rng);
                let mut slots: Vec<Vec<UserId>> = vec![Vec::new(); schedule.l2()];
                // a missed count leaves the active users waiting a frame
                for &user in &active {
                    if let Some(slot) = schedule.slot_of(user) {
                        slots[slot].push(user);
                    }
                }
                (schedule.l2(), schedule.overhead_usd(), slots)
            }
            SlotPlan::Implicit { overhead_usd } => {
                let l2 = if nu_hat == 0 {
                    0
                } else {
                    optimal_l2_asymptotic(nu_hat)
                };
                let mut slots: Vec<Vec<UserId>> = vec![Vec::new(); l2];
                if l2 > 0 {
                    for &user in &active {
                        slots[rng.random_range(0..l2)].push(user);
                    }
                }
                (l2, *overhead_usd, slots)
            }
        };

        let slot_len = sys.slot_len();
        report.duration = overhead + l2 as f64 * slot_len;
        report.estimate = Some(nu_hat);
        report.data_slots = l2;

        // data transmission; users activated after the beacon wait a frame
        let mut timeline = sys.frame_arrivals(report.duration, rng);
        for (index, transmitters) in slots.into_iter().enumerate() {
            let start = report.start + overhead + index as f64 * slot_len;
            sys.admit_until(&mut timeline, start, &mut report);
            sys.resolve_slot(index, transmitters, start + slot_len, &mut report);
        }
        self.prev_duration = report.duration;
        sys.end_frame(timeline, report)
    }
}
