//! Counting active users from the superposed activity symbol.
//!
//! Every active user inverts its channel and sends one symbol, so the base
//! station observes `y = nu + w`. The MAP decision partitions the real line
//! into intervals, one per hypothesis `b`, whose boundaries follow from the
//! Gaussian likelihood and the prior on the active count.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Tail of the standard normal distribution.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// AWGN on the activity symbol, normalized to unit received amplitude per
/// user. The complex variance `sigma_w_sq` splits evenly between the real
/// and imaginary axes; decisions use the real part only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma_w_sq: f64,
}

impl NoiseModel {
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self {
            sigma_w_sq: 10f64.powf(-snr_db / 10.0),
        }
    }

    pub fn from_variance(sigma_w_sq: f64) -> Result<Self> {
        if !(sigma_w_sq > 0.0 && sigma_w_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive and finite, got {sigma_w_sq}"
            )));
        }
        Ok(Self { sigma_w_sq })
    }

    pub fn sigma_w_sq(&self) -> f64 {
        self.sigma_w_sq
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.sigma_w_sq.log10()
    }

    /// Standard deviation of the real-axis noise, `sigma_w / sqrt(2)`.
    pub fn real_std(&self) -> f64 {
        (self.sigma_w_sq / 2.0).sqrt()
    }
}

/// The real part of the received activity superposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumObservation {
    pub y: f64,
}

/// Draws the observation for `nu` active users.
pub fn observe<R: Rng + ?Sized>(nu: usize, noise: &NoiseModel, rng: &mut R) -> EnumObservation {
    let std = noise.real_std();
    let w = if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    };
    EnumObservation { y: nu as f64 + w }
}

/// Prior pmf over the number of active users, `p(0..=max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivePrior {
    pmf: Vec<f64>,
    /// Natural log of the pmf, kept separately so that masses too small for
    /// `f64` still order the hypotheses.
    ln_pmf: Vec<f64>,
}

impl ActivePrior {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidParameter(
                "prior needs at least one entry".into(),
            ));
        }
        if pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(
                "prior entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "prior must sum to one, got {total}"
            )));
        }
        Ok(Self::from_pmf(pmf))
    }

    fn from_pmf(pmf: Vec<f64>) -> Self {
        let ln_pmf = pmf.iter().map(|p| p.ln()).collect();
        Self { pmf, ln_pmf }
    }

    /// Uniform prior over `0..=max`.
    pub fn uniform(max: usize) -> Self {
        let p = 1.0 / (max + 1) as f64;
        Self::from_pmf(vec![p; max + 1])
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `ln p(b)`; `-inf` only where the prior mass is exactly zero.
    pub fn ln_pmf(&self) -> &[f64] {
        &self.ln_pmf
    }

    /// Largest count with an entry in the pmf.
    pub fn max_count(&self) -> usize {
        self.pmf.len() - 1
    }

    fn from_log_weights(log_w: Vec<f64>) -> Self {
        let peak = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pmf: Vec<f64> = log_w.iter().map(|l| (l - peak).exp()).collect();
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= total);
        let ln_total = peak + total.ln();
        let ln_pmf = log_w.iter().map(|l| l - ln_total).collect();
        // Put the rounding residue on the mode so the sum is one to the ulp.
        let residue = 1.0 - pmf.iter().sum::<f64>();
        let mode = argmax(&pmf);
        pmf[mode] += residue;
        Self { pmf, ln_pmf }
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
            if *v > bv {
                (i, *v)
            } else {
                (bi, bv)
            }
        })
        .0
}

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Binomial prior for `users` independent Poisson sources of rate `rate`
/// observed over `elapsed` usd: each user is active with probability
/// `1 - exp(-rate * elapsed)`.
pub fn iid_prior(users: usize, rate: f64, elapsed: f64) -> ActivePrior {
    assert!(users >= 1, "population must be nonempty");
    assert!(
        rate >= 0.0 && elapsed >= 0.0,
        "rate and window must be nonnegative"
    );
    let x = rate * elapsed;
    let p = -(-x).exp_m1();
    if p <= 0.0 {
        let mut pmf = vec![0.0; users + 1];
        pmf[0] = 1.0;
        return ActivePrior::from_pmf(pmf);
    }
    if p >= 1.0 {
        let mut pmf = vec![0.0; users + 1];
        pmf[users] = 1.0;
        return ActivePrior::from_pmf(pmf);
    }
    let ln_p = p.ln();
    // ln(1 - p) = -x, exact even when p is tiny
    let ln_q = -x;
    let log_w = (0..=users)
        .map(|b| ln_choose(users, b) + b as f64 * ln_p + (users - b) as f64 * ln_q)
        .collect();
    ActivePrior::from_log_weights(log_w)
}

/// Poisson prior with the given mean, truncated to `0..=cap` and
/// renormalized.
pub fn poisson_prior(mean: f64, cap: usize) -> ActivePrior {
    assert!(mean >= 0.0, "mean must be nonnegative");
    if mean == 0.0 {
        let mut pmf = vec![0.0; cap + 1];
        pmf[0] = 1.0;
        return ActivePrior::from_pmf(pmf);
    }
    let ln_mean = mean.ln();
    let log_w = (0..=cap)
        .map(|b| b as f64 * ln_mean - mean - libm::lgamma(b as f64 + 1.0))
        .collect();
    ActivePrior::from_log_weights(log_w)
}

/// Default truncation for a Poisson prior: far enough into the tail that the
/// discarded mass is negligible.
pub fn poisson_cap(mean: f64) -> usize {
    (mean + 12.0 * mean.sqrt() + 30.0).ceil() as usize
}

/// MAP decision regions for a prior and noise level.
///
/// `deltas[b]` is the offset of the boundary between decisions `b` and
/// `b + 1` from `b`, from the pairwise closed form
/// `1/2 + (sigma_w^2 / 2) ln(p(b) / p(b+1))`; it is infinite when one of the
/// two neighbors has zero prior mass. `thresholds[b]` is the boundary the
/// decision actually uses: the crossing points of the upper envelope of the
/// per-hypothesis log-posteriors. Both agree whenever every region is
/// nonempty; otherwise the empty regions collapse to zero width and the
/// thresholds stay nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRegions {
    deltas: Vec<f64>,
    thresholds: Vec<f64>,
}

impl DecisionRegions {
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// `thresholds[b]`: decide `b + 1` or more when `y` reaches it.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn max_count(&self) -> usize {
        self.thresholds.len()
    }

    /// `[lower, upper)` interval of the observation that decides `b`.
    pub fn region(&self, b: usize) -> (f64, f64) {
        let lower = if b == 0 {
            f64::NEG_INFINITY
        } else {
            self.thresholds[b - 1]
        };
        let upper = self.thresholds.get(b).copied().unwrap_or(f64::INFINITY);
        (lower, upper)
    }
}

pub fn decision_regions(prior: &ActivePrior, noise: &NoiseModel) -> DecisionRegions {
    let ln_pmf = prior.ln_pmf();
    let s2 = noise.sigma_w_sq();
    let deltas = ln_pmf
        .windows(2)
        .map(|w| {
            if w[0].is_finite() && w[1].is_finite() {
                0.5 + 0.5 * s2 * (w[0] - w[1])
            } else if w[1] == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    DecisionRegions {
        deltas,
        thresholds: envelope_thresholds(ln_pmf, s2),
    }
}

/// Exact MAP boundaries for arbitrary priors.
///
/// Dropping the common `-y^2 / sigma^2` term, the log-posterior of `b` is the
/// line `(2 b y - b^2) / sigma^2 + ln p(b)` in `y`. Slopes increase with `b`,
/// so the winning hypothesis is read off the upper envelope of these lines.
fn envelope_thresholds(ln_pmf: &[f64], s2: f64) -> Vec<f64> {
    let line = |b: usize| -> (f64, f64) {
        let b_f = b as f64;
        (2.0 * b_f / s2, -b_f * b_f / s2 + ln_pmf[b])
    };
    let crossing = |a: usize, b: usize| -> f64 {
        let (sa, ia) = line(a);
        let (sb, ib) = line(b);
        (ia - ib) / (sb - sa)
    };
    // Hull of hypotheses with positive mass, with the y at which each one
    // starts to win.
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for b in (0..ln_pmf.len()).filter(|&b| ln_pmf[b] > f64::NEG_INFINITY) {
        loop {
            match hull.last() {
                None => {
                    hull.push((b, f64::NEG_INFINITY));
                    break;
                }
                Some(&(top, start)) => {
                    let x = crossing(top, b);
                    if x <= start {
                        hull.pop();
                    } else {
                        hull.push((b, x));
                        break;
                    }
                }
            }
        }
    }
    // Expand to one threshold per adjacent pair. A hypothesis off the hull
    // gets an empty region: both its thresholds sit at the next hull start.
    let max = ln_pmf.len() - 1;
    let mut thresholds = vec![f64::INFINITY; max];
    for (k, &(b, _)) in hull.iter().enumerate() {
        let next_start = hull.get(k + 1).map_or(f64::INFINITY, |h| h.1);
        let next_b = hull.get(k + 1).map_or(max + 1, |h| h.0);
        for t in thresholds.iter_mut().take(next_b).skip(b) {
            *t = next_start;
        }
        if k == 0 {
            for t in thresholds.iter_mut().take(b) {
                *t = f64::NEG_INFINITY;
            }
        }
    }
    thresholds
}

/// MAP estimate of the active count. Observations below the first boundary
/// decide 0 and above the last decide the prior's maximum count.
pub fn map_estimate(obs: &EnumObservation, regions: &DecisionRegions) -> usize {
    regions.thresholds.partition_point(|t| *t <= obs.y)
}

/// Probability of deciding anything but `b` when `b` users are active.
pub fn error_probability(b: usize, regions: &DecisionRegions, noise: &NoiseModel) -> f64 {
    assert!(b <= regions.max_count(), "count outside the prior support");
    let (lower, upper) = regions.region(b);
    if lower >= upper {
        return 1.0;
    }
    let s = noise.real_std();
    let b = b as f64;
    let above = if upper.is_finite() {
        q_function((upper - b) / s)
    } else {
        0.0
    };
    let below = if lower.is_finite() {
        q_function((b - lower) / s)
    } else {
        0.0
    };
    above + below
}

/// Cached decision regions, keyed by whatever determines the prior.
#[derive(Debug, Clone, Default)]
pub(crate) struct RegionCache {
    entries: std::collections::HashMap<u64, std::rc::Rc<DecisionRegions>>,
}

impl RegionCache {
    pub fn get_or_insert_with(
        &mut self,
        key: u64,
        make: impl FnOnce() -> DecisionRegions,
    ) -> std::rc::Rc<DecisionRegions> {
        self.entries
            .entry(key)
            .or_insert_with(|| std::rc::Rc::new(make()))
            .clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_force_map(y: f64, prior: &ActivePrior, noise: &NoiseModel) -> usize {
        let s2 = noise.sigma_w_sq();
        let mut best = (0, f64::NEG_INFINITY);
        for (b, p) in prior.pmf().iter().enumerate() {
            let score = -(y - b as f64).powi(2) / s2 + p.ln();
            if score > best.1 {
                best = (b, score);
            }
        }
        best.0
    }

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.959_963_984_540_054) - 0.025).abs() < 1e-12);
        assert!((q_function(-1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
    }

    #[test]
    fn snr_to_variance() {
        let noise = NoiseModel::from_snr_db(10.0);
        assert!((noise.sigma_w_sq() - 0.1).abs() < 1e-15);
        assert!((noise.real_std() - 0.05f64.sqrt()).abs() < 1e-15);
        assert!((noise.snr_db() - 10.0).abs() < 1e-12);
        assert!(NoiseModel::from_variance(0.0).is_err());
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let noise = NoiseModel::from_snr_db(400.0);
        let obs = observe(7, &noise, &mut ChaCha8Rng::seed_from_u64(1));
        assert!((obs.y - 7.0).abs() < 1e-15);
    }

    #[test]
    fn observation_moments() {
        let noise = NoiseModel::from_variance(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| observe(0, &noise, &mut rng).y).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.001, "mean {mean}");
        assert!((var - 0.05).abs() < 0.001, "var {var}");
    }

    #[test]
    fn iid_prior_edge_cases() {
        let prior = iid_prior(5, 0.0, 10.0);
        assert_eq!(prior.pmf()[0], 1.0);
        assert!(prior.pmf()[1..].iter().all(|p| *p == 0.0));

        // p = 0.5 means rate * elapsed = ln 2
        let prior = iid_prior(2, std::f64::consts::LN_2, 1.0);
        for (got, want) in prior.pmf().iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn iid_prior_normalized_with_mode() {
        let prior = iid_prior(50, 0.1, 1.0);
        let total: f64 = prior.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(argmax(prior.pmf()), 4);
        assert!(ActivePrior::new(prior.pmf().to_vec()).is_ok());
    }

    #[test]
    fn prior_validation() {
        assert!(ActivePrior::new(vec![0.5, 0.6]).is_err());
        assert!(ActivePrior::new(vec![-0.1, 1.1]).is_err());
        assert!(ActivePrior::new(vec![]).is_err());
    }

    #[test]
    fn poisson_prior_sums_to_one() {
        let prior = poisson_prior(1e4, poisson_cap(1e4));
        let total: f64 = prior.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((argmax(prior.pmf()) as f64 - 1e4).abs() <= 1.0);
    }

    #[test]
    fn uniform_prior_gives_half_offsets() {
        let noise = NoiseModel::from_snr_db(10.0);
        let regions = decision_regions(&ActivePrior::uniform(20), &noise);
        assert!(regions.deltas().iter().all(|d| (d - 0.5).abs() < 1e-15));
        for (b, t) in regions.thresholds().iter().enumerate() {
            assert!((t - (b as f64 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_closed_form_with_ratio_e() {
        // p(0)/p(1) = e, sigma_w^2 = 0.1 -> delta_0 = 0.55
        let e = std::f64::consts::E;
        let prior = ActivePrior::new(vec![e / (1.0 + e), 1.0 / (1.0 + e)]).unwrap();
        let regions = decision_regions(&prior, &NoiseModel::from_variance(0.1).unwrap());
        assert!((regions.deltas()[0] - 0.55).abs() < 1e-12);
        assert!((regions.thresholds()[0] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_hypothesis_never_chosen() {
        let prior = ActivePrior::new(vec![0.5, 0.5, 0.0]).unwrap();
        let noise = NoiseModel::from_snr_db(10.0);
        let regions = decision_regions(&prior, &noise);
        assert_eq!(regions.deltas()[1], f64::INFINITY);
        assert_eq!(map_estimate(&EnumObservation { y: 50.0 }, &regions), 1);
        assert_eq!(error_probability(2, &regions, &noise), 1.0);

        let prior = ActivePrior::new(vec![0.0, 0.3, 0.7]).unwrap();
        let regions = decision_regions(&prior, &noise);
        assert_eq!(map_estimate(&EnumObservation { y: -50.0 }, &regions), 1);
    }

    #[test]
    fn map_uniform_is_nearest_integer() {
        let noise = NoiseModel::from_snr_db(0.0);
        let regions = decision_regions(&ActivePrior::uniform(10), &noise);
        assert_eq!(map_estimate(&EnumObservation { y: 2.3 }, &regions), 2);
        assert_eq!(map_estimate(&EnumObservation { y: -5.0 }, &regions), 0);
        assert_eq!(map_estimate(&EnumObservation { y: 99.0 }, &regions), 10);
    }

    #[test]
    fn map_matches_brute_force_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = NoiseModel::from_snr_db(10.0);
        let priors = [
            iid_prior(50, 0.01, 13.0),
            iid_prior(50, 0.5, 13.0),
            poisson_prior(30.0, poisson_cap(30.0)),
            ActivePrior::uniform(50),
        ];
        for prior in &priors {
            let regions = decision_regions(prior, &noise);
            for _ in 0..250_000 {
                let nu = rng.random_range(0..=prior.max_count());
                let obs = observe(nu, &noise, &mut rng);
                assert_eq!(
                    map_estimate(&obs, &regions),
                    brute_force_map(obs.y, prior, &noise),
                    "y = {}",
                    obs.y
                );
            }
        }
    }

    #[test]
    fn envelope_handles_non_log_concave_prior() {
        // A dip at 2 makes hypothesis 2 lose to its neighbors on the whole line.
        let prior = ActivePrior::new(vec![0.3, 0.3, 1e-9, 0.4 - 1e-9]).unwrap();
        let noise = NoiseModel::from_variance(1.0).unwrap();
        let regions = decision_regions(&prior, &noise);
        let t = regions.thresholds();
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100_000 {
            let y = rng.random_range(-3.0..6.0);
            assert_eq!(
                map_estimate(&EnumObservation { y }, &regions),
                brute_force_map(y, &prior, &noise)
            );
        }
    }

    #[test]
    fn log_prior_shift_invariance() {
        let noise = NoiseModel::from_snr_db(10.0);
        let prior = iid_prior(30, 0.2, 5.0);
        // multiplying every entry by a constant shifts the log-prior
        let scaled: Vec<f64> = prior.pmf().iter().map(|p| p * 0.37).collect();
        let total: f64 = scaled.iter().sum();
        let renorm = ActivePrior::new(scaled.iter().map(|p| p / total).collect()).unwrap();
        let a = decision_regions(&prior, &noise);
        let b = decision_regions(&renorm, &noise);
        for (x, y) in a.thresholds().iter().zip(b.thresholds()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn error_probability_uniform_interior() {
        let noise = NoiseModel::from_snr_db(10.0);
        let regions = decision_regions(&ActivePrior::uniform(10), &noise);
        let expected = 2.0 * q_function(0.5 / noise.real_std());
        assert!((error_probability(5, &regions, &noise) - expected).abs() < 1e-15);
        assert!((expected - 0.025_347).abs() < 1e-5);
        // edges lose one tail
        assert!((error_probability(0, &regions, &noise) - expected / 2.0).abs() < 1e-15);
        assert!((error_probability(10, &regions, &noise) - expected / 2.0).abs() < 1e-15);
    }

    #[test]
    fn error_probability_vanishes_without_noise() {
        let noise = NoiseModel::from_snr_db(60.0);
        let regions = decision_regions(&ActivePrior::uniform(10), &noise);
        assert!(error_probability(4, &regions, &noise) < 1e-300);
    }

    #[test]
    fn deltas_approach_half_for_large_population() {
        let noise = NoiseModel::from_snr_db(10.0);
        let small = decision_regions(&iid_prior(50, 0.1, 1.0), &noise);
        let large = decision_regions(&iid_prior(1000, 0.1, 1.0), &noise);
        let worst = |r: &DecisionRegions, lo: usize, hi: usize| {
            r.deltas()[lo..hi]
                .iter()
                .map(|d| (d - 0.5).abs())
                .fold(0.0, f64::max)
        };
        // compare over the bulk of each prior (mean +- 3 std)
        let bulk_small = worst(&small, 1, 10);
        let bulk_large = worst(&large, 80, 110);
        assert!(bulk_large < bulk_small);
        assert!(bulk_large < 0.01, "{bulk_large}");
    }

    #[test]
    fn far_tail_counts_stay_decidable() {
        // p(100) under Poisson(10^4) is below the smallest f64
        let prior = poisson_prior(1e4, poisson_cap(1e4));
        assert_eq!(prior.pmf()[100], 0.0);
        assert!(prior.ln_pmf()[100].is_finite());
        let regions = decision_regions(&prior, &NoiseModel::from_snr_db(10.0));
        assert_eq!(map_estimate(&EnumObservation { y: 100.0 }, &regions), 100);
        // the prior pulls the 0|1 boundary down to about 0.04
        assert_eq!(map_estimate(&EnumObservation { y: 0.0 }, &regions), 0);
        assert_eq!(map_estimate(&EnumObservation { y: 0.1 }, &regions), 1);
    }
}
