//! Frame efficiency, latency, drop probability and burst transmission time.

use crate::protocols::FrameReport;
use crate::traffic::Packet;

/// Running mean and second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    /// Standard error of the mean; absent below two samples.
    pub fn std_error(&self) -> Option<f64> {
        if self.count < 2 {
            return None;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Some((var / n).sqrt())
    }
}

/// Per-run accumulators.
#[derive(Debug, Clone, Default)]
pub struct MetricsLedger {
    eta: Moments,
    latency: Moments,
    generated: u64,
    delivered: u64,
    dropped: u64,
    burst_times: Vec<f64>,
    frames: u64,
    measure_from: f64,
}

impl MetricsLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Packets generated before `t` are ignored, as are frames starting
    /// before it.
    pub fn measuring_from(t: f64) -> Self {
        Self {
            measure_from: t,
            ..Self::default()
        }
    }

    pub fn set_measure_from(&mut self, t: f64) {
        self.measure_from = t;
    }

    pub fn measure_from(&self) -> f64 {
        self.measure_from
    }

    /// Adds a frame-efficiency sample when the frame scheduled anyone.
    pub fn record_frame(&mut self, successes: usize, l2: usize, nu_hat: usize) {
        if nu_hat == 0 || l2 == 0 {
            return;
        }
        debug_assert!(successes <= l2, "more successes than slots");
        self.eta.push(successes as f64 / l2 as f64);
    }

    pub fn record_generated(&mut self, at: f64) {
        if at >= self.measure_from {
            self.generated += 1;
        }
    }

    pub fn record_delivery(&mut self, packet: &Packet) {
        if packet.generated_at < self.measure_from {
            return;
        }
        let latency = packet.latency().expect("delivered packet has a latency");
        debug_assert!(latency > 0.0, "nonpositive latency");
        self.delivered += 1;
        self.latency.push(latency);
    }

    pub fn record_drop(&mut self, packet: &Packet) {
        if packet.generated_at >= self.measure_from {
            self.dropped += 1;
        }
    }

    pub fn record_burst(&mut self, duration: f64) {
        self.burst_times.push(duration);
    }

    /// Feeds everything a frame produced into the ledger.
    pub fn ingest(&mut self, report: &FrameReport) {
        for &at in &report.generated {
            self.record_generated(at);
        }
        for packet in &report.delivered {
            self.record_delivery(packet);
        }
        for packet in &report.dropped {
            self.record_drop(packet);
        }
        for &d in &report.burst_times {
            self.record_burst(d);
        }
        if report.start >= self.measure_from {
            self.frames += 1;
            if let Some(nu_hat) = report.estimate {
                self.record_frame(report.successes(), report.data_slots, nu_hat);
            }
        }
    }

    /// Combines ledgers of independent runs.
    pub fn merge(&mut self, other: &MetricsLedger) {
        self.eta.merge(&other.eta);
        self.latency.merge(&other.latency);
        self.generated += other.generated;
        self.delivered += other.delivered;
        self.dropped += other.dropped;
        self.burst_times.extend_from_slice(&other.burst_times);
        self.frames += other.frames;
    }

    pub fn generated(&self) -> u64 {
        self.generated
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn burst_times(&self) -> &[f64] {
        &self.burst_times
    }

    pub fn finalize(&self) -> Summary {
        let mut bursts = Moments::default();
        for &d in &self.burst_times {
            bursts.push(d);
        }
        let p_drop = (self.generated > 0).then(|| self.dropped as f64 / self.generated as f64);
        Summary {
            eta_bar: self.eta.mean(),
            eta_se: self.eta.std_error(),
            eta_frames: self.eta.count(),
            d_bar_usd: self.latency.mean(),
            d_bar_se: self.latency.std_error(),
            p_drop,
            p_drop_se: p_drop.map(|p| (p * (1.0 - p) / self.generated as f64).sqrt()),
            d_burst_usd: bursts.mean(),
            d_burst_se: bursts.std_error(),
            eccdf: eccdf(&self.burst_times),
            frames: self.frames,
            generated: self.generated,
            delivered: self.delivered,
            dropped: self.dropped,
        }
    }
}

/// Final metrics of a run; `None` marks a metric without samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub eta_bar: Option<f64>,
    pub eta_se: Option<f64>,
    /// Frames contributing to `eta_bar`.
    pub eta_frames: u64,
    pub d_bar_usd: Option<f64>,
    pub d_bar_se: Option<f64>,
    pub p_drop: Option<f64>,
    pub p_drop_se: Option<f64>,
    pub d_burst_usd: Option<f64>,
    pub d_burst_se: Option<f64>,
    pub eccdf: Vec<(f64, f64)>,
    pub frames: u64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Fraction of samples strictly above each distinct sample value.
pub fn eccdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        out.push((x, (sorted.len() - j) as f64 / n));
        i = j;
    }
    out
}

/// Evaluates an ECCDF at an arbitrary point.
pub fn eccdf_at(samples: &[f64], x: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let above = samples.iter().filter(|&&s| s > x).count();
    Some(above as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_sample() {
        let mut ledger = MetricsLedger::new();
        ledger.record_frame(3, 5, 5);
        assert_eq!(ledger.finalize().eta_bar, Some(0.6));
    }

    #[test]
    fn empty_frames_skipped() {
        let mut ledger = MetricsLedger::new();
        ledger.record_frame(0, 0, 0);
        let s = ledger.finalize();
        assert_eq!(s.eta_bar, None);
        assert_eq!(s.eta_frames, 0);
    }

    #[test]
    fn constant_stream() {
        let mut ledger = MetricsLedger::new();
        for _ in 0..10_000 {
            ledger.record_frame(1, 2, 3);
        }
        let s = ledger.finalize();
        assert_eq!(s.eta_bar, Some(0.5));
        assert_eq!(s.eta_se, Some(0.0));
    }

    #[test]
    fn absent_latency() {
        let s = MetricsLedger::new().finalize();
        assert_eq!(s.d_bar_usd, None);
        assert_eq!(s.p_drop, None);
        assert_eq!(s.d_burst_usd, None);
        assert!(s.eccdf.is_empty());
    }

    #[test]
    fn drop_ratio() {
        let mut ledger = MetricsLedger::new();
        for i in 0..10 {
            ledger.record_generated(i as f64);
        }
        ledger.record_drop(&Packet::new(0, 1.0));
        ledger.record_drop(&Packet::new(1, 2.0));
        assert_eq!(ledger.finalize().p_drop, Some(0.2));
    }

    #[test]
    fn warmup_filters_old_packets() {
        let mut ledger = MetricsLedger::measuring_from(100.0);
        ledger.record_generated(50.0);
        ledger.record_generated(150.0);
        let mut old = Packet::new(0, 50.0);
        old.delivered_at = Some(160.0);
        let mut new = Packet::new(1, 150.0);
        new.delivered_at = Some(160.0);
        ledger.record_delivery(&old);
        ledger.record_delivery(&new);
        let s = ledger.finalize();
        assert_eq!(s.generated, 1);
        assert_eq!(s.delivered, 1);
        assert_eq!(s.d_bar_usd, Some(10.0));
    }

    #[test]
    fn eccdf_hand_count() {
        let samples = [100.0, 200.0, 300.0];
        assert_eq!(eccdf_at(&samples, 150.0), Some(2.0 / 3.0));
        let curve = eccdf(&samples);
        assert_eq!(
            curve,
            vec![(100.0, 2.0 / 3.0), (200.0, 1.0 / 3.0), (300.0, 0.0)]
        );
    }

    #[test]
    fn eccdf_ties() {
        let curve = eccdf(&[5.0, 5.0, 7.0, 5.0]);
        assert_eq!(curve, vec![(5.0, 0.25), (7.0, 0.0)]);
    }

    #[test]
    fn merge_adds_up() {
        let mut a = MetricsLedger::new();
        a.record_frame(1, 2, 2);
        a.record_burst(10.0);
        let mut b = MetricsLedger::new();
        b.record_frame(2, 2, 2);
        b.record_burst(30.0);
        a.merge(&b);
        let s = a.finalize();
        assert_eq!(s.eta_bar, Some(0.75));
        assert_eq!(s.d_burst_usd, Some(20.0));
        assert_eq!(s.eccdf.len(), 2);
    }
}
