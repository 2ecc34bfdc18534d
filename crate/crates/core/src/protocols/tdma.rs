use super::{FrameReport, SimRng, System};

/// Fixed frames of one dedicated slot per user. A user sends its head packet
/// if its buffer is nonempty when its slot begins.
#[derive(Debug, Clone, Copy, Default)]
pub struct Tdma;

impl Tdma {
    pub fn run_frame(&mut self, sys: &mut System, rng: &mut SimRng) -> FrameReport {
        let mut report = sys.begin_frame(rng);
        let users = sys.population().len();
        let slot_len = sys.slot_len();
        report.duration = users as f64 * slot_len;
        report.data_slots = users;

        let mut timeline = sys.frame_arrivals(report.duration, rng);
        let mut transmitting = 0;
        for user in 0..users {
            let start = report.start + user as f64 * slot_len;
            sys.admit_until(&mut timeline, start, &mut report);
            let transmitters = if sys.population().user(user).is_active() {
                transmitting += 1;
                vec![user]
            } else {
                Vec::new()
            };
            sys.resolve_slot(user, transmitters, start + slot_len, &mut report);
        }
        report.estimate = Some(transmitting);
        sys.end_frame(timeline, report)
    }
}
