//! Terminal-condition rate tables for evaluation batteries.

use crate::episode::{Episode, Mode};
use crate::world::TerminationCause;

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub mode: Mode,
    pub trials: usize,
    /// `(code, count)` in column order.
    pub counts: Vec<(&'static str, usize)>,
}

impl RateReport {
    /// Columns are RG, LC, HC, HP, HO in SCN mode and RG, HP, HO otherwise,
    /// followed by TO for episodes that hit the step cap.
    pub fn columns(mode: Mode) -> &'static [TerminationCause] {
        use TerminationCause::*;
        match mode {
            Mode::Scn => &[GoalReached, Stray, HitCompanion, HitPedestrian, HitObstacle, None],
            Mode::NonScn => &[GoalReached, HitPedestrian, HitObstacle, None],
        }
    }

    pub fn from_causes(mode: Mode, causes: impl IntoIterator<Item = TerminationCause>) -> Self {
        let cols = Self::columns(mode);
        let mut counts: Vec<(&'static str, usize)> = cols.iter().map(|c| (c.code(), 0)).collect();
        let mut trials = 0;
        for cause in causes {
            trials += 1;
            let k = cols
                .iter()
                .position(|c| *c == cause)
                .unwrap_or_else(|| panic!("{} cannot occur in {} mode", cause.code(), mode.as_str()));
            counts[k].1 += 1;
        }
        Self { mode, trials, counts }
    }

    pub fn from_episodes(mode: Mode, episodes: &[Episode]) -> Self {
        Self::from_causes(mode, episodes.iter().map(|e| e.cause))
    }

    /// Percentage of trials ending with `code`.
    pub fn rate(&self, code: &str) -> Option<f64> {
        let (_, n) = self.counts.iter().find(|(c, _)| *c == code)?;
        Some(if self.trials == 0 {
            0.0
        } else {
            100.0 * *n as f64 / self.trials as f64
        })
    }

    pub fn header(&self) -> String {
        let mut h = String::from("planner,mode,trials");
        for (c, _) in &self.counts {
            h.push(',');
            h.push_str(c);
        }
        h
    }

    /// One CSV row with rates in percent to two decimals.
    pub fn row(&self, planner: &str) -> String {
        let mut r = format!("{planner},{},{}", self.mode.as_str(), self.trials);
        for (c, _) in &self.counts {
            r.push_str(&format!(",{:.2}", self.rate(c).unwrap()));
        }
        r
    }
}
