//! Steady-state balance bookkeeping over periodic margin snapshots.

use serde::Serialize;

use crate::difs::{MarginScope, ScopeMargin};
use crate::sim::SimTime;

#[derive(Debug, Clone, Serialize)]
pub struct MarginRow {
    pub time: SimTime,
    #[serde(flatten)]
    pub margin: ScopeMargin,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScopeSummary {
    pub scope: MarginScope,
    pub enforced: bool,
    pub bound: f64,
    pub worst_spread: u32,
    pub violations: u64,
}

#[derive(Debug, Default)]
pub struct BalanceTracker {
    pub snapshots: u64,
    pub rows: Vec<MarginRow>,
    pub violations: Vec<MarginRow>,
    /// Flow tables at the first snapshot with a violation.
    pub first_violation_dump: Option<serde_json::Value>,
}

impl BalanceTracker {
    pub fn record(
        &mut self,
        now: SimTime,
        margins: &[ScopeMargin],
        dump: impl FnOnce() -> serde_json::Value,
    ) {
        self.snapshots += 1;
        let mut bad = false;
        for m in margins {
            let row = MarginRow {
                time: now,
                margin: *m,
            };
            if m.violated() {
                bad = true;
                self.violations.push(row.clone());
            }
            self.rows.push(row);
        }
        if bad && self.first_violation_dump.is_none() {
            self.first_violation_dump = Some(dump());
        }
    }

    pub fn enforced_violations(&self) -> usize {
        self.violations.len()
    }

    /// Worst spread seen per scope, in a fixed scope order.
    pub fn summary(&self) -> Vec<ScopeSummary> {
        let mut out: Vec<ScopeSummary> = Vec::new();
        for r in &self.rows {
            let m = &r.margin;
            let s = match out.iter_mut().find(|s| s.scope == m.scope) {
                Some(s) => s,
                None => {
                    out.push(ScopeSummary {
                        scope: m.scope,
                        enforced: m.enforced,
                        bound: m.bound,
                        worst_spread: 0,
                        violations: 0,
                    });
                    out.last_mut().unwrap()
                }
            };
            s.worst_spread = s.worst_spread.max(m.spread());
            s.violations += u64::from(m.violated());
        }
        out
    }
}
