//! Experiment runner: configuration, the simulation engine, metrics,
//! balance validation, scripted scenarios and result files.

pub mod config;
pub mod metrics;
pub mod output;
pub mod scenario;
pub mod validate;
pub mod world;

use serde::Serialize;

pub use config::ExperimentConfig;
pub use metrics::{convergence_time, Convergence, MetricsReport};
pub use scenario::{scenario_check, ScenarioName, ScenarioReport};
pub use world::World;

use crate::error::Result;
use validate::ScopeSummary;

/// Build, run and measure one experiment. Result files are written when
/// `cfg.out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(World, MetricsReport)> {
    let mut w = World::new(cfg)?;
    w.install_pattern()?;
    w.run();
    let report = MetricsReport::from_world(&w);
    if let Some(dir) = &cfg.out_dir {
        output::write_all(dir, &w, &report)?;
    }
    Ok((w, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsCheck {
    pub passed: bool,
    /// Steady-state snapshots evaluated; zero means the run never settled.
    pub snapshots: u64,
    pub table: Vec<ScopeSummary>,
}

/// Compare every steady-state margin snapshot of a finished run against
/// its bound.
pub fn validate_bounds(w: &World) -> BoundsCheck {
    BoundsCheck {
        passed: w.balance.enforced_violations() == 0,
        snapshots: w.balance.snapshots,
        table: w.balance.summary(),
    }
}

impl BoundsCheck {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<14} {:>8} {:>8} {:>10}\n",
            "scope", "spread", "bound", "violations"
        );
        for r in &self.table {
            let scope = serde_json::to_value(r.scope).unwrap_or_default();
            let name = format!(
                "{}{}",
                scope.as_str().unwrap_or("?"),
                if r.enforced { "" } else { "*" }
            );
            s.push_str(&format!(
                "{:<14} {:>8} {:>8} {:>10}\n",
                name, r.worst_spread, r.bound, r.violations
            ));
        }
        s.push_str(&format!(
            "{} steady snapshots; * = reported only\n",
            self.snapshots
        ));
        s
    }
}
