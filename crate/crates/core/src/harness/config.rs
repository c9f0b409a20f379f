use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::difs::ControlLoopConfig;
use crate::error::{Error, Result};
use crate::fabric::{MetricMode, Scheduler, DEFAULT_ELEPHANT_THRESHOLD};
use crate::network::DEFAULT_QUEUE_FLOOR_PACKETS;
use crate::sim::SimTime;
use crate::tcp::TcpConfig;
use crate::topology::{LinkParams, DEFAULT_CAPACITY_BPS};
use crate::traffic::TrafficPattern;

/// Everything needed to reproduce a run. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub scheduler: Scheduler,
    pub metric_mode: MetricMode,
    pub pattern: TrafficPattern,
    pub duration: f64,
    /// Excluded from the measurement window at the start; defaults to one
    /// sixth of the duration (10 s of a 60 s run).
    pub warmup: Option<f64>,
    /// Excluded at the end; same default as `warmup`.
    pub cooldown: Option<f64>,
    pub seed: u64,
    pub link_capacity_bps: u64,
    pub link_delay: f64,
    pub elephant_threshold: u64,
    pub control_period: f64,
    /// Imbalance threshold; defaults to 1 flow (count) or 100 Mbps (rate).
    pub delta: Option<f64>,
    pub max_moves_per_tick: Option<usize>,
    pub queue_floor_packets: u64,
    pub tcp: TcpConfig,
    /// Throughput sampling interval.
    pub sample_interval: f64,
    /// Quiet control ticks (no EAR anywhere) before balance is checked.
    pub steady_ticks: u32,
    pub snapshot_interval: f64,
    /// Flow expiry as a multiple of the measured average RTT.
    pub expiry_rtts: f64,
    /// Stop early once a shuffle has finished.
    pub stop_when_done: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 4,
            scheduler: Scheduler::Difs,
            metric_mode: MetricMode::Count,
            pattern: TrafficPattern::Random,
            duration: 60.0,
            warmup: None,
            cooldown: None,
            seed: 1,
            link_capacity_bps: DEFAULT_CAPACITY_BPS,
            link_delay: 10e-6,
            elephant_threshold: DEFAULT_ELEPHANT_THRESHOLD,
            control_period: 0.01,
            delta: None,
            max_moves_per_tick: None,
            queue_floor_packets: DEFAULT_QUEUE_FLOOR_PACKETS,
            tcp: TcpConfig::default(),
            sample_interval: 0.1,
            steady_ticks: 10,
            snapshot_interval: 0.1,
            expiry_rtts: 3.0,
            stop_when_done: true,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(match self.metric_mode {
            MetricMode::Count => 1.0,
            MetricMode::MeasuredRate => 100e6,
        })
    }

    /// Warmup rounded to the sampling grid.
    pub fn warmup(&self) -> f64 {
        self.snap(self.warmup.unwrap_or(self.duration / 6.0))
    }

    pub fn cooldown(&self) -> f64 {
        self.snap(self.cooldown.unwrap_or(self.duration / 6.0))
    }

    fn snap(&self, t: f64) -> f64 {
        (t / self.sample_interval).round() * self.sample_interval
    }

    /// Measurement window `[start, end)`.
    pub fn window(&self) -> (SimTime, SimTime) {
        (
            SimTime::from_secs_f64(self.warmup()),
            SimTime::from_secs_f64(self.duration - self.cooldown()),
        )
    }

    pub fn link_params(&self) -> LinkParams {
        LinkParams {
            capacity_bps: self.link_capacity_bps,
            delay: SimTime::from_secs_f64(self.link_delay),
        }
    }

    pub fn control(&self) -> ControlLoopConfig {
        ControlLoopConfig {
            period: SimTime::from_secs_f64(self.control_period),
            delta: self.delta(),
            metric_mode: self.metric_mode,
            max_ears_per_tick: 1,
            max_moves_per_tick: self.max_moves_per_tick,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        if self.k < 4 || self.k % 2 != 0 || self.k > 64 {
            return Err(Error::config(
                "k",
                format!("must be even in 4..=64, got {}", self.k),
            ));
        }
        positive("duration", self.duration)?;
        positive("link_delay", self.link_delay)?;
        positive("control_period", self.control_period)?;
        positive("sample_interval", self.sample_interval)?;
        positive("snapshot_interval", self.snapshot_interval)?;
        positive("expiry_rtts", self.expiry_rtts)?;
        if self.link_capacity_bps == 0 {
            return Err(Error::config("link_capacity_bps", "must be positive"));
        }
        if self.queue_floor_packets == 0 {
            return Err(Error::config("queue_floor_packets", "must be at least 1"));
        }
        for (field, v) in [("warmup", self.warmup), ("cooldown", self.cooldown)] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(Error::config(
                        field,
                        format!("must be non-negative, got {v}"),
                    ));
                }
            }
        }
        if self.duration <= self.warmup() + self.cooldown() {
            return Err(Error::config(
                "duration",
                format!(
                    "must exceed warmup + cooldown ({} + {})",
                    self.warmup(),
                    self.cooldown()
                ),
            ));
        }
        let delta = self.delta();
        match self.metric_mode {
            MetricMode::Count if delta < 1.0 => {
                return Err(Error::config(
                    "delta",
                    format!("must be >= 1 flow, got {delta}"),
                ))
            }
            _ => positive("delta", delta)?,
        }
        self.pattern
            .validate(self.k * self.k * self.k / 4)
            .map_err(|e| match e {
                Error::Config { reason, .. } => Error::config("pattern", reason),
                other => other,
            })?;
        if self.tcp.init_cwnd_segments == 0 {
            return Err(Error::config(
                "tcp.init_cwnd_segments",
                "must be at least 1",
            ));
        }
        if self.tcp.min_rto == SimTime::ZERO || self.tcp.min_rto > self.tcp.max_rto {
            return Err(Error::config(
                "tcp.min_rto",
                "must be positive and <= max_rto",
            ));
        }
        if self.tcp.receive_window < u64::from(crate::network::MSS) {
            return Err(Error::config(
                "tcp.receive_window",
                "must hold at least one segment",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_trim_the_middle_forty_seconds() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.window(), (SimTime::from_secs(10), SimTime::from_secs(50)));
        assert_eq!(c.delta(), 1.0);
    }

    #[test]
    fn short_runs_scale_the_window() {
        let c = ExperimentConfig {
            duration: 6.0,
            ..Default::default()
        };
        assert_eq!(c.window(), (SimTime::from_secs(1), SimTime::from_secs(5)));
    }

    #[test]
    fn json_round_trip_and_field_errors() {
        let c = ExperimentConfig {
            pattern: "stag:0.5:0.3".parse().unwrap(),
            scheduler: Scheduler::Ecmp,
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);

        let partial = r#"{"k": 8, "pattern": "randx:2", "metric_mode": "measured_rate"}"#;
        let p = ExperimentConfig::from_json(partial).unwrap();
        assert_eq!(p.k, 8);
        assert_eq!(p.delta(), 100e6);

        let err = |j: &str| match ExperimentConfig::from_json(j) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(err(r#"{"k": 5}"#), "k");
        assert_eq!(
            err(r#"{"duration": 1, "warmup": 0.6, "cooldown": 0.5}"#),
            "duration"
        );
        assert_eq!(err(r#"{"delta": 0.5}"#), "delta");
        assert_eq!(err(r#"{"link_delay": 0}"#), "link_delay");
        assert_eq!(err(r#"{"pattern": "stride:16"}"#), "pattern");
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
