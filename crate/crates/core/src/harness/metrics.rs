//! Throughput accounting, convergence and per-run summary statistics.

use serde::Serialize;

use crate::difs::EAR_BYTES;
use crate::sim::SimTime;
use crate::tcp::ReorderStats;

use super::validate::ScopeSummary;
use super::world::{EarFate, RunCounters, World};

/// Per-interval receive rates (bps), one row per sampling interval and one
/// column per host. Row `i` covers `[i*dt, (i+1)*dt)`.
pub fn interval_rates(samples: &[Vec<u64>], dt: f64) -> Vec<Vec<f64>> {
    samples
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) as f64 * 8.0 / dt)
                .collect()
        })
        .collect()
}

/// Sum of per-host average receive rates over samples `[from, to]`.
pub fn bisection_bps(samples: &[Vec<u64>], dt: f64, from: usize, to: usize) -> f64 {
    if to <= from || to >= samples.len() {
        return 0.0;
    }
    let span = (to - from) as f64 * dt;
    samples[from]
        .iter()
        .zip(&samples[to])
        .map(|(a, b)| (b - a) as f64 * 8.0 / span)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    /// Start of the first interval from which the aggregate stays at or
    /// above `fraction` of steady state; the run length if it never does.
    pub time: f64,
    pub converged: bool,
    pub steady_bps: f64,
    pub fraction: f64,
}

/// Earliest interval start after which `series` stays at or above
/// `fraction` times the mean of its final quartile.
pub fn convergence_time(series: &[f64], dt: f64, fraction: f64) -> Convergence {
    assert!(!series.is_empty(), "empty throughput series");
    let q = series.len() - series.len() * 3 / 4;
    let tail = &series[series.len() - q..];
    let steady = tail.iter().sum::<f64>() / tail.len() as f64;
    let floor = fraction * steady;
    let first_ok = series.iter().rposition(|&x| x < floor).map_or(0, |i| i + 1);
    let converged = first_ok < series.len();
    Convergence {
        time: if converged {
            first_ok as f64 * dt
        } else {
            series.len() as f64 * dt
        },
        converged,
        steady_bps: steady,
        fraction,
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ReorderSummary {
    pub flows: usize,
    pub avg_ratio: f64,
    pub max_ratio: f64,
    pub avg_window: f64,
    pub max_window: f64,
    pub total: ReorderStats,
}

impl ReorderSummary {
    pub fn from_stats<'a>(stats: impl IntoIterator<Item = &'a ReorderStats>) -> Self {
        let mut s = ReorderSummary::default();
        let (mut ratio_sum, mut window_sum, mut windows) = (0.0, 0.0, 0usize);
        for st in stats {
            s.total.merge(st);
            if let Some(r) = st.ratio() {
                s.flows += 1;
                ratio_sum += r;
                s.max_ratio = s.max_ratio.max(r);
            }
            if let Some(w) = st.window() {
                windows += 1;
                window_sum += w;
                s.max_window = s.max_window.max(w);
            }
        }
        if s.flows > 0 {
            s.avg_ratio = ratio_sum / s.flows as f64;
        }
        if windows > 0 {
            s.avg_window = window_sum / windows as f64;
        }
        s
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EarSummary {
    pub count: u64,
    pub bytes: u64,
    pub applied: u64,
    pub already_there: u64,
    pub discarded: u64,
    pub link_down: u64,
    pub in_flight: u64,
    pub hops: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShuffleSummary {
    pub transfers: usize,
    pub completed_transfers: usize,
    pub bytes_per_transfer: u64,
    /// Time the last host finished receiving.
    pub total_time: Option<f64>,
    pub mean_host_completion: Option<f64>,
    pub host_completion: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TcpTotals {
    pub flows: usize,
    pub completed: usize,
    pub segments_sent: u64,
    pub retransmits: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
    pub duplicates: u64,
    pub corrupt_segments: u64,
    pub delivered_bytes: u64,
    pub path_changes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    pub snapshots: u64,
    pub violations: usize,
    pub scopes: Vec<ScopeSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub num_hosts: usize,
    pub simulated_secs: f64,
    pub window: (f64, f64),
    pub sample_interval: f64,
    pub bisection_bps: f64,
    /// Bisection bandwidth over `num_hosts` times the link rate.
    pub normalized_bisection: f64,
    /// Relative gap between the per-host sum and total bytes over the window.
    pub accounting_error: f64,
    pub convergence: Convergence,
    /// Aggregate throughput per interval as a fraction of steady state.
    pub convergence_curve: Vec<f64>,
    pub shuffle: Option<ShuffleSummary>,
    pub reorder: ReorderSummary,
    pub ear: EarSummary,
    pub tcp: TcpTotals,
    pub balance: Option<BalanceReport>,
    pub unreachable_flows: usize,
    pub counters: RunCounters,
    pub trace_digest: String,
    #[serde(skip)]
    pub host_series: Vec<Vec<f64>>,
    #[serde(skip)]
    pub aggregate_series: Vec<f64>,
}

impl MetricsReport {
    pub fn from_world(w: &World) -> Self {
        let cfg = &w.cfg;
        let dt = cfg.sample_interval;
        let samples = w.rx_samples();
        let host_series = interval_rates(samples, dt);
        let aggregate_series: Vec<f64> = host_series.iter().map(|r| r.iter().sum()).collect();
        let num_hosts = w.topo().num_hosts();

        let last = samples.len() - 1;
        let (from, mut to) = if w.shuffle().is_some() {
            // a finite job: measure from its start to the last full sample
            (0, last)
        } else {
            let (ws, we) = cfg.window();
            (
                (ws.as_secs_f64() / dt).round() as usize,
                (we.as_secs_f64() / dt).round() as usize,
            )
        };
        to = to.min(last);
        let from = from.min(to);
        let bisection = bisection_bps(samples, dt, from, to);
        let total_bytes: u64 = samples
            .get(to)
            .map(|s| s.iter().sum::<u64>() - samples[from].iter().sum::<u64>())
            .unwrap_or(0);
        let direct = if to > from {
            total_bytes as f64 * 8.0 / ((to - from) as f64 * dt)
        } else {
            0.0
        };
        let accounting_error = if direct > 0.0 {
            (bisection - direct).abs() / direct
        } else {
            0.0
        };

        let convergence = if aggregate_series.is_empty() {
            Convergence {
                time: 0.0,
                converged: false,
                steady_bps: 0.0,
                fraction: 0.95,
            }
        } else {
            convergence_time(&aggregate_series, dt, 0.95)
        };
        let convergence_curve = aggregate_series
            .iter()
            .map(|x| {
                if convergence.steady_bps > 0.0 {
                    x / convergence.steady_bps
                } else {
                    0.0
                }
            })
            .collect();

        let mut tcp = TcpTotals::default();
        for e in w.conns().iter() {
            let c = e.sender.counters();
            tcp.flows += 1;
            tcp.completed += usize::from(e.completed_at.is_some());
            tcp.segments_sent += c.segments_sent;
            tcp.retransmits += c.retransmits;
            tcp.fast_retransmits += c.fast_retransmits;
            tcp.timeouts += c.timeouts;
            tcp.duplicates += e.receiver.duplicates();
            tcp.corrupt_segments += e.receiver.corrupt_segments();
            tcp.delivered_bytes += e.receiver.delivered();
            tcp.path_changes += w.path_changes(e.sender.flow());
        }
        let reorder = ReorderSummary::from_stats(w.conns().iter().map(|e| e.receiver.stats()));

        let mut ear = EarSummary {
            count: w.ears().len() as u64,
            bytes: w.ears().len() as u64 * EAR_BYTES,
            ..Default::default()
        };
        for r in w.ears() {
            ear.hops += r.links.len() as u64;
            match r.fate {
                EarFate::Applied => ear.applied += 1,
                EarFate::AlreadyThere => ear.already_there += 1,
                EarFate::NoEntry | EarFate::SourceReached => ear.discarded += 1,
                EarFate::LinkDown => ear.link_down += 1,
                EarFate::InFlight => ear.in_flight += 1,
            }
        }

        let shuffle = w.shuffle().map(|job| {
            let host_completion: Vec<Option<f64>> = job
                .completion_times()
                .iter()
                .map(|t| t.map(SimTime::as_secs_f64))
                .collect();
            let done: Vec<f64> = host_completion.iter().flatten().copied().collect();
            let all = done.len() == host_completion.len();
            ShuffleSummary {
                transfers: job.num_transfers(),
                completed_transfers: tcp.completed,
                bytes_per_transfer: job.bytes_per_transfer(),
                total_time: all.then(|| done.iter().copied().fold(0.0, f64::max)),
                mean_host_completion: all.then(|| done.iter().sum::<f64>() / done.len() as f64),
                host_completion,
            }
        });

        let balance = (w.balance.snapshots > 0).then(|| BalanceReport {
            snapshots: w.balance.snapshots,
            violations: w.balance.enforced_violations(),
            scopes: w.balance.summary(),
        });

        let capacity = num_hosts as f64 * cfg.link_capacity_bps as f64;
        MetricsReport {
            num_hosts,
            simulated_secs: w.now().as_secs_f64(),
            window: (from as f64 * dt, to as f64 * dt),
            sample_interval: dt,
            bisection_bps: bisection,
            normalized_bisection: bisection / capacity,
            accounting_error,
            convergence,
            convergence_curve,
            shuffle,
            reorder,
            ear,
            tcp,
            balance,
            unreachable_flows: w.unreachable_flows().len(),
            counters: *w.counters(),
            trace_digest: format!("{:016x}", w.trace_digest()),
            host_series,
            aggregate_series,
        }
    }
}
