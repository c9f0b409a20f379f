use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;

use difsim::fabric::{MetricMode, Scheduler};
use difsim::harness::{self, ExperimentConfig, ScenarioName};
use difsim::traffic::TrafficPattern;

/// Packet-level fat-tree simulator with DiFS and ECMP flow scheduling.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_scheduler)]
    scheduler: Option<Scheduler>,
    /// stride:N, stag:PE:PP, random, randx:N, randbij or shuffle:BYTES
    #[arg(long)]
    pattern: Option<TrafficPattern>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    metric_mode: Option<MetricMode>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Run a scripted collision (local, remote1, remote2) instead.
    #[arg(long)]
    scenario: Option<ScenarioName>,
    /// Fail unless every steady-state balance margin is within bounds.
    #[arg(long)]
    validate_bounds: bool,
}

fn parse_scheduler(s: &str) -> Result<Scheduler, String> {
    match s {
        "difs" => Ok(Scheduler::Difs),
        "ecmp" => Ok(Scheduler::Ecmp),
        _ => Err(format!("expected difs or ecmp, got {s:?}")),
    }
}

fn parse_mode(s: &str) -> Result<MetricMode, String> {
    match s {
        "count" => Ok(MetricMode::Count),
        "measured_rate" | "measured-rate" | "fm" => Ok(MetricMode::MeasuredRate),
        _ => Err(format!("expected count or measured_rate, got {s:?}")),
    }
}

fn build_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.k {
        cfg.k = v;
    }
    if let Some(v) = cli.scheduler {
        cfg.scheduler = v;
    }
    if let Some(v) = cli.pattern {
        cfg.pattern = v;
    }
    if let Some(v) = cli.duration {
        cfg.duration = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.metric_mode {
        cfg.metric_mode = v;
    }
    if cli.delta.is_some() {
        cfg.delta = cli.delta;
    }
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = build_config(&cli)?;
    let started = Instant::now();
    if let Some(name) = cli.scenario {
        let base = ExperimentConfig {
            scheduler: cfg.scheduler,
            seed: cfg.seed,
            ..harness::scenario::scenario_config(cfg.seed)
        };
        let report = harness::scenario_check(name, &base)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        eprintln!("wall time {:.2} s", started.elapsed().as_secs_f64());
        return Ok(report.passed);
    }
    let (world, report) = harness::run_experiment(&cfg)?;
    let wall = started.elapsed().as_secs_f64();
    println!(
        "bisection {:.3} Gbps ({:.1}% of {} hosts at line rate), {} EARs ({} B), {} events",
        report.bisection_bps / 1e9,
        report.normalized_bisection * 100.0,
        report.num_hosts,
        report.ear.count,
        report.ear.bytes,
        report.counters.events,
    );
    if let Some(s) = &report.shuffle {
        match (s.total_time, s.mean_host_completion) {
            (Some(total), Some(mean)) => {
                println!("shuffle total {total:.3} s, mean host {mean:.3} s")
            }
            _ => println!(
                "shuffle incomplete: {}/{} transfers",
                s.completed_transfers, s.transfers
            ),
        }
        println!("avg reorder ratio {:.4}", report.reorder.avg_ratio);
    }
    if report.shuffle.is_none() {
        println!(
            "converged to {:.0}% of steady state at {:.1} s{}",
            report.convergence.fraction * 100.0,
            report.convergence.time,
            if report.convergence.converged {
                ""
            } else {
                " (never)"
            }
        );
    }
    eprintln!("wall time {wall:.2} s");
    if cli.validate_bounds {
        let check = harness::validate_bounds(&world);
        print!("{}", check.render());
        if !check.passed {
            eprintln!("balance bound violated");
            return Ok(false);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
