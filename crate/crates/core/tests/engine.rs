use difsim::fabric::Scheduler;
use difsim::harness::{run_experiment, validate_bounds, ExperimentConfig, MetricsReport, World};
use difsim::sim::SimTime;
use difsim::traffic::TrafficPattern;

mod common;

use common::{bounce_flow, idle_path_goodput, short};

#[test]
fn single_flow_on_an_idle_path_reaches_line_rate() {
    for scheduler in [Scheduler::Ecmp, Scheduler::Difs] {
        let frac = idle_path_goodput(scheduler);
        assert!(frac >= 0.9, "{scheduler:?}: goodput {frac:.3} of line rate");
    }
}

#[test]
fn stream_is_bit_exact_across_forced_path_changes() {
    let r = bounce_flow(40_000_000);
    assert!(r.ok(), "{r:?}");
}

#[test]
fn identical_configs_write_identical_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let cfg = ExperimentConfig {
            out_dir: Some(d.path().to_path_buf()),
            ..short(Scheduler::Difs, "random", 0.6)
        };
        run_experiment(&cfg).unwrap();
    }
    for name in ["summary.json", "throughput.csv", "ears.csv", "margins.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty(), "{name} empty");
        assert!(a == b, "{name} differs between identical runs");
    }
}

#[test]
fn different_seeds_differ() {
    let a = run_experiment(&short(Scheduler::Difs, "random", 0.6))
        .unwrap()
        .1;
    let b = run_experiment(&ExperimentConfig {
        seed: 2,
        ..short(Scheduler::Difs, "random", 0.6)
    })
    .unwrap()
    .1;
    assert_ne!(a.trace_digest, b.trace_digest);
}

fn accounting(r: &MetricsReport, cap_bps: f64) {
    assert!(r.bisection_bps <= r.num_hosts as f64 * cap_bps);
    assert!(
        r.accounting_error < 1e-3,
        "accounting error {}",
        r.accounting_error
    );
    assert_eq!(r.ear.bytes, 26 * r.ear.count);
}

#[test]
fn report_accounting_holds_for_both_schedulers() {
    for s in [Scheduler::Difs, Scheduler::Ecmp] {
        let cfg = short(s, "stride:4", 1.2);
        let (_, r) = run_experiment(&cfg).unwrap();
        accounting(&r, cfg.link_capacity_bps as f64);
        assert!(r.bisection_bps > 0.0);
        assert_eq!(r.tcp.corrupt_segments, 0);
    }
}

#[test]
fn idle_network_has_zero_margins() {
    let cfg = short(Scheduler::Difs, "random", 1.0);
    let mut w = World::new(&cfg).unwrap();
    w.run();
    let check = validate_bounds(&w);
    assert!(check.passed);
    assert!(check.snapshots > 0);
    assert!(check.table.iter().all(|s| s.worst_spread == 0));
}

#[test]
fn flows_survive_a_core_link_failure() {
    for scheduler in [Scheduler::Difs, Scheduler::Ecmp] {
        let cfg = short(scheduler, "stride:8", 2.0);
        let mut w = World::new(&cfg).unwrap();
        w.install_pattern().unwrap();
        let (a, c) = (w.topo().aggregate_switch(0, 0), w.topo().core_switch(0, 0));
        w.schedule_link_failure(SimTime::from_millis(500), a, c)
            .unwrap();
        w.run_until(SimTime::from_secs(1));
        let before: Vec<u64> = w.conns().iter().map(|e| e.receiver.delivered()).collect();
        w.run();
        assert!(w.unreachable_flows().is_empty());
        for (e, b) in w.conns().iter().zip(before) {
            assert!(
                e.receiver.delivered() > b + 10_000_000,
                "{scheduler:?}: flow {:?} stalled after the failure",
                e.key
            );
        }
        let report = MetricsReport::from_world(&w);
        assert_eq!(report.tcp.corrupt_segments, 0);
    }
}

#[test]
fn shuffle_completes_and_stops_early() {
    let cfg = ExperimentConfig {
        pattern: TrafficPattern::Shuffle { bytes: 200_000 },
        duration: 10.0,
        ..Default::default()
    };
    let (w, r) = run_experiment(&cfg).unwrap();
    let s = r.shuffle.unwrap();
    assert_eq!(s.transfers, 240);
    assert_eq!(s.completed_transfers, 240);
    let total = s.total_time.unwrap();
    assert!(total < 10.0);
    assert_eq!(w.stopped_at().map(SimTime::as_secs_f64), Some(total));
    assert!(s.mean_host_completion.unwrap() <= total);
}

#[test]
fn cli_reports_bad_config_fields() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_difs-sim"))
        .args(["--k", "5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k:"), "{err}");
}

#[test]
fn cli_runs_a_scenario() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_difs-sim"))
        .args(["--scenario", "remote2"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
}
