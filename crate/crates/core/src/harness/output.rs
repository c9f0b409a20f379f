//! Result files. Every file is written to a temporary name in the target
//! directory and renamed into place, so a reader never sees a partial file.
//!
//! Column orders:
//!
//! - `throughput.csv`: `time,host,rx_bps` (time is the interval start)
//! - `ears.csv`: `time,origin,src_host,dst_host,flow_serial,recommendation,fate,resolved_at,hops`
//! - `margins.csv`: `time,scope,pod,max,min,spread,bound,enforced,violated`
//! - `summary.json`: `{ "config": ..., "report": ... }`

use std::io::Write;
use std::path::Path;

use serde_json::json;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::metrics::MetricsReport;
use super::world::World;

fn atomic_write(
    dir: &Path,
    name: &str,
    fill: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(dir.join(name))
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// All flow tables, keyed by switch name.
pub fn switch_dump(w: &World) -> serde_json::Value {
    let topo = w.topo();
    let switches: Vec<serde_json::Value> = w
        .switches()
        .iter()
        .map(|sw| {
            let entries: Vec<serde_json::Value> = sw
                .entries()
                .iter()
                .map(|e| {
                    json!({
                        "src": topo.node(e.key.src_host).to_string(),
                        "dst": topo.node(e.key.dst_host).to_string(),
                        "serial": e.key.flow_serial,
                        "in_port": e.in_port,
                        "out_port": e.out_port,
                        "last_seen_ns": e.t.as_nanos(),
                    })
                })
                .collect();
            json!({
                "switch": topo.node(sw.node()).to_string(),
                "v_in": sw.v_in(),
                "v_out": sw.v_out(),
                "entries": entries,
            })
        })
        .collect();
    json!({ "time_ns": w.now().as_nanos(), "switches": switches })
}

pub fn write_throughput(dir: &Path, report: &MetricsReport) -> Result<()> {
    atomic_write(dir, "throughput.csv", |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["time", "host", "rx_bps"])
            .map_err(csv_err)?;
        for (i, row) in report.host_series.iter().enumerate() {
            let t = format!("{:.6}", i as f64 * report.sample_interval);
            for (h, bps) in row.iter().enumerate() {
                wr.write_record([t.as_str(), &h.to_string(), &format!("{bps:.1}")])
                    .map_err(csv_err)?;
            }
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn write_ears(dir: &Path, w: &World) -> Result<()> {
    let topo = w.topo();
    atomic_write(dir, "ears.csv", |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record([
            "time",
            "origin",
            "src_host",
            "dst_host",
            "flow_serial",
            "recommendation",
            "fate",
            "resolved_at",
            "hops",
        ])
        .map_err(csv_err)?;
        for r in w.ears() {
            let fate = serde_json::to_value(&r.fate)?;
            let hops: Vec<String> = r.hops.iter().map(|&n| topo.node(n).to_string()).collect();
            wr.write_record([
                format!("{:.9}", r.time.as_secs_f64()),
                topo.node(r.origin).to_string(),
                r.flow.src_host.0.to_string(),
                r.flow.dst_host.0.to_string(),
                r.flow.flow_serial.to_string(),
                topo.node(r.recommendation).to_string(),
                fate.as_str().unwrap_or_default().to_string(),
                r.resolved_at
                    .map(|t| format!("{:.9}", t.as_secs_f64()))
                    .unwrap_or_default(),
                hops.join(">"),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn write_margins(dir: &Path, w: &World) -> Result<()> {
    atomic_write(dir, "margins.csv", |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record([
            "time", "scope", "pod", "max", "min", "spread", "bound", "enforced", "violated",
        ])
        .map_err(csv_err)?;
        for r in &w.balance.rows {
            let m = &r.margin;
            let scope = serde_json::to_value(m.scope)?;
            wr.write_record([
                format!("{:.6}", r.time.as_secs_f64()),
                scope.as_str().unwrap_or_default().to_string(),
                m.pod.map(|p| p.to_string()).unwrap_or_default(),
                m.max.to_string(),
                m.min.to_string(),
                m.spread().to_string(),
                m.bound.to_string(),
                m.enforced.to_string(),
                m.violated().to_string(),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn write_summary(dir: &Path, cfg: &ExperimentConfig, report: &MetricsReport) -> Result<()> {
    // the output location is not part of what makes a run reproducible
    let cfg = ExperimentConfig {
        out_dir: None,
        ..cfg.clone()
    };
    atomic_write(dir, "summary.json", |out| {
        serde_json::to_writer_pretty(&mut *out, &json!({ "config": cfg, "report": report }))?;
        writeln!(out)?;
        Ok(())
    })
}

/// Write every result file for a finished run into `dir`.
pub fn write_all(dir: &Path, w: &World, report: &MetricsReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_summary(dir, &w.cfg, report)?;
    write_throughput(dir, report)?;
    write_ears(dir, w)?;
    write_margins(dir, w)?;
    if let Some(dump) = &w.balance.first_violation_dump {
        atomic_write(dir, "violation_tables.json", |out| {
            serde_json::to_writer_pretty(&mut *out, dump)?;
            Ok(())
        })?;
    }
    Ok(())
}
