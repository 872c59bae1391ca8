//! CSV and JSON artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::association::BeamPlan;
use crate::codebook::Codebook;
use crate::config::Config;
use crate::evaluation::{SweepResult, UeRecord};
use crate::pipeline::{PlanOutcome, PLAN_NAMES};
use crate::{Error, Result};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes per-receiver snapshot records.
pub fn write_records_csv<W: Write>(records: &[UeRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "snapshot",
        "ue_id",
        "kind",
        "serving_sector",
        "serving_slot",
        "rsrp_dbm",
        "coverage_sinr_db",
        "dl_codeword",
        "n_w",
        "sinr_db",
        "rate_bps",
    ])?;
    for r in records {
        w.write_record([
            r.snapshot.to_string(),
            r.ue_id.to_string(),
            r.kind.as_str().to_string(),
            r.serving_sector.to_string(),
            r.serving_slot.to_string(),
            format!("{:.6}", r.rsrp_dbm),
            format!("{:.6}", r.coverage_sinr_db),
            r.dl_codeword.to_string(),
            r.n_w.to_string(),
            format!("{:.6}", r.sinr_db),
            format!("{:.3}", r.rate_bps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One modified or baseline SSB beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub sector: usize,
    pub slot: usize,
    pub sweep_index: usize,
    pub codeword: usize,
    pub active_columns: usize,
    pub beam_index_h: i64,
    pub beam_index_v: i64,
    pub power_dbm: f64,
}

/// Optimized plan as a diff against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub designated_cells: Vec<usize>,
    pub feasible: bool,
    pub min_sinr_db: f64,
    pub modified: Vec<PlanEntry>,
    pub baseline_per_sector: Vec<PlanEntry>,
}

impl PlanExport {
    pub fn new(outcome: &PlanOutcome, ssb: &Codebook) -> Self {
        let entry = |plan: &BeamPlan, b: usize, s: usize| {
            let slot = plan.slot(b, s);
            let c = ssb.get(slot.codeword);
            PlanEntry {
                sector: b,
                slot: s,
                sweep_index: slot.sweep_index,
                codeword: slot.codeword,
                active_columns: c.active_columns,
                beam_index_h: c.beam_index_h,
                beam_index_v: c.beam_index_v,
                power_dbm: slot.power_dbm,
            }
        };
        let modified = outcome
            .optimized
            .diff(&outcome.baseline)
            .into_iter()
            .map(|(b, s)| entry(&outcome.optimized, b, s))
            .collect();
        let baseline_per_sector = (0..outcome.baseline.n_slots)
            .filter(|&s| outcome.baseline.slot(0, s).active)
            .map(|s| entry(&outcome.baseline, 0, s))
            .collect();
        Self {
            designated_cells: outcome.assignment.designated.clone(),
            feasible: outcome.ega.best_fitness.is_feasible(),
            min_sinr_db: outcome.ega.best_fitness.min_sinr_db,
            modified,
            baseline_per_sector,
        }
    }
}

/// Writes `n_uavs, d_iud_m, p5_rate_<plan>_bps...`.
pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n_uavs".to_string(), "d_iud_m".into()];
    for name in PLAN_NAMES {
        header.push(format!("p5_rate_{name}_bps"));
    }
    w.write_record(&header)?;
    for r in &sweep.rows {
        let mut rec = vec![r.n_uavs.to_string(), format!("{:.6}", r.d_iud_m)];
        rec.extend(r.p5_rate_bps.iter().map(|v| format!("{v:.3}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column series `n_uavs p5_rate_mbps` for one plan.
pub fn write_sweep_dat<W: Write>(sweep: &SweepResult, plan: usize, mut out: W) -> Result<()> {
    writeln!(out, "# n_uavs p5_rate_mbps")?;
    for r in &sweep.rows {
        writeln!(out, "{} {:.6}", r.n_uavs, r.p5_rate_bps[plan] / 1e6)?;
    }
    Ok(())
}

/// Reproducibility record of a command invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Config,
    pub ssb_codebook_size: usize,
    pub dl_codebook_size: usize,
    pub ssb_codebook_order: String,
    pub threads: usize,
    pub elapsed_s: f64,
    pub outputs: Vec<String>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Human-readable description of a plan, trace, metric or sweep artifact.
pub fn inspect(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(Error::Format(format!("{} is empty", path.display())));
    }
    if text.trim_start().starts_with('{') {
        let plan: PlanExport = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: not a plan file ({e})", path.display())))?;
        let mut s = format!(
            "plan: designated cells {:?}, feasible {}, min SINR {:.2} dB\n",
            plan.designated_cells, plan.feasible, plan.min_sinr_db
        );
        s.push_str("sector slot sweep codeword cols ih iv power_dbm\n");
        for e in &plan.modified {
            s.push_str(&format!(
                "{:>6} {:>4} {:>5} {:>8} {:>4} {:>3} {:>3} {:>9.2}\n",
                e.sector, e.slot, e.sweep_index, e.codeword, e.active_columns, e.beam_index_h, e.beam_index_v, e.power_dbm
            ));
        }
        return Ok(s);
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let num = |r: &csv::StringRecord, i: usize| -> Result<f64> {
        let v = r.get(i).unwrap_or("");
        if v == "-inf" {
            return Ok(f64::NEG_INFINITY);
        }
        v.parse::<f64>()
            .map_err(|_| Error::Format(format!("non-numeric value {v:?}")))
    };
    if let (Some(it), Some(fit)) = (col("iteration"), col("best_fitness_db")) {
        if rows.is_empty() {
            return Err(Error::Format("trace has no rows".into()));
        }
        let mut best = f64::NEG_INFINITY;
        let mut last = 0.0;
        for r in &rows {
            let f = num(r, fit)?;
            if f > best {
                best = f;
                last = num(r, it)?;
            }
        }
        return Ok(format!(
            "trace: {} iterations, max fitness {} dB, last improvement at iteration {}\n",
            rows.len(),
            crate::ega::format_db(best),
            last
        ));
    }
    if let (Some(seg), Some(sec), Some(chi)) = (col("segment_id"), col("sector_id"), col("chi_bps_per_hz")) {
        let mut best: Vec<(f64, f64, f64)> = Vec::new();
        for r in &rows {
            let (z, b, c) = (num(r, seg)?, num(r, sec)?, num(r, chi)?);
            let z_i = z as usize;
            if best.len() <= z_i {
                best.resize(z_i + 1, (f64::NAN, f64::NAN, f64::NEG_INFINITY));
            }
            if c > best[z_i].2 {
                best[z_i] = (z, b, c);
            }
        }
        let mut s = format!("metrics: {} rows, {} segments\nsegment best_sector chi\n", rows.len(), best.len());
        for (z, b, c) in best {
            s.push_str(&format!("{z:>7} {b:>11} {c:.4}\n"));
        }
        return Ok(s);
    }
    if let Some(n) = col("n_uavs") {
        let mut s = format!("sweep: {} rows\n{}\n", rows.len(), header.join(" "));
        for r in &rows {
            let _ = num(r, n)?;
            s.push_str(&r.iter().collect::<Vec<_>>().join(" "));
            s.push('\n');
        }
        return Ok(s);
    }
    Err(Error::Format(format!(
        "{}: unrecognized artifact (header {:?})",
        path.display(),
        header
    )))
}
