//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, SeedConfig};
use crate::ega::EgaParams;
use crate::evaluation::traffic_sweep;
use crate::pipeline::{self, Codebooks, RunSummary, PLAN_NAMES};
use crate::report::{self, PlanExport, RunManifest};
use crate::scenario::Scenario;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "ssbplan", version, about = "SSB beam planning for aerial highways")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan the SSB configuration and evaluate baseline and optimized plans.
    Run(RunArgs),
    /// UAV 5%-tile rate versus number of UAVs on the highway.
    Sweep(SweepArgs),
    /// Summarize a plan JSON, trace CSV, metric CSV or sweep CSV.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration; defaults apply when omitted.
    #[arg(long, env = "SSBPLAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "SSBPLAN_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Sets every seed (scenario, channel, optimizer).
    #[arg(long, env = "SSBPLAN_SEED")]
    pub seed: Option<u64>,
    /// Number of evaluation snapshots.
    #[arg(long, env = "SSBPLAN_SNAPSHOTS")]
    pub snapshots: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "SSBPLAN_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also dump snapshot-0 channel gains.
    #[arg(long)]
    pub dump_channels: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest number of UAVs.
    #[arg(long, env = "SSBPLAN_N_MAX")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub artifact: PathBuf,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        _ => 2,
    }
}

fn load_config(common: &CommonArgs) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seeds = SeedConfig::all(seed);
    }
    if let Some(s) = common.snapshots {
        cfg.evaluation.snapshots = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(threads: usize) -> usize {
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    rayon::current_num_threads()
}

struct Prepared {
    cfg: Config,
    scenario: Scenario,
    books: Codebooks,
    threads: usize,
}

fn prepare(common: &CommonArgs) -> Result<Prepared> {
    let cfg = load_config(common)?;
    let threads = init_threads(common.threads);
    let scenario = Scenario::build(&cfg)?;
    let books = Codebooks::build(&scenario);
    std::fs::create_dir_all(&common.out)?;
    Ok(Prepared {
        cfg,
        scenario,
        books,
        threads,
    })
}

fn write_plan_artifacts(p: &Prepared, out: &Path, outcome: &pipeline::PlanOutcome, outputs: &mut Vec<String>) -> Result<()> {
    let mut put = |name: &str| -> PathBuf {
        outputs.push(name.to_string());
        out.join(name)
    };
    outcome.assignment.write_csv(report::create(&put("metrics.csv"))?)?;
    outcome.ega.trace.write_csv(report::create(&put("trace.csv"))?)?;
    report::write_json(&PlanExport::new(outcome, &p.books.ssb), &put("plan.json"))?;
    p.books.ssb.write_csv(report::create(&put("ssb_codebook.csv"))?)?;
    Ok(())
}

fn write_manifest(p: &Prepared, out: &Path, command: &str, start: Instant, mut outputs: Vec<String>) -> Result<()> {
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: p.cfg.clone(),
        ssb_codebook_size: p.books.ssb.len(),
        dl_codebook_size: p.books.dl.len(),
        ssb_codebook_order: "active columns descending, then vertical index, then horizontal index".into(),
        threads: p.threads,
        elapsed_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    report::write_json(&manifest, &out.join("manifest.json"))
}

pub fn cmd_run(args: &RunArgs) -> Result<RunSummary> {
    let start = Instant::now();
    let p = prepare(&args.common)?;
    let out = &args.common.out;
    let params = EgaParams::from_config(&p.cfg.ega, p.cfg.seeds.optimizer);
    let outcome = pipeline::plan(&p.scenario, &p.books, &params)?;
    let snapshots = p.cfg.evaluation.snapshots;
    let result = pipeline::evaluate(&p.scenario, &p.books, outcome.plans(), snapshots)?;

    let mut outputs = Vec::new();
    write_plan_artifacts(&p, out, &outcome, &mut outputs)?;
    for (i, name) in PLAN_NAMES.iter().enumerate() {
        let assoc_name = format!("association_{name}.csv");
        result.snapshot0_association[i].write_csv(&result.snapshot0_users, report::create(&out.join(&assoc_name))?)?;
        outputs.push(assoc_name);
        let snap_name = format!("snapshots_{name}.csv");
        report::write_records_csv(&result.records[i], report::create(&out.join(&snap_name))?)?;
        outputs.push(snap_name);
    }
    if args.dump_channels {
        let model = crate::channel::ChannelModel::new(&p.scenario);
        let g = crate::evaluation::ground_snapshot(&model, 0);
        crate::channel::write_channel_dump(&g.users, &g.channels, report::create(&out.join("channels.csv"))?)?;
        outputs.push("channels.csv".into());
    }
    let summary = RunSummary::new(&outcome, &result, snapshots);
    report::write_json(&summary, &out.join("summary.json"))?;
    outputs.push("summary.json".into());
    write_manifest(&p, out, "run", start, outputs)?;

    for (name, stats) in [("baseline", &summary.baseline), ("optimized", &summary.optimized)] {
        for (group, g) in [("UAV", &stats.uav), ("gUE", &stats.gue)] {
            println!(
                "{name:>9} {group:<3}  coverage SINR p5 {:>7.2} dB mean {:>7.2} dB | data SINR p5 {:>7.2} dB mean {:>7.2} dB | rate p5 {:>8.2} Mbps mean {:>8.2} Mbps",
                g.coverage_sinr_db.p5_snapshot_mean,
                g.coverage_sinr_db.mean,
                g.sinr_db.p5_snapshot_mean,
                g.sinr_db.mean,
                g.rate_bps.p5_snapshot_mean / 1e6,
                g.rate_bps.mean / 1e6,
            );
        }
    }
    println!(
        "designated cells {:?}; eGA best {} dB ({} violations) after {} iterations",
        summary.designated_cells,
        crate::ega::format_db(summary.ega_best_fitness_db),
        summary.ega_violations,
        summary.ega_iterations
    );
    Ok(summary)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<crate::evaluation::SweepResult> {
    let start = Instant::now();
    let p = prepare(&args.common)?;
    let out = &args.common.out;
    let n_max = args.n_max.unwrap_or(p.cfg.evaluation.sweep_n_max);
    if n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let params = EgaParams::from_config(&p.cfg.ega, p.cfg.seeds.optimizer);
    let outcome = pipeline::plan(&p.scenario, &p.books, &params)?;
    let sweep = traffic_sweep(
        &p.scenario,
        &outcome.plans(),
        &p.books.ssb,
        &p.books.dl,
        n_max,
        p.cfg.evaluation.snapshots,
    )?;
    let mut outputs = Vec::new();
    write_plan_artifacts(&p, out, &outcome, &mut outputs)?;
    report::write_sweep_csv(&sweep, report::create(&out.join("sweep.csv"))?)?;
    outputs.push("sweep.csv".into());
    for (i, name) in PLAN_NAMES.iter().enumerate() {
        let f = format!("sweep_{name}.dat");
        report::write_sweep_dat(&sweep, i, report::create(&out.join(&f))?)?;
        outputs.push(f);
    }
    write_manifest(&p, out, "sweep", start, outputs)?;
    let threshold = p.cfg.evaluation.rate_threshold_bps;
    for (i, name) in PLAN_NAMES.iter().enumerate() {
        println!(
            "{name:>9}: max UAVs with 5%-tile rate >= {:.1} Mbps: {}",
            threshold / 1e6,
            sweep.max_sustainable(i, threshold)
        );
    }
    Ok(sweep)
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    print!("{}", report::inspect(&args.artifact)?);
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let res = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a).map(|_| ()),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
