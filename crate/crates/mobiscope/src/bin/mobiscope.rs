//! Command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mobiscope::config::{parse_age_range, PctMethodName, PoorStat, RunConfig};
use mobiscope::error::{Error, Result, StageExt};
use mobiscope::io::{self, DidRow, GridHourlyRow, HomeDistanceRow, SpanPolicy};
use mobiscope::pipeline::{self, require};
use mobiscope::report::{self, ReportParams};
use mobiscope::synth::{self, Scenario};

#[derive(Parser)]
#[command(name = "mobiscope", version, about = "Cell-tower mobility analytics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate towers and events and print record counts.
    IngestCheck(Common),
    /// Infer night-rest homes and write homes.csv.
    Homes(Common),
    /// Write grid_hourly.csv and home_distance.csv.
    Aggregate(Common),
    /// Write did_grid.csv from grid_hourly.csv.
    Did(Common),
    /// Write lisa.csv and jobs_distance.csv from did_grid.csv.
    Lisa(Common),
    /// Write demographics.csv for the home cells in home_distance.csv.
    Demographics(Common),
    /// Write summary.csv, histogram.csv and lisa_summary.csv.
    Report(Common),
    /// Generate a synthetic world with ground truth.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage and write a manifest.
    Run(Common),
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Run configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding events.csv, towers.csv, population.csv and jobs.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// LISA neighbour distance threshold in meters.
    #[arg(long)]
    max_dist: Option<f64>,
    #[arg(long)]
    permutations: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    /// LISA permutation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Neighbours per k-NN query.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    poor_stat: Option<PoorStat>,
    /// Inclusive age range of the poverty reference population, as A-B.
    #[arg(long, value_parser = parse_age_range)]
    poor_ref_ages: Option<(u32, u32)>,
    #[arg(long)]
    shards: Option<usize>,
    #[arg(long)]
    analysis_hour: Option<u8>,
    /// Night-rest window as HH:MM-HH:MM.
    #[arg(long)]
    night: Option<String>,
    #[arg(long, value_enum)]
    pct_method: Option<PctMethodName>,
    /// Drop phones spanning more than 24 hours instead of failing.
    #[arg(long)]
    drop_over_span: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.input) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(input)) => RunConfig::for_dirs(input, self.out.as_deref().unwrap_or(Path::new("."))),
            (None, None) if self.out.is_some() => RunConfig::for_dirs(Path::new("."), self.out.as_deref().unwrap()),
            (None, None) => return Err(Error::Config("pass --config, --input or --out".into())),
        };
        if let (Some(_), Some(input)) = (&self.config, &self.input) {
            cfg.inputs = mobiscope::config::Inputs::in_dir(input);
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        let l = &mut cfg.lisa;
        l.max_dist_m = self.max_dist.unwrap_or(l.max_dist_m);
        l.permutations = self.permutations.unwrap_or(l.permutations);
        l.alpha = self.alpha.unwrap_or(l.alpha);
        l.seed = self.seed.unwrap_or(l.seed);
        let d = &mut cfg.demographics;
        d.k = self.k.unwrap_or(d.k);
        d.poor_stat = self.poor_stat.unwrap_or(d.poor_stat);
        d.poor_ref_ages = self.poor_ref_ages.unwrap_or(d.poor_ref_ages);
        cfg.shards = self.shards.unwrap_or(cfg.shards);
        cfg.windows.analysis_hour = self.analysis_hour.unwrap_or(cfg.windows.analysis_hour);
        if let Some(n) = &self.night {
            cfg.windows.night = n.clone();
        }
        cfg.pct_method = self.pct_method.unwrap_or(cfg.pct_method);
        if self.drop_over_span {
            cfg.span_policy = SpanPolicy::Drop;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(cfg.output_dir.join(name))
}

fn mobility(cfg: &RunConfig) -> Result<pipeline::Mobility> {
    let towers = io::read_towers(&cfg.inputs.towers).stage("ingest")?;
    let ingest = io::ingest_events(&cfg.inputs.events, &towers, cfg.span_policy).stage("ingest")?;
    let pool = pipeline::thread_pool()?;
    pipeline::process_phones(&ingest.days, towers.table(), cfg.windows.night_window()?, cfg.shards, &pool)
        .stage("aggregate")
}

fn wrote(name: &str, rows: u64) {
    eprintln!("wrote {name} ({rows} rows)");
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::IngestCheck(c) => {
            let cfg = c.config()?;
            let towers = io::read_towers(&cfg.inputs.towers).stage("ingest")?;
            let ingest = io::ingest_events(&cfg.inputs.events, &towers, cfg.span_policy).stage("ingest")?;
            println!("towers,{}", towers.len());
            println!("events,{}", ingest.events);
            println!("phones,{}", ingest.days.len());
            println!("dropped_unknown_tower,{}", ingest.dropped_unknown_tower);
            println!("dropped_over_span,{}", ingest.dropped_over_span);
        }
        Cmd::Homes(c) => {
            let cfg = c.config()?;
            let m = mobility(&cfg)?;
            wrote("homes.csv", io::write_table(&out_file(&cfg, "homes.csv")?, &m.homes).stage("homes")?);
        }
        Cmd::Aggregate(c) => {
            let cfg = c.config()?;
            let m = mobility(&cfg)?;
            let grid = pipeline::grid_rows(&m);
            let hd = pipeline::home_distance_rows(&m);
            wrote("grid_hourly.csv", io::write_table(&out_file(&cfg, "grid_hourly.csv")?, &grid).stage("aggregate")?);
            wrote("home_distance.csv", io::write_table(&out_file(&cfg, "home_distance.csv")?, &hd).stage("aggregate")?);
        }
        Cmd::Did(c) => {
            let cfg = c.config()?;
            let grid: Vec<GridHourlyRow> = require(&cfg.output_dir, "grid_hourly.csv").stage("did")?;
            let did = pipeline::did_stage(&grid, cfg.dates.quad(), cfg.windows.analysis_hour).stage("did")?;
            wrote("did_grid.csv", io::write_table(&out_file(&cfg, "did_grid.csv")?, &did).stage("did")?);
        }
        Cmd::Lisa(c) => {
            let cfg = c.config()?;
            let did: Vec<DidRow> = require(&cfg.output_dir, "did_grid.csv").stage("lisa")?;
            let jobs = io::read_jobs(&cfg.inputs.jobs).stage("lisa")?;
            let pool = pipeline::thread_pool()?;
            let lisa = pipeline::lisa_stage(&did, &cfg.lisa.core(), &pool).stage("lisa")?;
            let jd = pipeline::jobs_distance_stage(&lisa, &jobs, cfg.lisa.jobs_k).stage("lisa")?;
            wrote("lisa.csv", io::write_table(&out_file(&cfg, "lisa.csv")?, &lisa).stage("lisa")?);
            wrote("jobs_distance.csv", io::write_table(&out_file(&cfg, "jobs_distance.csv")?, &jd).stage("lisa")?);
        }
        Cmd::Demographics(c) => {
            let cfg = c.config()?;
            let hd: Vec<HomeDistanceRow> = require(&cfg.output_dir, "home_distance.csv").stage("demographics")?;
            let pop = io::read_population(&cfg.inputs.population).stage("demographics")?;
            let demo = pipeline::demographics_stage(&hd, &pop, &cfg.demographics).stage("demographics")?;
            wrote(
                "demographics.csv",
                io::write_table(&out_file(&cfg, "demographics.csv")?, &demo).stage("demographics")?,
            );
        }
        Cmd::Report(c) => {
            let cfg = c.config()?;
            for (name, n) in report::report(&cfg.output_dir, &ReportParams::from_config(&cfg)).stage("report")? {
                wrote(&name, n);
            }
        }
        Cmd::Synth { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let truth = synth::write_world(&s, &out)?;
            eprintln!(
                "generated {} agents, {} agent-days, {} events into {}",
                truth.n_agents,
                truth.agent_days.len(),
                truth.events,
                out.display()
            );
        }
        Cmd::Run(c) => {
            let cfg = c.config()?;
            let t = Instant::now();
            let stats = pipeline::run_pipeline(&cfg)?;
            eprintln!(
                "events {} (dropped {} unknown tower, {} over 24h), phones {}, homes {}",
                stats.events, stats.dropped_unknown_tower, stats.dropped_over_span, stats.phones, stats.homes
            );
            for (stage, d) in &stats.timings {
                eprintln!("  {stage:<13} {:>9.3} s", d.as_secs_f64());
            }
            for (name, n) in &stats.rows {
                wrote(name, *n);
            }
            eprintln!("done in {:.3} s, config {}", t.elapsed().as_secs_f64(), cfg.hash());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
