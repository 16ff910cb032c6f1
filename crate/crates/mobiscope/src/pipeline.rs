//! Stage functions and the full run.
//!
//! Every stage consumes and produces the same rows that are written to disk,
//! so running the stages one by one from files and running them in one
//! process give identical outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use mobiscope_core::demographics::{attribute_predicates, context_for_cells, Attribute, PersonRecord};
use mobiscope_core::did::{did_grid, Quad};
use mobiscope_core::gridagg::{GridFrame, ShardAggregate};
use mobiscope_core::knn::PointIndex;
use mobiscope_core::lisa::{
    assemble, build_weights, dist_to_k_jobs, local_morans_i, pseudo_p_for_cell, LisaCell, LisaConfig, LisaError,
};
use mobiscope_core::mobility::{summarize_phone, PhoneDay, TowerTable};
use mobiscope_core::{ClockWindow, HourBucket, KmCell, PlanarPoint};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{DemographicParams, RunConfig};
use crate::error::{Error, Result, StageExt};
use crate::io::{
    self, DemographicsRow, DidRow, GridHourlyRow, HomeDistanceRow, HomeRow, JobsDistanceRow, LisaRow, Table,
};
use crate::report;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MOBISCOPE_THREADS";

/// Worker pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Internal(e.to_string()))
}

fn shard_of(phone: &str, shards: usize) -> usize {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    phone.hash(&mut h);
    (h.finish() % shards as u64) as usize
}

/// Homes, max distances and grid aggregates of all phones.
#[derive(Debug, Clone, Default)]
pub struct Mobility {
    pub aggregate: ShardAggregate,
    /// Phones with a night-rest origin, ordered by date then phone.
    pub homes: Vec<HomeRow>,
}

/// Runs mobility and aggregation over `shards` disjoint phone partitions and
/// merges them in shard order.
pub fn process_phones(
    days: &[PhoneDay],
    towers: &TowerTable,
    window: ClockWindow,
    shards: usize,
    pool: &rayon::ThreadPool,
) -> Result<Mobility> {
    let shards = shards.max(1);
    let mut parts: Vec<Vec<&PhoneDay>> = vec![Vec::new(); shards];
    for d in days {
        parts[shard_of(&d.phone().0, shards)].push(d);
    }
    let done: Vec<Result<(ShardAggregate, Vec<HomeRow>)>> = pool.install(|| {
        parts
            .par_iter()
            .map(|part| {
                let mut agg = ShardAggregate::new();
                let mut homes = Vec::new();
                for day in part {
                    match summarize_phone(day, towers, window)? {
                        Some((home, rec)) => {
                            agg.add_phone(day, towers, Some(&rec))?;
                            homes.push(HomeRow {
                                phone_id: rec.phone.0,
                                date: rec.date,
                                origin: home.origin,
                                cell: rec.origin_cell,
                                max_dist_m: rec.max_dist,
                            });
                        }
                        None => agg.add_phone(day, towers, None)?,
                    }
                }
                Ok((agg, homes))
            })
            .collect()
    });
    let mut out = Mobility::default();
    for part in done {
        let (agg, homes) = part?;
        out.aggregate = std::mem::take(&mut out.aggregate).merge(agg)?;
        out.homes.extend(homes);
    }
    out.homes.sort_by(|a, b| (a.date, &a.phone_id).cmp(&(b.date, &b.phone_id)));
    Ok(out)
}

pub fn grid_rows(m: &Mobility) -> Vec<GridHourlyRow> {
    m.aggregate
        .presence
        .frames()
        .into_iter()
        .flat_map(|f| {
            let b = f.bucket;
            f.cells.into_iter().map(move |(cell, n)| GridHourlyRow { date: b.date, hour: b.hour, cell, n_phones: n })
        })
        .collect()
}

pub fn home_distance_rows(m: &Mobility) -> Vec<HomeDistanceRow> {
    m.aggregate
        .home_distance
        .values()
        .flat_map(|f| {
            f.cells.iter().filter_map(move |(cell, s)| {
                s.mean().map(|mean| HomeDistanceRow { date: f.date, origin: *cell, mean_max_dist_m: mean, n_phones: s.n() })
            })
        })
        .collect()
}

fn frame_at(rows: &[GridHourlyRow], date: NaiveDate, hour: u8) -> GridFrame {
    let mut f = GridFrame::empty(HourBucket { date, hour });
    for r in rows.iter().filter(|r| r.date == date && r.hour == hour) {
        f.cells.insert(r.cell, r.n_phones);
    }
    f
}

/// Cell-wise DiD of presence at the analysis hour.
pub fn did_stage(grid: &[GridHourlyRow], dates: Quad<NaiveDate>, hour: u8) -> Result<Vec<DidRow>> {
    let frames = dates.map(|d| frame_at(grid, *d, hour));
    let cells = did_grid(Quad {
        treated_pre: &frames.treated_pre,
        treated_post: &frames.treated_post,
        control_pre: &frames.control_pre,
        control_post: &frames.control_post,
    })?;
    Ok(cells
        .into_values()
        .map(|c| DidRow { cell: c.cell, did: c.did, baseline: c.baseline, pct: c.pct })
        .collect())
}

/// Local Moran's I over the DiD grid with per-cell permutation tests run on
/// the pool.
pub fn lisa_cells(values: &BTreeMap<KmCell, f64>, cfg: &LisaConfig, pool: &rayon::ThreadPool) -> Result<Vec<LisaCell>> {
    if cfg.permutations < 1 {
        return Err(LisaError::NoPermutations.into());
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(LisaError::BadAlpha(cfg.alpha).into());
    }
    let cells: Vec<KmCell> = values.keys().copied().collect();
    let vals: Vec<f64> = values.values().copied().collect();
    let weights = build_weights(&cells, cfg.max_dist, cfg.row_standardize)?;
    let lm = local_morans_i(&vals, &weights)?;
    let pvals: Vec<Option<f64>> = if lm.degenerate {
        vec![None; vals.len()]
    } else {
        pool.install(|| {
            (0..vals.len())
                .into_par_iter()
                .map(|i| {
                    (!weights.is_isolated(i)).then(|| pseudo_p_for_cell(i, &lm.z, &weights, cfg.permutations, cfg.seed))
                })
                .collect()
        })
    };
    Ok(assemble(&weights, &vals, &lm, &pvals, cfg.alpha))
}

pub fn lisa_stage(did: &[DidRow], cfg: &LisaConfig, pool: &rayon::ThreadPool) -> Result<Vec<LisaRow>> {
    let values: BTreeMap<KmCell, f64> = did.iter().map(|r| (r.cell, r.did)).collect();
    Ok(lisa_cells(&values, cfg, pool)?
        .into_iter()
        .map(|c| LisaRow { cell: c.cell, local_i: c.local_i, pseudo_p: c.pseudo_p, class: c.class })
        .collect())
}

/// Radius around each LISA cell midpoint that reaches `k` jobs.
pub fn jobs_distance_stage(lisa: &[LisaRow], jobs: &[PlanarPoint], k: usize) -> Result<Vec<JobsDistanceRow>> {
    let cells: Vec<KmCell> = lisa.iter().map(|r| r.cell).collect();
    let index = PointIndex::new(jobs.to_vec());
    Ok(dist_to_k_jobs(&cells, &index, k)?
        .into_iter()
        .map(|(cell, dist_m)| JobsDistanceRow { cell, dist_m })
        .collect())
}

/// Demographic shares for every origin cell in `home_distance`.
pub fn demographics_stage(
    home_distance: &[HomeDistanceRow],
    population: &[PersonRecord],
    params: &DemographicParams,
) -> Result<Vec<DemographicsRow>> {
    let cells: Vec<KmCell> = home_distance.iter().map(|r| r.origin).collect::<BTreeSet<_>>().into_iter().collect();
    if cells.is_empty() {
        return Ok(Vec::new());
    }
    let specs = attribute_predicates(population, params.k, &params.poverty())?;
    let ctx = context_for_cells(&cells, population, &specs, params.coverage_radius_m)?;
    Ok(ctx
        .into_iter()
        .map(|c| DemographicsRow {
            cell: c.cell,
            shares: c.covered.then(|| Attribute::ALL.map(|a| c.shares[&a])),
        })
        .collect())
}

/// Counts and timings of one run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub events: u64,
    pub dropped_unknown_tower: u64,
    pub dropped_over_span: u64,
    pub phones: u64,
    pub homes: u64,
    pub timings: Vec<(&'static str, Duration)>,
    /// Output file name and row count.
    pub rows: Vec<(String, u64)>,
}

impl RunStats {
    pub fn timing(&self, stage: &str) -> Option<Duration> {
        self.timings.iter().find(|(s, _)| *s == stage).map(|(_, d)| *d)
    }
}

/// Output files of a run, in manifest order.
pub const OUTPUT_FILES: [&str; 11] = [
    "homes.csv",
    "grid_hourly.csv",
    "home_distance.csv",
    "did_grid.csv",
    "lisa.csv",
    "jobs_distance.csv",
    "demographics.csv",
    "summary.csv",
    "histogram.csv",
    "lisa_summary.csv",
    "manifest.csv",
];

struct Staging {
    dir: PathBuf,
    armed: bool,
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.armed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Runs ingest through report, writing every table into the output
/// directory. On error no output file of this run is left behind.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunStats> {
    cfg.validate()?;
    let pool = thread_pool()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let staging = Staging { dir: out.join(".mobiscope-partial"), armed: true };
    if staging.dir.exists() {
        fs::remove_dir_all(&staging.dir).map_err(|e| Error::io(&staging.dir, e))?;
    }
    fs::create_dir_all(&staging.dir).map_err(|e| Error::io(&staging.dir, e))?;
    let stage_dir = staging.dir.clone();
    let mut stats = RunStats::default();
    let mut written: Vec<(String, u64)> = Vec::new();
    let mut write = |name: &str, n: u64| written.push((name.to_string(), n));

    let t = Instant::now();
    let towers = io::read_towers(&cfg.inputs.towers).stage("ingest")?;
    let ingest = io::ingest_events(&cfg.inputs.events, &towers, cfg.span_policy).stage("ingest")?;
    let population = io::read_population(&cfg.inputs.population).stage("ingest")?;
    let jobs = io::read_jobs(&cfg.inputs.jobs).stage("ingest")?;
    stats.events = ingest.events;
    stats.dropped_unknown_tower = ingest.dropped_unknown_tower;
    stats.dropped_over_span = ingest.dropped_over_span;
    stats.phones = ingest.days.len() as u64;
    stats.timings.push(("ingest", t.elapsed()));

    let t = Instant::now();
    let window = cfg.windows.night_window()?;
    let mobility = process_phones(&ingest.days, towers.table(), window, cfg.shards, &pool).stage("aggregate")?;
    drop(ingest);
    stats.homes = mobility.homes.len() as u64;
    let grid = grid_rows(&mobility);
    let home_distance = home_distance_rows(&mobility);
    stats.timings.push(("aggregate", t.elapsed()));
    write("homes.csv", io::write_table(&stage_dir.join("homes.csv"), &mobility.homes).stage("homes")?);
    write("grid_hourly.csv", io::write_table(&stage_dir.join("grid_hourly.csv"), &grid).stage("aggregate")?);
    write(
        "home_distance.csv",
        io::write_table(&stage_dir.join("home_distance.csv"), &home_distance).stage("aggregate")?,
    );
    drop(mobility);

    let t = Instant::now();
    let did = did_stage(&grid, cfg.dates.quad(), cfg.windows.analysis_hour).stage("did")?;
    write("did_grid.csv", io::write_table(&stage_dir.join("did_grid.csv"), &did).stage("did")?);
    stats.timings.push(("did", t.elapsed()));

    let t = Instant::now();
    let lisa = lisa_stage(&did, &cfg.lisa.core(), &pool).stage("lisa")?;
    write("lisa.csv", io::write_table(&stage_dir.join("lisa.csv"), &lisa).stage("lisa")?);
    let jobs_dist = jobs_distance_stage(&lisa, &jobs, cfg.lisa.jobs_k).stage("lisa")?;
    write("jobs_distance.csv", io::write_table(&stage_dir.join("jobs_distance.csv"), &jobs_dist).stage("lisa")?);
    stats.timings.push(("lisa", t.elapsed()));

    let t = Instant::now();
    let demo = demographics_stage(&home_distance, &population, &cfg.demographics).stage("demographics")?;
    write("demographics.csv", io::write_table(&stage_dir.join("demographics.csv"), &demo).stage("demographics")?);
    stats.timings.push(("demographics", t.elapsed()));

    let t = Instant::now();
    for (name, n) in report::report(&stage_dir, &report::ReportParams::from_config(cfg)).stage("report")? {
        write(&name, n);
    }
    stats.timings.push(("report", t.elapsed()));

    let mut manifest = io::LabeledTable {
        header: vec!["file".into(), "rows".into(), "sha256".into()],
        rows: vec![vec!["config".into(), String::new(), cfg.hash()]],
    };
    for (name, n) in &written {
        manifest.rows.push(vec![name.clone(), n.to_string(), sha256_file(&stage_dir.join(name))?]);
    }
    manifest.write(&stage_dir.join("manifest.csv")).stage("report")?;
    written.push(("manifest.csv".into(), manifest.rows.len() as u64));

    for (name, _) in &written {
        let dst = out.join(name);
        fs::rename(stage_dir.join(name), &dst).map_err(|e| Error::io(&dst, e))?;
    }
    let mut staging = staging;
    staging.armed = false;
    fs::remove_dir_all(&staging.dir).map_err(|e| Error::io(&staging.dir, e))?;
    stats.rows = written;
    Ok(stats)
}

/// Hashes the listed files of an output directory, for comparing runs.
pub fn tree_digest(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for name in OUTPUT_FILES {
        let p = dir.join(name);
        if p.exists() {
            out.insert(name.to_string(), sha256_file(&p)?);
        }
    }
    Ok(out)
}

/// Reads a whole table or names the missing file.
pub fn require<T: Table>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let p = dir.join(name);
    if !p.exists() {
        return Err(Error::Data(format!("missing upstream file {}", p.display())));
    }
    io::read_table(&p)
}

