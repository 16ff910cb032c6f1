//! Declarative run configuration.
//!
//! A TOML file supplies every setting; relative input paths resolve against
//! the file's directory. Execution settings (shards, threads) are excluded
//! from the config hash because they never change the outputs.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mobiscope_core::demographics::{IncomeStat, PovertyRule};
use mobiscope_core::did::{PctMethod, Quad};
use mobiscope_core::lisa::LisaConfig;
use mobiscope_core::ClockWindow;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::SpanPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub events: PathBuf,
    pub towers: PathBuf,
    pub population: PathBuf,
    pub jobs: PathBuf,
}

impl Inputs {
    pub fn in_dir(dir: &Path) -> Self {
        Inputs {
            events: dir.join("events.csv"),
            towers: dir.join("towers.csv"),
            population: dir.join("population.csv"),
            jobs: dir.join("jobs.csv"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dates {
    pub treated_pre: NaiveDate,
    pub treated_post: NaiveDate,
    pub control_pre: NaiveDate,
    pub control_post: NaiveDate,
}

impl Default for Dates {
    fn default() -> Self {
        let d = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).expect("valid date");
        Dates {
            treated_pre: d(2020, 1, 16),
            treated_post: d(2020, 3, 26),
            control_pre: d(2019, 1, 17),
            control_post: d(2019, 3, 28),
        }
    }
}

impl Dates {
    pub fn quad(&self) -> Quad<NaiveDate> {
        Quad {
            treated_pre: self.treated_pre,
            treated_post: self.treated_post,
            control_pre: self.control_pre,
            control_post: self.control_post,
        }
    }

    pub fn as_array(&self) -> [NaiveDate; 4] {
        [self.treated_pre, self.treated_post, self.control_pre, self.control_post]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Windows {
    /// Start hour of the one-hour analysis window.
    pub analysis_hour: u8,
    /// Night-rest window as `HH:MM-HH:MM`, both ends slot starts.
    pub night: String,
}

impl Default for Windows {
    fn default() -> Self {
        Windows { analysis_hour: 10, night: "03:00-06:55".into() }
    }
}

impl Windows {
    pub fn night_window(&self) -> Result<ClockWindow> {
        parse_window(&self.night)
    }
}

pub fn parse_window(s: &str) -> Result<ClockWindow> {
    let bad = || Error::Config(format!("bad window {s:?}, expected HH:MM-HH:MM"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let hm = |t: &str| -> Result<(u16, u16)> {
        let (h, m) = t.trim().split_once(':').ok_or_else(bad)?;
        Ok((h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?))
    };
    let ((h0, m0), (h1, m1)) = (hm(a)?, hm(b)?);
    ClockWindow::new(h0, m0, h1, m1).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LisaParams {
    pub max_dist_m: f64,
    pub row_standardize: bool,
    pub permutations: u32,
    pub alpha: f64,
    pub seed: u64,
    /// Number of nearest jobs for the job-distance radius.
    pub jobs_k: usize,
}

impl Default for LisaParams {
    fn default() -> Self {
        let c = LisaConfig::default();
        LisaParams {
            max_dist_m: c.max_dist,
            row_standardize: c.row_standardize,
            permutations: c.permutations,
            alpha: c.alpha,
            seed: c.seed,
            jobs_k: 100,
        }
    }
}

impl LisaParams {
    pub fn core(&self) -> LisaConfig {
        LisaConfig {
            max_dist: self.max_dist_m,
            row_standardize: self.row_standardize,
            permutations: self.permutations,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PoorStat {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemographicParams {
    pub k: usize,
    pub poor_stat: PoorStat,
    /// Inclusive age range of the poverty reference population.
    pub poor_ref_ages: (u32, u32),
    pub poor_fraction: f64,
    /// Cells farther than this from any populated point are uncovered.
    pub coverage_radius_m: f64,
    /// Subgroup masks keep cells at or above this percentile.
    pub percentile: f64,
}

impl Default for DemographicParams {
    fn default() -> Self {
        let p = PovertyRule::default();
        DemographicParams {
            k: 100,
            poor_stat: PoorStat::Mean,
            poor_ref_ages: p.ref_ages,
            poor_fraction: p.fraction,
            coverage_radius_m: 1500.0,
            percentile: 90.0,
        }
    }
}

impl DemographicParams {
    pub fn poverty(&self) -> PovertyRule {
        PovertyRule {
            stat: match self.poor_stat {
                PoorStat::Mean => IncomeStat::Mean,
                PoorStat::Median => IncomeStat::Median,
            },
            ref_ages: self.poor_ref_ages,
            fraction: self.poor_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PctMethodName {
    #[default]
    RatioOfSums,
    MeanOfCellRatios,
}

impl From<PctMethodName> for PctMethod {
    fn from(m: PctMethodName) -> Self {
        match m {
            PctMethodName::RatioOfSums => PctMethod::RatioOfSums,
            PctMethodName::MeanOfCellRatios => PctMethod::MeanOfCellRatios,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dates: Dates,
    #[serde(default)]
    pub windows: Windows,
    #[serde(default)]
    pub lisa: LisaParams,
    #[serde(default)]
    pub demographics: DemographicParams,
    #[serde(default)]
    pub span_policy: SpanPolicy,
    #[serde(default)]
    pub pct_method: PctMethodName,
    /// Phone partitions processed in parallel; does not affect outputs.
    #[serde(default = "default_shards", skip_serializing)]
    pub shards: usize,
}

fn default_shards() -> usize {
    4
}

impl RunConfig {
    /// Defaults with inputs taken from `input_dir`.
    pub fn for_dirs(input_dir: &Path, output_dir: &Path) -> Self {
        RunConfig {
            inputs: Inputs::in_dir(input_dir),
            output_dir: output_dir.to_path_buf(),
            dates: Dates::default(),
            windows: Windows::default(),
            lisa: LisaParams::default(),
            demographics: DemographicParams::default(),
            span_policy: SpanPolicy::default(),
            pct_method: PctMethodName::default(),
            shards: default_shards(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.inputs.events,
            &mut cfg.inputs.towers,
            &mut cfg.inputs.population,
            &mut cfg.inputs.jobs,
            &mut cfg.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        let dates = self.dates.as_array();
        for i in 0..4 {
            for j in i + 1..4 {
                if dates[i] == dates[j] {
                    return cfg(format!("dates must be distinct, {} repeats", dates[i]));
                }
            }
        }
        if self.windows.analysis_hour > 23 {
            return cfg(format!("analysis hour {} out of range", self.windows.analysis_hour));
        }
        self.windows.night_window()?;
        let l = &self.lisa;
        if !(l.max_dist_m > 0.0 && l.max_dist_m.is_finite()) {
            return cfg(format!("max distance {} must be positive", l.max_dist_m));
        }
        if l.permutations < 1 {
            return cfg("permutations must be at least 1".into());
        }
        if !(l.alpha > 0.0 && l.alpha < 1.0) {
            return cfg(format!("alpha {} outside (0, 1)", l.alpha));
        }
        if l.jobs_k < 1 {
            return cfg("jobs k must be at least 1".into());
        }
        let d = &self.demographics;
        if d.k < 1 {
            return cfg("k must be at least 1".into());
        }
        if d.poor_ref_ages.0 > d.poor_ref_ages.1 {
            return cfg(format!("poverty reference ages {:?} are reversed", d.poor_ref_ages));
        }
        if !(d.poor_fraction > 0.0 && d.poor_fraction.is_finite()) {
            return cfg(format!("poverty fraction {} must be positive", d.poor_fraction));
        }
        if !(d.coverage_radius_m >= 0.0) {
            return cfg(format!("coverage radius {} must be non-negative", d.coverage_radius_m));
        }
        if !(d.percentile > 0.0 && d.percentile <= 100.0) {
            return cfg(format!("percentile {} outside (0, 100]", d.percentile));
        }
        if self.shards < 1 {
            return cfg("shards must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML of every output-relevant setting.
    /// Input paths enter by file name only, so relocating a run keeps its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        for p in [
            &mut c.inputs.events,
            &mut c.inputs.towers,
            &mut c.inputs.population,
            &mut c.inputs.jobs,
        ] {
            *p = p.file_name().map(PathBuf::from).unwrap_or_default();
        }
        c.output_dir = PathBuf::new();
        let text = toml::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Parses `A-B` into an inclusive age range.
pub fn parse_age_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("bad age range {s:?}, expected A-B"))?;
    let a = a.trim().parse().map_err(|_| format!("bad age {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad age {b:?}"))?;
    Ok((a, b))
}
