use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use mobiscope::config::RunConfig;
use mobiscope::error::Error;
use mobiscope::io::{self, DemographicsRow, LabeledTable};
use mobiscope::pipeline::{run_pipeline, tree_digest, OUTPUT_FILES};
use mobiscope::report::{self, attribute_mask, ReportParams};
use mobiscope::synth::{self, GroundTruth, Scenario};
use mobiscope_core::demographics::Attribute;
use mobiscope_core::KmCell;
use tempfile::TempDir;

const WORLD: &str = r#"
seed = 21
[world]
width_km = 10
height_km = 10
[noise]
drop_prob = 0.03
sector_switch_prob = 0.1
[[groups]]
name = "east"
n_agents = 500
home = [0, 0, 4, 10]
work = [6, 0, 10, 5]
attendance = [ATT_EAST]
residents_per_cell = 40
jobs_per_cell = 100
demography = { minority = 0.5, tertiary = 0.1, elderly = 0.05, income_median = 12000.0, income_spread = 0.5 }
[[groups]]
name = "north"
n_agents = 300
home = [4, 0, 6, 10]
work = [6, 5, 10, 10]
attendance = [ATT_NORTH]
residents_per_cell = 30
jobs_per_cell = 80
demography = { minority = 0.05, tertiary = 0.6, elderly = 0.3, income_median = 30000.0, income_spread = 0.3 }
[background]
residents_per_cell = 10
jobs_per_cell = 5
"#;

struct World {
    dir: TempDir,
    truth: GroundTruth,
}

impl World {
    fn new(east: &str, north: &str) -> Self {
        let s = Scenario::from_toml(&WORLD.replace("ATT_EAST", east).replace("ATT_NORTH", north)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let truth = synth::write_world(&s, dir.path()).unwrap();
        World { dir, truth }
    }

    fn effect() -> Self {
        World::new("0.9, 0.4, 0.9, 0.9", "0.9, 0.8, 0.9, 0.85")
    }

    fn config(&self, out: &str) -> RunConfig {
        let mut cfg = RunConfig::for_dirs(self.dir.path(), &self.out(out));
        cfg.lisa.permutations = 199;
        cfg
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn summary(out: &Path) -> LabeledTable {
    LabeledTable::read(&out.join("summary.csv")).unwrap()
}

fn num(t: &LabeledTable, row: &str, col: &str) -> f64 {
    t.value(row, col).unwrap_or_else(|| panic!("{row}/{col}")).parse().unwrap()
}

#[test]
fn unchanged_behaviour_gives_no_effect() {
    let w = World::new("1.0, 1.0, 1.0, 1.0", "0.7, 0.7, 0.7, 0.7");
    run_pipeline(&w.config("out")).unwrap();
    let pct = num(&summary(&w.out("out")), "pct", "all");
    assert!(pct.abs() <= 1.0, "{pct}");
}

#[test]
fn shard_count_does_not_change_outputs() {
    let w = World::effect();
    let mut digests = Vec::new();
    for shards in [1, 3, 8] {
        let mut cfg = w.config(&format!("out-{shards}"));
        cfg.shards = shards;
        run_pipeline(&cfg).unwrap();
        digests.push(tree_digest(&cfg.output_dir).unwrap());
    }
    assert_eq!(digests[0].len(), OUTPUT_FILES.len());
    assert!(digests.windows(2).all(|d| d[0] == d[1]));
}

#[test]
fn rerun_reproduces_the_manifest() {
    let w = World::effect();
    let cfg = w.config("out");
    let stats = run_pipeline(&cfg).unwrap();
    let first = fs::read(cfg.output_dir.join("manifest.csv")).unwrap();
    run_pipeline(&cfg).unwrap();
    assert_eq!(fs::read(cfg.output_dir.join("manifest.csv")).unwrap(), first);

    let manifest = LabeledTable::read(&cfg.output_dir.join("manifest.csv")).unwrap();
    assert_eq!(manifest.value("config", "sha256"), Some(cfg.hash().as_str()));
    assert_eq!(manifest.rows.len(), OUTPUT_FILES.len());
    assert_eq!(stats.events, w.truth.events);
    assert_eq!(stats.phones as usize, w.truth.agent_days.iter().filter(|d| d.events > 0).count());
    assert!(!cfg.output_dir.join(".mobiscope-partial").exists());

    let mut other = cfg.clone();
    other.lisa.seed += 1;
    assert_ne!(other.hash(), cfg.hash());
    other = cfg.clone();
    other.shards = 9;
    assert_eq!(other.hash(), cfg.hash());
}

#[test]
fn report_tables_have_the_published_shape() {
    let w = World::effect();
    let cfg = w.config("out");
    run_pipeline(&cfg).unwrap();
    let out = &cfg.output_dir;

    let s = summary(out);
    let cols: Vec<&str> = s.header.iter().map(String::as_str).collect();
    assert_eq!(cols, ["row", "all", "minority_p90", "high_edu_p90", "poor_p90", "risk70_p90"]);
    let labels: Vec<&str> = s.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["baseline_m", "did_m", "pct", "treated_post_m", "n"]);
    for col in &cols[1..] {
        let (base, did, pct) = (num(&s, "baseline_m", col), num(&s, "did_m", col), num(&s, "pct", col));
        assert!(base > 0.0 && did < 0.0, "{col}");
        assert!((pct - 100.0 * did / base).abs() < 0.1, "{col}: {pct}");
    }

    let h = LabeledTable::read(&out.join("histogram.csv")).unwrap();
    assert_eq!(h.rows.len(), 7);
    for col in 1..h.header.len() {
        let total: f64 = h.rows[..6].iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() <= 1e-5, "{total}");
    }

    let ls = LabeledTable::read(&out.join("lisa_summary.csv")).unwrap();
    let classes: Vec<&str> = ls.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(classes, ["HH", "LL"]);
    assert!(ls.value("HH", "pct_change").unwrap().parse::<f64>().unwrap() > 0.0);
    assert!(ls.value("LL", "pct_change").unwrap().parse::<f64>().unwrap() < 0.0);
}

fn truth_pct(truth: &GroundTruth, cells: Option<&BTreeSet<KmCell>>) -> f64 {
    let means: Vec<f64> = truth
        .dates
        .iter()
        .map(|&d| {
            let v: Vec<f64> = truth
                .agent_days
                .iter()
                .filter(|a| a.date == d && a.night_service && cells.is_none_or(|c| c.contains(&a.home_cell)))
                .map(|a| a.max_dist_m)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    100.0 * ((means[1] - means[0]) - (means[3] - means[2])) / means[0]
}

#[test]
fn subgroup_effects_match_the_ground_truth() {
    let w = World::effect();
    let cfg = w.config("out");
    run_pipeline(&cfg).unwrap();
    let s = summary(&cfg.output_dir);
    let demo: Vec<DemographicsRow> = io::read_table(&cfg.output_dir.join("demographics.csv")).unwrap();

    let all = num(&s, "pct", "all");
    let expected = truth_pct(&w.truth, None);
    assert!((all - expected).abs() <= 1.5, "all: {all} vs {expected}");
    let mut seen = HashMap::new();
    for attr in Attribute::ALL {
        let mask = attribute_mask(&demo, attr, 90.0).unwrap();
        let expected = truth_pct(&w.truth, Some(&mask.cells));
        let got = num(&s, "pct", &format!("{}_p90", attr.as_str()));
        assert!((got - expected).abs() <= 1.5, "{attr}: {got} vs {expected}");
        seen.insert(attr, got);
    }
    assert!(seen[&Attribute::Minority] < seen[&Attribute::HighEdu]);
}

#[test]
fn report_names_a_missing_upstream_file() {
    let w = World::effect();
    let cfg = w.config("out");
    run_pipeline(&cfg).unwrap();
    fs::remove_file(cfg.output_dir.join("lisa.csv")).unwrap();
    let err = report::report(&cfg.output_dir, &ReportParams::from_config(&cfg)).unwrap_err();
    assert!(err.to_string().contains("lisa.csv"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn failed_runs_leave_no_outputs() {
    let w = World::effect();
    fs::write(w.dir.path().join("population.csv"), "x_m,y_m,age,minority,tertiary_edu,disposable_income\n").unwrap();
    let cfg = w.config("out");
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "demographics", .. }), "{err}");
    let left: Vec<_> = fs::read_dir(&cfg.output_dir).unwrap().collect();
    assert!(left.is_empty(), "{left:?}");

    let mut cfg = w.config("out2");
    cfg.inputs.jobs = w.dir.path().join("missing.csv");
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().contains("missing.csv"), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    let w = World::effect();
    let base = w.config("out");
    let mut bad: BTreeMap<&str, RunConfig> = BTreeMap::new();
    let mut c = base.clone();
    c.lisa.alpha = 1.0;
    bad.insert("alpha", c);
    let mut c = base.clone();
    c.demographics.k = 0;
    bad.insert("k", c);
    let mut c = base.clone();
    c.dates.control_pre = c.dates.treated_post;
    bad.insert("dates", c);
    let mut c = base.clone();
    c.windows.night = "06:00-03:00".into();
    bad.insert("night", c);
    let mut c = base;
    c.shards = 0;
    bad.insert("shards", c);
    for (what, cfg) in bad {
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{what}: {err}");
    }
    assert!(!w.out("out").exists());
}
