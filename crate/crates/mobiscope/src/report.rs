//! Result tables: the subgroup max-distance summary, distance-bin shares for
//! the two treated dates, and hot/cold spot changes with job distances.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use mobiscope_core::demographics::Attribute;
use mobiscope_core::did::{
    distance_histogram, hotcold_pct_change, subgroup_did, DidCell, DistanceHistogram, PctMethod, Quad, SubgroupDid,
    SubgroupMask,
};
use mobiscope_core::gridagg::{DistanceSum, HomeDistanceFrame};
use mobiscope_core::lisa::LisaClass;
use mobiscope_core::KmCell;

use crate::config::{Dates, RunConfig};
use crate::error::Result;
use crate::io::{
    fixed, opt_fixed, DemographicsRow, DidRow, HomeDistanceRow, HomeRow, JobsDistanceRow, LabeledTable, LisaRow,
};
use crate::pipeline::require;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportParams {
    pub dates: Dates,
    pub percentile: f64,
    pub pct_method: PctMethod,
}

impl ReportParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        ReportParams {
            dates: cfg.dates,
            percentile: cfg.demographics.percentile,
            pct_method: cfg.pct_method.into(),
        }
    }
}

impl Default for ReportParams {
    fn default() -> Self {
        ReportParams { dates: Dates::default(), percentile: 90.0, pct_method: PctMethod::RatioOfSums }
    }
}

/// Rebuilds the per-date home-distance frames from their published rows.
pub fn home_frames(rows: &[HomeDistanceRow], dates: &Dates) -> Quad<HomeDistanceFrame> {
    dates.quad().map(|d| {
        let mut f = HomeDistanceFrame::empty(*d);
        for r in rows.iter().filter(|r| r.date == *d) {
            f.cells.insert(r.origin, DistanceSum::from_mean(r.mean_max_dist_m, r.n_phones));
        }
        f
    })
}

/// Top-percentile mask of one attribute over covered cells.
pub fn attribute_mask(demo: &[DemographicsRow], attr: Attribute, percentile: f64) -> Result<SubgroupMask> {
    let idx = Attribute::ALL.iter().position(|a| *a == attr).expect("attribute listed");
    let shares: Vec<(KmCell, f64)> = demo.iter().filter_map(|r| r.shares.map(|s| (r.cell, s[idx]))).collect();
    Ok(SubgroupMask::at_or_above_percentile(attr.as_str(), &shares, percentile)?)
}

/// Overall and per-attribute DiD of mean max distance, in column order.
pub fn subgroup_results(
    home_distance: &[HomeDistanceRow],
    demo: &[DemographicsRow],
    params: &ReportParams,
) -> Result<Vec<(String, SubgroupDid)>> {
    let frames = home_frames(home_distance, &params.dates);
    let q = Quad {
        treated_pre: &frames.treated_pre,
        treated_post: &frames.treated_post,
        control_pre: &frames.control_pre,
        control_post: &frames.control_post,
    };
    let mut out = vec![("all".to_string(), subgroup_did(q, None)?)];
    for attr in Attribute::ALL {
        let mask = attribute_mask(demo, attr, params.percentile)?;
        out.push((format!("{}_p{}", attr.as_str(), params.percentile), subgroup_did(q, Some(&mask))?));
    }
    Ok(out)
}

/// Four data rows (baseline, DiD, percent change, treated-post mean) and an
/// observation-count row, one column per population slice.
pub fn summary_table(results: &[(String, SubgroupDid)]) -> LabeledTable {
    let mut header = vec!["row".to_string()];
    header.extend(results.iter().map(|(n, _)| n.clone()));
    let row = |label: &str, f: &dyn Fn(&SubgroupDid) -> String| {
        let mut r = vec![label.to_string()];
        r.extend(results.iter().map(|(_, s)| f(s)));
        r
    };
    LabeledTable {
        header,
        rows: vec![
            row("baseline_m", &|s| fixed(s.baseline, 1)),
            row("did_m", &|s| fixed(s.did, 1)),
            row("pct", &|s| opt_fixed(s.pct, 2)),
            row("treated_post_m", &|s| fixed(s.means.treated_post, 1)),
            row("n", &|s| s.n.to_string()),
        ],
    }
}

/// Distance-bin shares of phones with a home on each treated date.
pub fn histogram_table(homes: &[HomeRow], dates: [NaiveDate; 2]) -> Result<LabeledTable> {
    let hists: Vec<DistanceHistogram> = dates
        .iter()
        .map(|d| distance_histogram(homes.iter().filter(|h| h.date == *d).map(|h| h.max_dist_m)))
        .collect::<std::result::Result<_, _>>()?;
    let mut header = vec!["bin".to_string()];
    header.extend(dates.iter().map(|d| d.to_string()));
    let rows = (0..6)
        .map(|i| {
            let mut r = vec![DistanceHistogram::bin_label(i)];
            r.extend(hists.iter().map(|h| fixed(h.shares[i], 6)));
            r
        })
        .chain(std::iter::once({
            let mut r = vec!["n".to_string()];
            r.extend(hists.iter().map(|h| h.n.to_string()));
            r
        }))
        .collect();
    Ok(LabeledTable { header, rows })
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        (sorted[m - 1] + sorted[m]) / 2.0
    }
}

/// Mean, median and max of a sample; `None` when empty.
pub fn describe(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some((v.iter().sum::<f64>() / v.len() as f64, median(&v), v[v.len() - 1]))
}

/// HH and LL rows: cell count, average percent change of the DiD and the
/// job-distance summary.
pub fn lisa_summary_table(
    did: &[DidRow],
    lisa: &[LisaRow],
    jobs: &[JobsDistanceRow],
    method: PctMethod,
) -> LabeledTable {
    let grid: BTreeMap<KmCell, DidCell> = did
        .iter()
        .map(|r| (r.cell, DidCell { cell: r.cell, did: r.did, baseline: r.baseline, pct: r.pct }))
        .collect();
    let of = |c: LisaClass| lisa.iter().filter(|r| r.class == c).map(|r| r.cell).collect::<BTreeSet<_>>();
    let (hh, ll) = (of(LisaClass::HH), of(LisaClass::LL));
    let (pct_hh, pct_ll) = hotcold_pct_change(&grid, &hh, &ll, method);
    let job_map: BTreeMap<KmCell, f64> = jobs.iter().map(|j| (j.cell, j.dist_m)).collect();
    let row = |class: LisaClass, cells: &BTreeSet<KmCell>, pct: Option<f64>| {
        let dists: Vec<f64> = cells.iter().filter_map(|c| job_map.get(c).copied()).collect();
        let d = describe(&dists);
        vec![
            class.to_string(),
            cells.len().to_string(),
            opt_fixed(pct, 2),
            opt_fixed(d.map(|d| d.0), 1),
            opt_fixed(d.map(|d| d.1), 1),
            opt_fixed(d.map(|d| d.2), 1),
        ]
    };
    LabeledTable {
        header: ["class", "n_cells", "pct_change", "jobs_dist_mean_m", "jobs_dist_median_m", "jobs_dist_max_m"]
            .map(String::from)
            .to_vec(),
        rows: vec![row(LisaClass::HH, &hh, pct_hh), row(LisaClass::LL, &ll, pct_ll)],
    }
}

/// Writes `summary.csv`, `histogram.csv` and `lisa_summary.csv` from the
/// pipeline outputs in `dir`; returns file names and row counts.
pub fn report(dir: &Path, params: &ReportParams) -> Result<Vec<(String, u64)>> {
    let home_distance: Vec<HomeDistanceRow> = require(dir, "home_distance.csv")?;
    let demo: Vec<DemographicsRow> = require(dir, "demographics.csv")?;
    let homes: Vec<HomeRow> = require(dir, "homes.csv")?;
    let did: Vec<DidRow> = require(dir, "did_grid.csv")?;
    let lisa: Vec<LisaRow> = require(dir, "lisa.csv")?;
    let jobs: Vec<JobsDistanceRow> = require(dir, "jobs_distance.csv")?;

    let results = subgroup_results(&home_distance, &demo, params)?;
    let summary = summary_table(&results);
    let hist = histogram_table(&homes, [params.dates.treated_pre, params.dates.treated_post])?;
    let ls = lisa_summary_table(&did, &lisa, &jobs, params.pct_method);
    Ok(vec![
        ("summary.csv".into(), summary.write(&dir.join("summary.csv"))?),
        ("histogram.csv".into(), hist.write(&dir.join("histogram.csv"))?),
        ("lisa_summary.csv".into(), ls.write(&dir.join("lisa_summary.csv"))?),
    ])
}
