//! Difference-in-Differences over the four study dates.
//!
//! The treated pair is (pre, post) in the outbreak year and the control pair
//! is the same calendar pair one year earlier:
//! `did = (post_t - pre_t) - (post_c - pre_c)`, expressed as a percentage of
//! the treated-pre baseline.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geo::KmCell;
use crate::gridagg::{DistanceSum, GridFrame, HomeDistanceFrame};
use crate::time::HourBucket;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DidError {
    #[error("frames are for different hours: {0:?} vs {1:?}")]
    HourMismatch(HourBucket, HourBucket),
    #[error("subgroup mask {0:?} selects no cells")]
    EmptyMask(String),
    #[error("no observations for {0} in the selected cells")]
    NoObservations(&'static str),
    #[error("no values to summarize")]
    EmptyInput,
    #[error("percentile {0} outside (0, 100]")]
    BadPercentile(f64),
    #[error("distance {0} is negative or not finite")]
    BadDistance(f64),
}

/// The same quantity at each of the four study dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Quad<T> {
    pub treated_pre: T,
    pub treated_post: T,
    pub control_pre: T,
    pub control_post: T,
}

impl<T> Quad<T> {
    pub fn map<U, F: FnMut(&T) -> U>(&self, mut f: F) -> Quad<U> {
        Quad {
            treated_pre: f(&self.treated_pre),
            treated_post: f(&self.treated_post),
            control_pre: f(&self.control_pre),
            control_post: f(&self.control_post),
        }
    }

    pub fn as_array(&self) -> [&T; 4] {
        [&self.treated_pre, &self.treated_post, &self.control_pre, &self.control_post]
    }
}

/// Percent change of `did` relative to `baseline`; undefined unless the
/// baseline is positive.
pub fn pct_of(did: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| 100.0 * did / baseline)
}

/// DiD of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DidCell {
    pub cell: KmCell,
    pub did: f64,
    /// Treated-pre value.
    pub baseline: f64,
    pub pct: Option<f64>,
}

/// Cell-wise DiD of four same-hour presence frames.
///
/// Cells missing from a frame count as zero; cells missing from all four
/// are absent from the result.
pub fn did_grid(frames: Quad<&GridFrame>) -> Result<BTreeMap<KmCell, DidCell>, DidError> {
    let hour = frames.treated_pre.bucket;
    for f in frames.as_array() {
        if f.bucket.hour != hour.hour {
            return Err(DidError::HourMismatch(hour, f.bucket));
        }
    }
    let cells: BTreeSet<KmCell> = frames
        .as_array()
        .iter()
        .flat_map(|f| f.cells.keys().copied())
        .collect();
    Ok(cells
        .into_iter()
        .map(|cell| {
            let v = frames.map(|f| f.count(&cell) as f64);
            let d = did_scalar(v);
            (
                cell,
                DidCell {
                    cell,
                    did: d.did,
                    baseline: v.treated_pre,
                    pct: d.pct,
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DidScalar {
    pub did: f64,
    pub pct: Option<f64>,
}

/// `(post_t - pre_t) - (post_c - pre_c)` and its percentage of `pre_t`.
pub fn did_scalar(v: Quad<f64>) -> DidScalar {
    let did = (v.treated_post - v.treated_pre) - (v.control_post - v.control_pre);
    DidScalar {
        did,
        pct: pct_of(did, v.treated_pre),
    }
}

/// Cells at or above a percentile of one demographic share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupMask {
    pub attribute: String,
    pub cells: BTreeSet<KmCell>,
}

impl SubgroupMask {
    /// Threshold is the order statistic at rank `floor(p/100 * n)` (0-based),
    /// so the top `ceil((1 - p/100) * n)` cells are selected absent ties;
    /// every cell at or above the threshold is selected, ties included.
    pub fn at_or_above_percentile(
        attribute: &str,
        shares: &[(KmCell, f64)],
        percentile: f64,
    ) -> Result<Self, DidError> {
        if !(percentile > 0.0 && percentile <= 100.0) {
            return Err(DidError::BadPercentile(percentile));
        }
        if shares.is_empty() {
            return Err(DidError::EmptyInput);
        }
        let mut sorted: Vec<f64> = shares.iter().map(|s| s.1).collect();
        sorted.sort_by(f64::total_cmp);
        let rank = libm::floor(percentile / 100.0 * sorted.len() as f64) as usize;
        let threshold = sorted[rank.min(sorted.len() - 1)];
        Ok(SubgroupMask {
            attribute: String::from(attribute),
            cells: shares
                .iter()
                .filter(|(_, v)| *v >= threshold)
                .map(|(c, _)| *c)
                .collect(),
        })
    }
}

/// Baseline, DiD and percent change for one population slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgroupDid {
    pub baseline: f64,
    pub did: f64,
    pub pct: Option<f64>,
    /// Phones with a home in the slice on the treated-pre date.
    pub n: u64,
    pub n_by_date: Quad<u64>,
    /// Mean max-distance on each date.
    pub means: Quad<f64>,
}

/// DiD of mean max-distance from home, restricted to phones whose home cell
/// is in `mask` (all phones when `mask` is `None`).
pub fn subgroup_did(
    frames: Quad<&HomeDistanceFrame>,
    mask: Option<&SubgroupMask>,
) -> Result<SubgroupDid, DidError> {
    if let Some(m) = mask {
        if m.cells.is_empty() {
            return Err(DidError::EmptyMask(m.attribute.clone()));
        }
    }
    let pooled: Quad<DistanceSum> =
        frames.map(|f| f.pooled(|c| mask.map_or(true, |m| m.cells.contains(c))));
    let mean = |s: &DistanceSum, label: &'static str| s.mean().ok_or(DidError::NoObservations(label));
    let means = Quad {
        treated_pre: mean(&pooled.treated_pre, "treated-pre")?,
        treated_post: mean(&pooled.treated_post, "treated-post")?,
        control_pre: mean(&pooled.control_pre, "control-pre")?,
        control_post: mean(&pooled.control_post, "control-post")?,
    };
    let d = did_scalar(means);
    Ok(SubgroupDid {
        baseline: means.treated_pre,
        did: d.did,
        pct: d.pct,
        n: pooled.treated_pre.n(),
        n_by_date: pooled.map(|s| s.n()),
        means,
    })
}

/// Lower edges of the max-distance bins, meters. The last bin is open.
pub const DISTANCE_BIN_EDGES: [f64; 6] = [0.0, 1000.0, 5000.0, 10_000.0, 20_000.0, 30_000.0];

/// Share of phones per max-distance bin; bins are lower-inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceHistogram {
    pub shares: [f64; 6],
    pub n: u64,
}

impl DistanceHistogram {
    pub fn bin_of(meters: f64) -> usize {
        DISTANCE_BIN_EDGES.iter().rposition(|&e| meters >= e).unwrap_or(0)
    }

    pub fn bin_label(i: usize) -> String {
        use alloc::format;
        match DISTANCE_BIN_EDGES.get(i + 1) {
            Some(hi) => format!("{}-{}", DISTANCE_BIN_EDGES[i], hi - 1.0),
            None => format!("{}+", DISTANCE_BIN_EDGES[i]),
        }
    }
}

pub fn distance_histogram<I: IntoIterator<Item = f64>>(distances: I) -> Result<DistanceHistogram, DidError> {
    let mut counts = [0u64; 6];
    let mut n = 0u64;
    for d in distances {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(DidError::BadDistance(d));
        }
        counts[DistanceHistogram::bin_of(d)] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(DidError::EmptyInput);
    }
    let mut shares = [0.0; 6];
    for (s, c) in shares.iter_mut().zip(counts) {
        *s = c as f64 / n as f64;
    }
    Ok(DistanceHistogram { shares, n })
}

/// How per-cell DiDs are summarized into one percentage over a cell set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PctMethod {
    /// `100 * sum(did) / sum(baseline)`.
    #[default]
    RatioOfSums,
    /// Mean of per-cell percentages over cells with a positive baseline.
    MeanOfCellRatios,
}

/// Average percentage change of the DiD over `cells`; `None` when the
/// baseline is zero (or no cell has a positive baseline).
pub fn pct_change_over<'a, I>(grid: &BTreeMap<KmCell, DidCell>, cells: I, method: PctMethod) -> Option<f64>
where
    I: IntoIterator<Item = &'a KmCell>,
{
    let selected = cells.into_iter().filter_map(|c| grid.get(c));
    match method {
        PctMethod::RatioOfSums => {
            let (d, b) = selected.fold((0.0, 0.0), |(d, b), c| (d + c.did, b + c.baseline));
            pct_of(d, b)
        }
        PctMethod::MeanOfCellRatios => {
            let (sum, n) = selected
                .filter_map(|c| c.pct)
                .fold((0.0, 0usize), |(s, n), p| (s + p, n + 1));
            (n > 0).then(|| sum / n as f64)
        }
    }
}

/// Average percentage change in the hot-spot and cold-spot cell sets.
pub fn hotcold_pct_change(
    grid: &BTreeMap<KmCell, DidCell>,
    hh: &BTreeSet<KmCell>,
    ll: &BTreeSet<KmCell>,
    method: PctMethod,
) -> (Option<f64>, Option<f64>) {
    (pct_change_over(grid, hh, method), pct_change_over(grid, ll, method))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn quad(a: f64, b: f64, c: f64, d: f64) -> Quad<f64> {
        // argument order follows the (post_t, pre_t, post_c, pre_c) formula
        Quad { treated_post: a, treated_pre: b, control_post: c, control_pre: d }
    }

    fn cell(i: u32, j: u32) -> KmCell {
        KmCell::from_index(i, j)
    }

    fn frame(date: (i32, u32, u32), hour: u8, cells: &[(KmCell, u32)]) -> GridFrame {
        GridFrame {
            bucket: HourBucket { date: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(), hour },
            cells: cells.iter().copied().collect(),
        }
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(did_scalar(quad(10.0, 8.0, 9.0, 9.0)).did, 2.0);
        let z = did_scalar(quad(5.0, 5.0, 5.0, 5.0));
        assert_eq!((z.did, z.pct), (0.0, Some(0.0)));
        let d = did_scalar(quad(4.0, 6.0, 1.0, 1.0));
        assert_eq!(d.did, -2.0);
        assert!((d.pct.unwrap() + 33.333_333).abs() < 1e-4);
        assert_eq!(did_scalar(quad(4.0, 0.0, 1.0, 1.0)).pct, None);
    }

    #[test]
    fn overall_column_arithmetic() {
        // baseline 6172 m, DiD -2346 m
        let d = did_scalar(quad(6172.0 - 2346.0, 6172.0, 1000.0, 1000.0));
        assert_eq!(d.did, -2346.0);
        assert!((d.pct.unwrap() - -38.0).abs() < 0.05);
    }

    #[test]
    fn grid_examples() {
        let c = cell(0, 0);
        let g = did_grid(Quad {
            treated_post: &frame((2020, 3, 26), 10, &[(c, 10)]),
            treated_pre: &frame((2020, 1, 16), 10, &[(c, 8)]),
            control_post: &frame((2019, 3, 28), 10, &[(c, 9)]),
            control_pre: &frame((2019, 1, 17), 10, &[(c, 9)]),
        })
        .unwrap();
        assert_eq!(g[&c].did, 2.0);
        assert_eq!(g[&c].baseline, 8.0);
        assert_eq!(g[&c].pct, Some(25.0));
        assert!(!g.contains_key(&cell(5, 5)));

        let same = frame((2020, 1, 16), 10, &[(c, 4)]);
        let g = did_grid(Quad { treated_post: &same, treated_pre: &same, control_post: &same, control_pre: &same }).unwrap();
        assert_eq!(g[&c].did, 0.0);
    }

    #[test]
    fn grid_zero_fills_missing_cells() {
        let (a, b) = (cell(0, 0), cell(1, 0));
        let g = did_grid(Quad {
            treated_post: &frame((2020, 3, 26), 10, &[(a, 3)]),
            treated_pre: &frame((2020, 1, 16), 10, &[(b, 2)]),
            control_post: &frame((2019, 3, 28), 10, &[]),
            control_pre: &frame((2019, 1, 17), 10, &[]),
        })
        .unwrap();
        assert_eq!(g[&a].did, 3.0);
        assert_eq!(g[&a].pct, None);
        assert_eq!(g[&b].did, -2.0);
    }

    #[test]
    fn grid_rejects_mismatched_hours() {
        let f10 = frame((2020, 1, 16), 10, &[]);
        let f11 = frame((2020, 3, 26), 11, &[]);
        assert!(matches!(
            did_grid(Quad { treated_post: &f11, treated_pre: &f10, control_post: &f10, control_pre: &f10 }),
            Err(DidError::HourMismatch(..))
        ));
    }

    #[test]
    fn histogram_examples() {
        let h = distance_histogram([500.0, 1500.0, 7000.0]).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(h.shares, [third, third, third, 0.0, 0.0, 0.0]);
        let h = distance_histogram([0.0, 0.0]).unwrap();
        assert_eq!(h.shares[0], 1.0);
        assert_eq!(distance_histogram(core::iter::empty()), Err(DidError::EmptyInput));
        assert_eq!(DistanceHistogram::bin_of(999.999), 0);
        assert_eq!(DistanceHistogram::bin_of(1000.0), 1);
        assert_eq!(DistanceHistogram::bin_of(29_999.0), 4);
        assert_eq!(DistanceHistogram::bin_of(30_000.0), 5);
        assert_eq!(DistanceHistogram::bin_label(0), "0-999");
        assert_eq!(DistanceHistogram::bin_label(5), "30000+");
    }

    fn did_map(rows: &[(KmCell, f64, f64)]) -> BTreeMap<KmCell, DidCell> {
        rows.iter()
            .map(|&(cell, did, baseline)| (cell, DidCell { cell, did, baseline, pct: pct_of(did, baseline) }))
            .collect()
    }

    #[test]
    fn hotcold_examples() {
        let (a, b, c) = (cell(0, 0), cell(1, 0), cell(5, 5));
        let g = did_map(&[(a, 8.0, 10.0), (b, 8.0, 15.0), (c, -1.0, 3.0)]);
        let hh: BTreeSet<_> = [a, b].into_iter().collect();
        let ll: BTreeSet<_> = [c].into_iter().collect();
        let (h, l) = hotcold_pct_change(&g, &hh, &ll, PctMethod::RatioOfSums);
        assert!((h.unwrap() - 64.0).abs() < 1e-12);
        assert!((l.unwrap() + 33.333_333_333).abs() < 1e-6);
        let (h, _) = hotcold_pct_change(&g, &hh, &ll, PctMethod::MeanOfCellRatios);
        assert!((h.unwrap() - (80.0 + 160.0 / 3.0) / 2.0).abs() < 1e-12);

        let z = did_map(&[(a, 0.0, 10.0)]);
        assert_eq!(pct_change_over(&z, &[a], PctMethod::RatioOfSums), Some(0.0));
        let zb = did_map(&[(a, 2.0, 0.0)]);
        assert_eq!(pct_change_over(&zb, &[a], PctMethod::RatioOfSums), None);
    }

    #[test]
    fn percentile_mask() {
        let shares: Vec<(KmCell, f64)> = (0..20).map(|i| (cell(i, 0), i as f64 / 20.0)).collect();
        let m = SubgroupMask::at_or_above_percentile("minority", &shares, 90.0).unwrap();
        assert_eq!(m.cells.len(), 2);
        assert!(m.cells.contains(&cell(18, 0)) && m.cells.contains(&cell(19, 0)));
        let ties: Vec<(KmCell, f64)> = (0..20).map(|i| (cell(i, 0), 0.5)).collect();
        assert_eq!(SubgroupMask::at_or_above_percentile("x", &ties, 90.0).unwrap().cells.len(), 20);
        assert!(SubgroupMask::at_or_above_percentile("x", &[], 90.0).is_err());
        assert!(SubgroupMask::at_or_above_percentile("x", &shares, 0.0).is_err());
    }

    fn hd(date: (i32, u32, u32), rows: &[(KmCell, &[f64])]) -> HomeDistanceFrame {
        let mut f = HomeDistanceFrame::empty(NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap());
        for (c, ds) in rows {
            let e = f.cells.entry(*c).or_default();
            ds.iter().for_each(|d| e.add(*d));
        }
        f
    }

    #[test]
    fn subgroup_full_mask_equals_overall() {
        let (a, b) = (cell(0, 0), cell(1, 0));
        let tp = hd((2020, 1, 16), &[(a, &[6000.0, 7000.0]), (b, &[5000.0])]);
        let tq = hd((2020, 3, 26), &[(a, &[3000.0, 4000.0]), (b, &[4000.0])]);
        let cp = hd((2019, 1, 17), &[(a, &[6000.0]), (b, &[6000.0])]);
        let cq = hd((2019, 3, 28), &[(a, &[6100.0]), (b, &[5900.0])]);
        let frames = Quad { treated_pre: &tp, treated_post: &tq, control_pre: &cp, control_post: &cq };
        let all = subgroup_did(frames, None).unwrap();
        let mask = SubgroupMask { attribute: "all".into(), cells: [a, b].into_iter().collect() };
        assert_eq!(subgroup_did(frames, Some(&mask)).unwrap(), all);
        assert_eq!(all.n, 3);
        assert_eq!(all.baseline, 6000.0);
        assert!((all.did - (11000.0 / 3.0 - 6000.0)).abs() < 1e-9);

        let only_b = SubgroupMask { attribute: "b".into(), cells: [b].into_iter().collect() };
        let sb = subgroup_did(frames, Some(&only_b)).unwrap();
        assert_eq!((sb.baseline, sb.did, sb.n), (5000.0, -1000.0 - -100.0, 1));

        let empty = SubgroupMask { attribute: "none".into(), cells: BTreeSet::new() };
        assert!(matches!(subgroup_did(frames, Some(&empty)), Err(DidError::EmptyMask(_))));
        let elsewhere = SubgroupMask { attribute: "far".into(), cells: [cell(9, 9)].into_iter().collect() };
        assert!(matches!(subgroup_did(frames, Some(&elsewhere)), Err(DidError::NoObservations(_))));
    }

    fn arb_frame(hour: u8, date: (i32, u32, u32)) -> impl Strategy<Value = GridFrame> {
        proptest::collection::btree_map((0u32..6, 0u32..6), 0u32..50, 0..20).prop_map(move |m| GridFrame {
            bucket: HourBucket { date: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(), hour },
            cells: m.into_iter().map(|((i, j), n)| (cell(i, j), n)).collect(),
        })
    }

    proptest! {
        #[test]
        fn grid_algebra(
            tp in arb_frame(10, (2020, 1, 16)), tq in arb_frame(10, (2020, 3, 26)),
            cp in arb_frame(10, (2019, 1, 17)), cq in arb_frame(10, (2019, 3, 28)),
            k in 1u32..100,
        ) {
            let g = did_grid(Quad { treated_pre: &tp, treated_post: &tq, control_pre: &cp, control_post: &cq }).unwrap();
            let swapped = did_grid(Quad { treated_pre: &cp, treated_post: &cq, control_pre: &tp, control_post: &tq }).unwrap();
            for (c, d) in &g {
                prop_assert_eq!(swapped[c].did, -d.did);
            }
            let same = did_grid(Quad { treated_pre: &tp, treated_post: &tq, control_pre: &tp, control_post: &tq }).unwrap();
            prop_assert!(same.values().all(|d| d.did == 0.0));

            let cells: BTreeSet<KmCell> = g.keys().copied().collect();
            let shift = |f: &GridFrame| GridFrame {
                bucket: f.bucket,
                cells: cells.iter().map(|c| (*c, f.count(c) + k)).collect(),
            };
            let shifted = did_grid(Quad { treated_pre: &shift(&tp), treated_post: &shift(&tq), control_pre: &shift(&cp), control_post: &shift(&cq) }).unwrap();
            for (c, d) in &g {
                prop_assert_eq!(shifted[c].did, d.did);
            }
        }

        #[test]
        fn histogram_closes(ds in proptest::collection::vec(0.0f64..100_000.0, 1..500)) {
            let h = distance_histogram(ds.iter().copied()).unwrap();
            prop_assert!((h.shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(h.shares.iter().all(|&s| s >= 0.0));
        }
    }
}
