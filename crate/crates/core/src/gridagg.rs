//! Hourly km-grid presence counts and per home-cell distance means.
//!
//! Presence is counted per phone: a phone contributes at most one to a
//! `(cell, hour)` pair, but may contribute to several cells within an hour.
//! Distance sums are held in integer micrometres so that shard partials
//! combine associatively and commutatively: the merged result is
//! bit-identical for any partition of phones and any merge order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use chrono::NaiveDate;
use thiserror::Error;

use crate::geo::KmCell;
use crate::mobility::{halfway_track, MaxDistanceRecord, MobilityError, PhoneDay, PhoneId, TowerTable};
use crate::time::HourBucket;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("frames for different hours cannot be merged ({0:?} vs {1:?})")]
    BucketMismatch(HourBucket, HourBucket),
    #[error("frames for different dates cannot be merged ({0} vs {1})")]
    DateMismatch(NaiveDate, NaiveDate),
    #[error("no frames to merge")]
    NoFrames,
    #[error("phone {0} appears in more than one shard")]
    DuplicatePhone(PhoneId),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
}

/// Unique-phone counts per cell for one hour of one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridFrame {
    pub bucket: HourBucket,
    pub cells: BTreeMap<KmCell, u32>,
}

impl GridFrame {
    pub fn empty(bucket: HourBucket) -> Self {
        GridFrame {
            bucket,
            cells: BTreeMap::new(),
        }
    }

    pub fn count(&self, cell: &KmCell) -> u32 {
        self.cells.get(cell).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.cells.values().map(|&c| c as u64).sum()
    }
}

/// Presence counts for every hour seen, keyed by hour bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PresenceGrid {
    hours: BTreeMap<HourBucket, BTreeMap<KmCell, u32>>,
}

impl PresenceGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one phone's distinct `(hour, cell)` visits.
    pub fn add_phone(&mut self, day: &PhoneDay, towers: &TowerTable) -> Result<(), GridError> {
        let mut visits = phone_visits(day, towers)?;
        visits.sort_unstable();
        visits.dedup();
        for (bucket, cell) in visits {
            *self.hours.entry(bucket).or_default().entry(cell).or_insert(0) += 1;
        }
        Ok(())
    }

    pub fn frame(&self, bucket: HourBucket) -> GridFrame {
        GridFrame {
            bucket,
            cells: self.hours.get(&bucket).cloned().unwrap_or_default(),
        }
    }

    /// Non-empty frames in bucket order.
    pub fn frames(&self) -> Vec<GridFrame> {
        self.hours
            .iter()
            .map(|(&bucket, cells)| GridFrame {
                bucket,
                cells: cells.clone(),
            })
            .collect()
    }

    pub fn merge(&mut self, other: PresenceGrid) {
        for (bucket, cells) in other.hours {
            let dst = self.hours.entry(bucket).or_default();
            for (cell, n) in cells {
                *dst.entry(cell).or_insert(0) += n;
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }
}

fn phone_visits(day: &PhoneDay, towers: &TowerTable) -> Result<Vec<(HourBucket, KmCell)>, GridError> {
    let mut out = Vec::with_capacity(day.pings().len());
    for step in halfway_track(day, towers) {
        let (at, p) = step?;
        out.push((HourBucket::of(at), KmCell::containing(p).map_err(MobilityError::from)?));
    }
    Ok(out)
}

/// One frame per hour of `date` that has any presence.
pub fn aggregate_presence(
    days: &[PhoneDay],
    towers: &TowerTable,
    date: NaiveDate,
) -> Result<Vec<GridFrame>, GridError> {
    let mut grid = PresenceGrid::new();
    for day in days {
        grid.add_phone(day, towers)?;
    }
    Ok(grid.frames().into_iter().filter(|f| f.bucket.date == date).collect())
}

/// Running sum of max-distances in integer micrometres plus a phone count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DistanceSum {
    sum_um: i128,
    n: u64,
}

impl DistanceSum {
    pub fn add(&mut self, meters: f64) {
        self.sum_um += libm::round(meters * 1e6) as i128;
        self.n += 1;
    }

    /// Rebuilds a sum from a published mean and count.
    pub fn from_mean(mean: f64, n: u64) -> Self {
        DistanceSum {
            sum_um: libm::round(mean * 1e6) as i128 * n as i128,
            n,
        }
    }

    pub fn combine(&mut self, other: DistanceSum) {
        self.sum_um += other.sum_um;
        self.n += other.n;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Arithmetic mean in meters; `None` for an empty sum.
    pub fn mean(&self) -> Option<f64> {
        if self.n == 0 {
            None
        } else {
            Some(self.sum_um as f64 / 1e6 / self.n as f64)
        }
    }
}

/// Mean max-distance from home per home cell for one date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomeDistanceFrame {
    pub date: NaiveDate,
    pub cells: BTreeMap<KmCell, DistanceSum>,
}

impl HomeDistanceFrame {
    pub fn empty(date: NaiveDate) -> Self {
        HomeDistanceFrame {
            date,
            cells: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, rec: &MaxDistanceRecord) {
        self.cells.entry(rec.origin_cell).or_default().add(rec.max_dist);
    }

    /// Combined sum over the cells accepted by `keep`.
    pub fn pooled<F: Fn(&KmCell) -> bool>(&self, keep: F) -> DistanceSum {
        let mut acc = DistanceSum::default();
        for (cell, s) in &self.cells {
            if keep(cell) {
                acc.combine(*s);
            }
        }
        acc
    }

    pub fn merge(&mut self, other: &HomeDistanceFrame) -> Result<(), GridError> {
        if self.date != other.date {
            return Err(GridError::DateMismatch(self.date, other.date));
        }
        for (cell, s) in &other.cells {
            self.cells.entry(*cell).or_default().combine(*s);
        }
        Ok(())
    }
}

/// Per origin cell mean and count of the records dated `date`.
pub fn aggregate_home_distance(records: &[MaxDistanceRecord], date: NaiveDate) -> HomeDistanceFrame {
    let mut frame = HomeDistanceFrame::empty(date);
    for rec in records.iter().filter(|r| r.date == date) {
        frame.add(rec);
    }
    frame
}

/// Adds per-cell counts of same-hour frames.
pub fn merge_frames(frames: &[GridFrame]) -> Result<GridFrame, GridError> {
    let Some(first) = frames.first() else {
        return Err(GridError::NoFrames);
    };
    let mut out = GridFrame::empty(first.bucket);
    for f in frames {
        if f.bucket != out.bucket {
            return Err(GridError::BucketMismatch(out.bucket, f.bucket));
        }
        for (cell, n) in &f.cells {
            *out.cells.entry(*cell).or_insert(0) += n;
        }
    }
    Ok(out)
}

/// Everything one shard of phones contributes to the grid outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShardAggregate {
    phones: Vec<PhoneId>,
    pub presence: PresenceGrid,
    pub home_distance: BTreeMap<NaiveDate, HomeDistanceFrame>,
    /// Phones without night-rest service.
    pub homeless: BTreeMap<NaiveDate, u64>,
}

impl ShardAggregate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phones(&self) -> &[PhoneId] {
        &self.phones
    }

    /// Adds presence for `day` and, when known, its max-distance record.
    pub fn add_phone(
        &mut self,
        day: &PhoneDay,
        towers: &TowerTable,
        record: Option<&MaxDistanceRecord>,
    ) -> Result<(), GridError> {
        self.presence.add_phone(day, towers)?;
        match record {
            Some(rec) => self
                .home_distance
                .entry(rec.date)
                .or_insert_with(|| HomeDistanceFrame::empty(rec.date))
                .add(rec),
            None => *self.homeless.entry(day.date()).or_insert(0) += 1,
        }
        self.phones.push(day.phone().clone());
        Ok(())
    }

    /// Folds `other` into `self`; fails if both saw the same phone.
    pub fn merge(mut self, mut other: ShardAggregate) -> Result<ShardAggregate, GridError> {
        self.phones.sort_unstable();
        other.phones.sort_unstable();
        if let Some(dup) = first_common(&self.phones, &other.phones) {
            return Err(GridError::DuplicatePhone(dup.clone()));
        }
        let mut phones = Vec::with_capacity(self.phones.len() + other.phones.len());
        phones.append(&mut self.phones);
        phones.append(&mut other.phones);
        self.phones = phones;
        self.presence.merge(other.presence);
        for (date, frame) in other.home_distance {
            match self.home_distance.get_mut(&date) {
                Some(dst) => dst.merge(&frame)?,
                None => {
                    self.home_distance.insert(date, frame);
                }
            }
        }
        for (date, n) in other.homeless {
            *self.homeless.entry(date).or_insert(0) += n;
        }
        Ok(self)
    }
}

fn first_common<'a>(a: &'a [PhoneId], b: &[PhoneId]) -> Option<&'a PhoneId> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => return Some(&a[i]),
        }
    }
    None
}
