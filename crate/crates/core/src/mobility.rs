//! Per-phone trajectory reconstruction and home inference.
//!
//! A phone is placed at its first serving tower. Each time service switches
//! to another tower the estimate moves half-way from the previous estimate
//! towards the new tower; records on the same tower leave it in place. Every
//! service record stands for one 5-minute slot at the current estimate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::NaiveDate;
use thiserror::Error;

use crate::geo::{euclid, GeoError, KmCell, PlanarPoint};
use crate::time::{ClockWindow, Timestamp, SLOT_MINUTES};

/// Longest time span a single phone identifier may cover, in minutes.
pub const MAX_TRACE_MINUTES: i32 = 24 * 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MobilityError {
    #[error("phone {0} has no service records")]
    Empty(PhoneId),
    #[error("phone {phone} is traced for {minutes} minutes, more than the 24 hour cap")]
    SpanExceeded { phone: PhoneId, minutes: i32 },
    #[error("tower index {0} is not in the tower table")]
    UnknownTower(u32),
    #[error("phone {0} has no home location")]
    NoHome(PhoneId),
    #[error("home belongs to phone {home}, trace to phone {trace}")]
    PhoneMismatch { home: PhoneId, trace: PhoneId },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Opaque, pre-anonymized, daily-scoped phone identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhoneId(pub String);

impl fmt::Display for PhoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PhoneId {
    fn from(s: &str) -> Self {
        PhoneId(String::from(s))
    }
}

/// Dense index into a [`TowerTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TowerId(pub u32);

/// Tower positions addressed by [`TowerId`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TowerTable {
    sites: Vec<PlanarPoint>,
}

impl TowerTable {
    pub fn new(sites: Vec<PlanarPoint>) -> Self {
        TowerTable { sites }
    }

    pub fn push(&mut self, p: PlanarPoint) -> TowerId {
        self.sites.push(p);
        TowerId(self.sites.len() as u32 - 1)
    }

    pub fn get(&self, id: TowerId) -> Result<PlanarPoint, MobilityError> {
        self.sites
            .get(id.0 as usize)
            .copied()
            .ok_or(MobilityError::UnknownTower(id.0))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[PlanarPoint] {
        &self.sites
    }
}

/// One service record: the phone was served by `tower` in the slot starting at `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ping {
    pub at: Timestamp,
    pub tower: TowerId,
}

/// All service records of one phone identifier, time ordered, spanning at
/// most 24 hours.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneDay {
    phone: PhoneId,
    pings: Vec<Ping>,
}

impl PhoneDay {
    /// Sorts and deduplicates the records and enforces the 24 hour cap.
    ///
    /// Records sharing a timestamp are collapsed to the one with the lowest
    /// tower index, so input order never changes the result.
    pub fn new(phone: PhoneId, mut pings: Vec<Ping>) -> Result<Self, MobilityError> {
        if pings.is_empty() {
            return Err(MobilityError::Empty(phone));
        }
        pings.sort_unstable();
        pings.dedup_by_key(|p| p.at);
        let span = pings[pings.len() - 1].at.minutes() - pings[0].at.minutes();
        if span > MAX_TRACE_MINUTES {
            return Err(MobilityError::SpanExceeded {
                phone,
                minutes: span,
            });
        }
        Ok(PhoneDay { phone, pings })
    }

    pub fn phone(&self) -> &PhoneId {
        &self.phone
    }

    pub fn pings(&self) -> &[Ping] {
        &self.pings
    }

    /// Calendar date of the first record.
    pub fn date(&self) -> NaiveDate {
        self.pings[0].at.date()
    }

    pub fn span_minutes(&self) -> i32 {
        self.pings[self.pings.len() - 1].at.minutes() - self.pings[0].at.minutes()
    }
}

/// The phone's estimated position over a run of records on one tower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    /// Start of the first slot served at this estimate.
    pub start: Timestamp,
    /// Start of the last slot served at this estimate.
    pub last: Timestamp,
    pub point: PlanarPoint,
    /// Minutes of service, five per record.
    pub duration_min: u32,
}

/// Half-way position of every record in `day`, in time order.
pub fn halfway_track<'a>(
    day: &'a PhoneDay,
    towers: &'a TowerTable,
) -> impl Iterator<Item = Result<(Timestamp, PlanarPoint), MobilityError>> + 'a {
    let mut state: Option<(TowerId, PlanarPoint)> = None;
    day.pings.iter().map(move |ping| {
        let point = match state {
            Some((tower, est)) if tower == ping.tower => est,
            Some((_, est)) => est.halfway_to(towers.get(ping.tower)?),
            None => towers.get(ping.tower)?,
        };
        state = Some((ping.tower, point));
        Ok((ping.at, point))
    })
}

/// Collapses the half-way track into one estimate per run of records on the
/// same tower.
///
/// Towers `(0,0) -> (1000,0) -> (1000,1000)` give estimates `(0,0)`,
/// `(500,0)` and `(750,500)`.
pub fn halfway_positions(
    day: &PhoneDay,
    towers: &TowerTable,
) -> Result<Vec<PositionEstimate>, MobilityError> {
    let mut out: Vec<PositionEstimate> = Vec::new();
    let mut prev_tower = None;
    for (ping, step) in day.pings.iter().zip(halfway_track(day, towers)) {
        let (at, point) = step?;
        match out.last_mut() {
            Some(est) if prev_tower == Some(ping.tower) => {
                est.last = at;
                est.duration_min += SLOT_MINUTES as u32;
            }
            _ => out.push(PositionEstimate {
                start: at,
                last: at,
                point,
                duration_min: SLOT_MINUTES as u32,
            }),
        }
        prev_tower = Some(ping.tower);
    }
    Ok(out)
}

/// Night-rest origin of a phone.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeLocation {
    pub phone: PhoneId,
    /// Duration weighted mean position inside the night window.
    pub origin: PlanarPoint,
    pub origin_cell: KmCell,
}

/// Duration-weighted mean of the half-way estimates served inside `window`.
///
/// Returns `Ok(None)` when the phone has no service inside the window;
/// records straddling a window edge count only their in-window minutes.
pub fn infer_home(
    day: &PhoneDay,
    towers: &TowerTable,
    window: ClockWindow,
) -> Result<Option<HomeLocation>, MobilityError> {
    let mut wsum = 0u64;
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for step in halfway_track(day, towers) {
        let (at, p) = step?;
        let w = window.overlap_minutes(at);
        if w > 0 {
            wsum += w as u64;
            sx += p.x * w as f64;
            sy += p.y * w as f64;
        }
    }
    if wsum == 0 {
        return Ok(None);
    }
    let origin = PlanarPoint::new(sx / wsum as f64, sy / wsum as f64);
    Ok(Some(HomeLocation {
        phone: day.phone.clone(),
        origin,
        origin_cell: KmCell::containing(origin)?,
    }))
}

/// Furthest distance a phone was estimated from its origin during its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxDistanceRecord {
    pub phone: PhoneId,
    pub date: NaiveDate,
    pub origin_cell: KmCell,
    pub max_dist: f64,
}

/// Maximum Euclidean distance between any half-way estimate of the day and
/// the exact (not cell-snapped) origin.
pub fn max_distance_from_home(
    day: &PhoneDay,
    home: Option<&HomeLocation>,
    towers: &TowerTable,
) -> Result<MaxDistanceRecord, MobilityError> {
    let home = home.ok_or_else(|| MobilityError::NoHome(day.phone.clone()))?;
    if home.phone != day.phone {
        return Err(MobilityError::PhoneMismatch {
            home: home.phone.clone(),
            trace: day.phone.clone(),
        });
    }
    let mut max_dist = 0.0f64;
    for step in halfway_track(day, towers) {
        let (_, p) = step?;
        max_dist = max_dist.max(euclid(p, home.origin));
    }
    Ok(MaxDistanceRecord {
        phone: day.phone.clone(),
        date: day.date(),
        origin_cell: home.origin_cell,
        max_dist,
    })
}

/// Home and max-distance of one phone; `None` when no night service exists.
pub fn summarize_phone(
    day: &PhoneDay,
    towers: &TowerTable,
    window: ClockWindow,
) -> Result<Option<(HomeLocation, MaxDistanceRecord)>, MobilityError> {
    match infer_home(day, towers, window)? {
        Some(home) => {
            let rec = max_distance_from_home(day, Some(&home), towers)?;
            Ok(Some((home, rec)))
        }
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 16).unwrap()
    }

    fn at(h: u32, m: u32) -> Timestamp {
        Timestamp::from_date_hm(date(), h, m).unwrap()
    }

    fn table(points: &[(f64, f64)]) -> TowerTable {
        TowerTable::new(points.iter().map(|&(x, y)| PlanarPoint::new(x, y)).collect())
    }

    fn day(pings: &[(u32, u32, u32)]) -> PhoneDay {
        let pings = pings
            .iter()
            .map(|&(h, m, t)| Ping { at: at(h, m), tower: TowerId(t) })
            .collect();
        PhoneDay::new(PhoneId::from("p1"), pings).unwrap()
    }

    fn points(est: &[PositionEstimate]) -> Vec<(f64, f64)> {
        est.iter().map(|e| (e.point.x, e.point.y)).collect()
    }

    /// Step-by-step replay of the half-way recursion over tower switches only.
    fn oracle_halfway(seq: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut cur: Option<(f64, f64)> = None;
        let mut last_tower: Option<(f64, f64)> = None;
        for &t in seq {
            if last_tower == Some(t) {
                continue;
            }
            let next = match cur {
                None => t,
                Some((x, y)) => ((x + t.0) / 2.0, (y + t.1) / 2.0),
            };
            out.push(next);
            cur = Some(next);
            last_tower = Some(t);
        }
        out
    }

    #[test]
    fn halfway_three_towers() {
        let towers = table(&[(0.0, 0.0), (1000.0, 0.0), (1000.0, 1000.0)]);
        let d = day(&[(9, 0, 0), (9, 5, 1), (9, 10, 2)]);
        let est = halfway_positions(&d, &towers).unwrap();
        assert_eq!(points(&est), vec![(0.0, 0.0), (500.0, 0.0), (750.0, 500.0)]);
    }

    #[test]
    fn halfway_single_tower_all_day() {
        let towers = table(&[(3210.0, 480.0)]);
        let pings: Vec<_> = (0..288).map(|i| (i / 12, (i % 12) * 5, 0)).collect();
        let d = day(&pings);
        let est = halfway_positions(&d, &towers).unwrap();
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].point, PlanarPoint::new(3210.0, 480.0));
        assert_eq!(est[0].duration_min, 24 * 60);
        assert_eq!(est[0].start, at(0, 0));
        assert_eq!(est[0].last, at(23, 55));
    }

    #[test]
    fn halfway_oscillation_matches_oracle() {
        let seq = [(0.0, 0.0), (1000.0, 0.0), (0.0, 0.0)];
        let expected = oracle_halfway(&seq);
        assert_eq!(expected, vec![(0.0, 0.0), (500.0, 0.0), (250.0, 0.0)]);
        let towers = table(&seq[..2]);
        let d = day(&[(9, 0, 0), (9, 5, 1), (9, 10, 0)]);
        assert_eq!(points(&halfway_positions(&d, &towers).unwrap()), expected);
    }

    #[test]
    fn same_tower_records_extend_duration() {
        let towers = table(&[(0.0, 0.0), (1000.0, 0.0)]);
        let d = day(&[(9, 0, 0), (9, 5, 0), (9, 10, 1), (9, 15, 1), (9, 20, 1)]);
        let est = halfway_positions(&d, &towers).unwrap();
        assert_eq!(est.len(), 2);
        assert_eq!(est[0].duration_min, 10);
        assert_eq!(est[1].duration_min, 15);
        assert_eq!(est[1].start, at(9, 10));
    }

    #[test]
    fn empty_and_overlong_traces_are_rejected() {
        assert!(matches!(
            PhoneDay::new(PhoneId::from("x"), vec![]),
            Err(MobilityError::Empty(_))
        ));
        let d0 = Timestamp::from_date_hm(date(), 0, 0).unwrap();
        let d1 = Timestamp::from_date_hm(date().succ_opt().unwrap(), 6, 0).unwrap();
        let err = PhoneDay::new(
            PhoneId::from("x"),
            vec![Ping { at: d0, tower: TowerId(0) }, Ping { at: d1, tower: TowerId(0) }],
        )
        .unwrap_err();
        assert!(matches!(err, MobilityError::SpanExceeded { minutes: 1800, .. }));
        let d24 = Timestamp::from_date_hm(date().succ_opt().unwrap(), 0, 0).unwrap();
        assert!(PhoneDay::new(
            PhoneId::from("x"),
            vec![Ping { at: d0, tower: TowerId(0) }, Ping { at: d24, tower: TowerId(0) }],
        )
        .is_ok());
    }

    #[test]
    fn unknown_tower_is_an_error() {
        let towers = table(&[(0.0, 0.0)]);
        let d = day(&[(9, 0, 0), (9, 5, 7)]);
        assert_eq!(halfway_positions(&d, &towers), Err(MobilityError::UnknownTower(7)));
    }

    #[test]
    fn home_weighted_by_duration() {
        // (0,0) for 60 minutes then (2000,0) for 180 minutes inside the window
        let towers = table(&[(0.0, 0.0), (4000.0, 0.0)]);
        let mut pings = vec![];
        for i in 0..12 {
            pings.push((3, i * 5, 0));
        }
        for i in 0..36 {
            let m = 4 * 60 + i * 5;
            pings.push((m / 60, m % 60, 1));
        }
        let d = day(&pings);
        let home = infer_home(&d, &towers, ClockWindow::night_rest()).unwrap().unwrap();
        assert_eq!(home.origin, PlanarPoint::new(1500.0, 0.0));
        assert_eq!(home.origin_cell, KmCell::new(1500, 500).unwrap());
    }

    #[test]
    fn home_single_estimate() {
        let towers = table(&[(3210.0, 480.0)]);
        let d = day(&[(4, 0, 0)]);
        let home = infer_home(&d, &towers, ClockWindow::night_rest()).unwrap().unwrap();
        assert_eq!(home.origin, PlanarPoint::new(3210.0, 480.0));
        assert_eq!(home.origin_cell, KmCell::new(3500, 500).unwrap());
    }

    #[test]
    fn home_undefined_without_night_service() {
        let towers = table(&[(0.0, 0.0)]);
        let d = day(&[(2, 55, 0), (7, 0, 0), (12, 0, 0)]);
        assert_eq!(infer_home(&d, &towers, ClockWindow::night_rest()).unwrap(), None);
    }

    #[test]
    fn home_counts_only_in_window_minutes() {
        // 06:50 and 06:55 on tower 0 are inside, 07:00 and 07:05 are not.
        let towers = table(&[(0.0, 0.0), (1000.0, 0.0)]);
        let d = day(&[(6, 45, 1), (6, 50, 0), (6, 55, 0), (7, 0, 0), (7, 5, 0)]);
        let home = infer_home(&d, &towers, ClockWindow::night_rest()).unwrap().unwrap();
        // 5 min at (1000,0), 10 min at (500,0)
        assert!((home.origin.x - 2000.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn max_distance_examples() {
        let towers = table(&[(0.0, 0.0), (300.0, 400.0)]);
        let d = day(&[(4, 0, 0), (9, 0, 1), (9, 5, 1)]);
        let home = HomeLocation {
            phone: PhoneId::from("p1"),
            origin: PlanarPoint::new(0.0, 0.0),
            origin_cell: KmCell::new(500, 500).unwrap(),
        };
        // the estimate after switching is the midpoint (150, 200), so use a direct tower start
        let rec = max_distance_from_home(&d, Some(&home), &towers).unwrap();
        assert_eq!(rec.max_dist, 250.0);

        let towers = table(&[(0.0, 0.0), (1000.0, 0.0), (1000.0, 1000.0)]);
        let d = day(&[(4, 0, 0), (9, 0, 1), (9, 5, 2)]);
        let rec = max_distance_from_home(&d, Some(&home), &towers).unwrap();
        let expected = [(0.0f64, 0.0f64), (500.0, 0.0), (750.0, 500.0)]
            .iter()
            .map(|(x, y)| libm::sqrt(x * x + y * y))
            .fold(0.0, f64::max);
        assert_eq!(rec.max_dist, expected);
        assert!((rec.max_dist - 901.387818866).abs() < 1e-6);

        let d = day(&[(4, 0, 0), (9, 0, 0)]);
        assert_eq!(max_distance_from_home(&d, Some(&home), &towers).unwrap().max_dist, 0.0);
    }

    #[test]
    fn max_distance_three_four_five() {
        let towers = table(&[(300.0, 400.0)]);
        let d = day(&[(9, 0, 0)]);
        let home = HomeLocation {
            phone: PhoneId::from("p1"),
            origin: PlanarPoint::new(0.0, 0.0),
            origin_cell: KmCell::new(500, 500).unwrap(),
        };
        assert_eq!(max_distance_from_home(&d, Some(&home), &towers).unwrap().max_dist, 500.0);
    }

    #[test]
    fn max_distance_requires_home() {
        let towers = table(&[(0.0, 0.0)]);
        let d = day(&[(9, 0, 0)]);
        assert!(matches!(
            max_distance_from_home(&d, None, &towers),
            Err(MobilityError::NoHome(_))
        ));
        let other = HomeLocation {
            phone: PhoneId::from("p2"),
            origin: PlanarPoint::new(0.0, 0.0),
            origin_cell: KmCell::new(500, 500).unwrap(),
        };
        assert!(matches!(
            max_distance_from_home(&d, Some(&other), &towers),
            Err(MobilityError::PhoneMismatch { .. })
        ));
    }

    fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    }

    /// Andrew's monotone chain, counter-clockwise.
    fn hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        if pts.len() < 3 {
            return pts;
        }
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<(f64, f64)> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower
    }

    fn inside_hull(h: &[(f64, f64)], p: (f64, f64), tol: f64) -> bool {
        match h.len() {
            0 => false,
            1 => (h[0].0 - p.0).abs() <= tol && (h[0].1 - p.1).abs() <= tol,
            2 => {
                let (a, b) = (h[0], h[1]);
                let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                (cross(a, b, p) / len).abs() <= tol
            }
            n => (0..n).all(|i| {
                let (a, b) = (h[i], h[(i + 1) % n]);
                let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                cross(a, b, p) / len >= -tol
            }),
        }
    }

    proptest! {
        #[test]
        fn estimates_stay_in_tower_hull(
            sites in proptest::collection::vec((0.0f64..50_000.0, 0.0f64..50_000.0), 1..8),
            seq in proptest::collection::vec(0usize..8, 1..60),
        ) {
            let towers = table(&sites);
            let pings: Vec<Ping> = seq
                .iter()
                .enumerate()
                .map(|(i, &t)| Ping { at: at(0, 0).add_minutes(5 * i as i32), tower: TowerId((t % sites.len()) as u32) })
                .collect();
            let d = PhoneDay::new(PhoneId::from("p"), pings).unwrap();
            let used: Vec<(f64, f64)> = d.pings().iter().map(|p| sites[p.tower.0 as usize]).collect();
            let h = hull(used);
            for e in halfway_positions(&d, &towers).unwrap() {
                prop_assert!(inside_hull(&h, (e.point.x, e.point.y), 1e-6));
            }
        }

        #[test]
        fn home_ignores_daytime_records(
            night in proptest::collection::vec(0u32..4, 1..48),
            daytime in proptest::collection::vec(0u32..4, 0..60),
        ) {
            let towers = table(&[(0.0, 0.0), (2000.0, 0.0), (2000.0, 3000.0), (9000.0, 100.0)]);
            let night_pings: Vec<Ping> = night.iter().enumerate()
                .map(|(i, &t)| Ping { at: at(3, 0).add_minutes(5 * i as i32), tower: TowerId(t) })
                .collect();
            let base = PhoneDay::new(PhoneId::from("p"), night_pings.clone()).unwrap();
            let mut all = night_pings;
            all.extend(daytime.iter().enumerate()
                .map(|(i, &t)| Ping { at: at(7, 0).add_minutes(5 * i as i32), tower: TowerId(t) }));
            let extended = PhoneDay::new(PhoneId::from("p"), all).unwrap();
            let w = ClockWindow::night_rest();
            prop_assert_eq!(infer_home(&base, &towers, w).unwrap(), infer_home(&extended, &towers, w).unwrap());
        }

        #[test]
        fn max_distance_translation_invariant(
            sites in proptest::collection::vec((0.0f64..20_000.0, 0.0f64..20_000.0), 2..6),
            seq in proptest::collection::vec(0usize..6, 1..40),
            dx in 0.0f64..100_000.0, dy in 0.0f64..100_000.0,
        ) {
            let pings: Vec<Ping> = seq.iter().enumerate()
                .map(|(i, &t)| Ping { at: at(3, 0).add_minutes(5 * i as i32), tower: TowerId((t % sites.len()) as u32) })
                .collect();
            let d = PhoneDay::new(PhoneId::from("p"), pings).unwrap();
            let a = table(&sites);
            let shifted: Vec<(f64, f64)> = sites.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
            let b = table(&shifted);
            let w = ClockWindow::night_rest();
            let (_, ra) = summarize_phone(&d, &a, w).unwrap().unwrap();
            let (_, rb) = summarize_phone(&d, &b, w).unwrap().unwrap();
            prop_assert!((ra.max_dist - rb.max_dist).abs() <= 1e-6 * (1.0 + ra.max_dist));
        }

        #[test]
        fn duplicate_order_does_not_matter(
            seq in proptest::collection::vec((0i32..30, 0u32..3), 1..40),
            rot in 0usize..40,
        ) {
            let towers = table(&[(0.0, 0.0), (1500.0, 0.0), (700.0, 2500.0)]);
            let pings: Vec<Ping> = seq.iter()
                .map(|&(slot, t)| Ping { at: at(3, 0).add_minutes(5 * slot), tower: TowerId(t) })
                .collect();
            let mut rotated = pings.clone();
            let len = rotated.len();
            rotated.rotate_left(rot % len);
            rotated.reverse();
            let a = PhoneDay::new(PhoneId::from("p"), pings).unwrap();
            let b = PhoneDay::new(PhoneId::from("p"), rotated).unwrap();
            prop_assert_eq!(halfway_positions(&a, &towers).unwrap(), halfway_positions(&b, &towers).unwrap());
        }
    }
}
