use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use mobiscope_core::gridagg::{DistanceSum, PresenceGrid};
use mobiscope_core::mobility::{PhoneDay, PhoneId, Ping, TowerId, TowerTable};
use mobiscope_core::{HourBucket, PlanarPoint, Timestamp};
use proptest::prelude::*;

fn towers() -> TowerTable {
    TowerTable::new((0..16).map(|k| PlanarPoint::new(250.0 + 700.0 * (k % 4) as f64, 400.0 + 900.0 * (k / 4) as f64)).collect())
}

fn phone_day(id: usize) -> impl Strategy<Value = PhoneDay> {
    proptest::collection::vec((0i32..288, 0u32..16), 1..40).prop_map(move |pings| {
        let start = Timestamp::from_date_hm(NaiveDate::from_ymd_opt(2020, 3, 2).unwrap(), 0, 0).unwrap();
        let pings = pings.into_iter().map(|(s, t)| Ping { at: start.add_minutes(5 * s), tower: TowerId(t) }).collect();
        PhoneDay::new(PhoneId(format!("p{id}")), pings).unwrap()
    })
}

fn phones() -> impl Strategy<Value = Vec<PhoneDay>> {
    (1usize..12).prop_flat_map(|n| (0..n).map(phone_day).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cell_counts_cover_every_observed_phone(days in phones()) {
        let table = towers();
        let mut grid = PresenceGrid::new();
        let mut seen: BTreeMap<HourBucket, BTreeSet<&str>> = BTreeMap::new();
        for d in &days {
            grid.add_phone(d, &table).unwrap();
            for p in d.pings() {
                seen.entry(HourBucket::of(p.at)).or_default().insert(&d.phone().0);
            }
        }
        let frames = grid.frames();
        prop_assert_eq!(frames.len(), seen.len());
        for f in frames {
            let distinct = seen[&f.bucket].len() as u64;
            prop_assert!(f.total() >= distinct);
            prop_assert!(f.cells.values().all(|&c| c as u64 <= distinct));
        }
    }

    #[test]
    fn distance_sums_merge_in_any_order(
        parts in proptest::collection::vec(proptest::collection::vec(0.0f64..50_000.0, 0..20), 1..6),
    ) {
        let sums: Vec<DistanceSum> = parts
            .iter()
            .map(|p| {
                let mut s = DistanceSum::default();
                p.iter().for_each(|&d| s.add(d));
                s
            })
            .collect();
        let mut forward = DistanceSum::default();
        sums.iter().for_each(|s| forward.combine(*s));
        let mut backward = DistanceSum::default();
        sums.iter().rev().for_each(|s| backward.combine(*s));
        prop_assert_eq!(forward, backward);
        let all: Vec<f64> = parts.concat();
        prop_assert_eq!(forward.n(), all.len() as u64);
        if let Some(m) = forward.mean() {
            let naive = all.iter().sum::<f64>() / all.len() as f64;
            prop_assert!((m - naive).abs() <= 1e-5);
        }
    }
}
