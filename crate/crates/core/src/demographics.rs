//! Bespoke k-nearest-neighbour population context.
//!
//! Shares are computed around every populated location from the `k`
//! nearest in-scope persons, then each km cell takes the shares of the
//! populated location nearest to its midpoint. Neighbours are persons, not
//! locations: everyone sharing a coordinate is a separate candidate, and
//! ties at the k-th distance go to the lower input index.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::geo::{KmCell, PlanarPoint};
use crate::knn::PointIndex;

/// Age from which a person belongs to the adult scope.
pub const ADULT_AGE: u32 = 18;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemographicsError {
    #[error("{scope} population has {have} persons, fewer than k = {k}")]
    TooFewNeighbors { scope: Scope, k: usize, have: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("poverty reference population is empty")]
    EmptyReference,
    #[error("population is empty")]
    EmptyPopulation,
}

/// One resident from the geocoded population register.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonRecord {
    pub location: PlanarPoint,
    pub age: u32,
    pub minority: bool,
    pub tertiary_edu: bool,
    pub disposable_income: f64,
}

impl PersonRecord {
    pub fn adult(&self) -> bool {
        self.age >= ADULT_AGE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Full,
    Adult,
}

impl Scope {
    pub fn admits(&self, p: &PersonRecord) -> bool {
        match self {
            Scope::Full => true,
            Scope::Adult => p.adult(),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Full => "full",
            Scope::Adult => "adult",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    Minority,
    HighEdu,
    Poor,
    Risk70,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [Attribute::Minority, Attribute::HighEdu, Attribute::Poor, Attribute::Risk70];

    pub fn as_str(&self) -> &'static str {
        match self {
            Attribute::Minority => "minority",
            Attribute::HighEdu => "high_edu",
            Attribute::Poor => "poor",
            Attribute::Risk70 => "risk70",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predicate {
    Minority,
    TertiaryEdu,
    IncomeAtMost(f64),
    AgeAtLeast(u32),
}

impl Predicate {
    pub fn test(&self, p: &PersonRecord) -> bool {
        match *self {
            Predicate::Minority => p.minority,
            Predicate::TertiaryEdu => p.tertiary_edu,
            Predicate::IncomeAtMost(t) => p.disposable_income <= t,
            Predicate::AgeAtLeast(a) => p.age >= a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributeSpec {
    pub attribute: Attribute,
    pub scope: Scope,
    pub k: usize,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IncomeStat {
    #[default]
    Mean,
    Median,
}

/// How the relative-poverty income threshold is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovertyRule {
    pub stat: IncomeStat,
    /// Inclusive age range of the reference population.
    pub ref_ages: (u32, u32),
    pub fraction: f64,
}

impl Default for PovertyRule {
    fn default() -> Self {
        PovertyRule {
            stat: IncomeStat::Mean,
            ref_ages: (16, 74),
            fraction: 0.6,
        }
    }
}

impl PovertyRule {
    pub fn threshold(&self, population: &[PersonRecord]) -> Result<f64, DemographicsError> {
        let (lo, hi) = self.ref_ages;
        let mut incomes: Vec<f64> = population
            .iter()
            .filter(|p| p.age >= lo && p.age <= hi)
            .map(|p| p.disposable_income)
            .collect();
        if incomes.is_empty() {
            return Err(DemographicsError::EmptyReference);
        }
        let centre = match self.stat {
            IncomeStat::Mean => incomes.iter().sum::<f64>() / incomes.len() as f64,
            IncomeStat::Median => {
                incomes.sort_by(f64::total_cmp);
                let m = incomes.len() / 2;
                if incomes.len() % 2 == 1 {
                    incomes[m]
                } else {
                    (incomes[m - 1] + incomes[m]) / 2.0
                }
            }
        };
        Ok(self.fraction * centre)
    }
}

/// The four subgroup attributes: visible minority, tertiary education
/// (adults), relative poverty and age 70+.
pub fn attribute_predicates(
    population: &[PersonRecord],
    k: usize,
    poverty: &PovertyRule,
) -> Result<[AttributeSpec; 4], DemographicsError> {
    let threshold = poverty.threshold(population)?;
    Ok([
        AttributeSpec { attribute: Attribute::Minority, scope: Scope::Full, k, predicate: Predicate::Minority },
        AttributeSpec { attribute: Attribute::HighEdu, scope: Scope::Adult, k, predicate: Predicate::TertiaryEdu },
        AttributeSpec { attribute: Attribute::Poor, scope: Scope::Full, k, predicate: Predicate::IncomeAtMost(threshold) },
        AttributeSpec { attribute: Attribute::Risk70, scope: Scope::Full, k, predicate: Predicate::AgeAtLeast(70) },
    ])
}

/// Persons of one scope behind a spatial index; index order is input order.
#[derive(Debug, Clone)]
pub struct ScopedPopulation<'a> {
    scope: Scope,
    members: Vec<&'a PersonRecord>,
    index: PointIndex,
}

impl<'a> ScopedPopulation<'a> {
    pub fn new(population: &'a [PersonRecord], scope: Scope) -> Self {
        let members: Vec<&PersonRecord> = population.iter().filter(|p| scope.admits(p)).collect();
        let index = PointIndex::new(members.iter().map(|p| p.location).collect());
        ScopedPopulation { scope, members, index }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The `k` nearest members to `anchor`.
    pub fn nearest(&self, anchor: PlanarPoint, k: usize) -> Result<Vec<&'a PersonRecord>, DemographicsError> {
        if k == 0 {
            return Err(DemographicsError::ZeroK);
        }
        if self.members.len() < k {
            return Err(DemographicsError::TooFewNeighbors { scope: self.scope, k, have: self.members.len() });
        }
        Ok(self.index.nearest(anchor, k).iter().map(|n| self.members[n.index as usize]).collect())
    }

    pub fn share(&self, anchor: PlanarPoint, k: usize, predicate: &Predicate) -> Result<f64, DemographicsError> {
        let hits = self.nearest(anchor, k)?;
        Ok(hits.iter().filter(|p| predicate.test(p)).count() as f64 / k as f64)
    }
}

/// Fraction of the `spec.k` nearest in-scope persons satisfying the predicate.
pub fn knn_share(anchor: PlanarPoint, population: &[PersonRecord], spec: &AttributeSpec) -> Result<f64, DemographicsError> {
    ScopedPopulation::new(population, spec.scope).share(anchor, spec.k, &spec.predicate)
}

/// Shares assigned to one km cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicContext {
    pub cell: KmCell,
    pub shares: BTreeMap<Attribute, f64>,
    /// Distance from the midpoint to the populated location it inherited from.
    pub source_dist: f64,
    pub covered: bool,
}

/// Distinct person locations in `(x, y)` order.
pub fn populated_points(population: &[PersonRecord]) -> Vec<PlanarPoint> {
    let mut pts: Vec<PlanarPoint> = population.iter().map(|p| p.location).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    pts
}

/// Shares of every spec at each populated location, aligned with
/// [`populated_points`].
pub fn shares_at_points(
    points: &[PlanarPoint],
    population: &[PersonRecord],
    specs: &[AttributeSpec],
) -> Result<Vec<Vec<f64>>, DemographicsError> {
    let mut scoped: BTreeMap<Scope, ScopedPopulation> = BTreeMap::new();
    for s in specs {
        scoped.entry(s.scope).or_insert_with(|| ScopedPopulation::new(population, s.scope));
    }
    let mut out = Vec::with_capacity(points.len());
    for &p in points {
        let mut row = Vec::with_capacity(specs.len());
        // one query per (scope, k) group
        let mut cache: Vec<((Scope, usize), Vec<&PersonRecord>)> = Vec::new();
        for s in specs {
            let key = (s.scope, s.k);
            let hits = match cache.iter().position(|(k, _)| *k == key) {
                Some(i) => &cache[i].1,
                None => {
                    let hits = scoped[&s.scope].nearest(p, s.k)?;
                    cache.push((key, hits));
                    &cache[cache.len() - 1].1
                }
            };
            row.push(hits.iter().filter(|h| s.predicate.test(h)).count() as f64 / s.k as f64);
        }
        out.push(row);
    }
    Ok(out)
}

/// Two-step context: shares at populated locations, then nearest-location
/// join to each cell midpoint. Cells whose nearest location is farther than
/// `coverage_radius` are marked uncovered.
pub fn context_for_cells(
    cells: &[KmCell],
    population: &[PersonRecord],
    specs: &[AttributeSpec],
    coverage_radius: f64,
) -> Result<Vec<DemographicContext>, DemographicsError> {
    if population.is_empty() {
        return Err(DemographicsError::EmptyPopulation);
    }
    let points = populated_points(population);
    let shares = shares_at_points(&points, population, specs)?;
    let index = PointIndex::new(points);
    Ok(cells
        .iter()
        .map(|c| {
            let hit = index.nearest(c.midpoint(), 1)[0];
            let row = &shares[hit.index as usize];
            let dist = hit.dist();
            DemographicContext {
                cell: *c,
                shares: specs.iter().zip(row).map(|(s, v)| (s.attribute, *v)).collect(),
                source_dist: dist,
                covered: dist <= coverage_radius,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn person(x: f64, y: f64, age: u32, income: f64) -> PersonRecord {
        PersonRecord { location: PlanarPoint::new(x, y), age, minority: false, tertiary_edu: false, disposable_income: income }
    }

    fn spec(attribute: Attribute, k: usize, predicate: Predicate) -> AttributeSpec {
        AttributeSpec { attribute, scope: Scope::Full, k, predicate }
    }

    #[test]
    fn poverty_threshold_examples() {
        let pop: Vec<_> = [100.0; 4].iter().map(|&i| person(0.0, 0.0, 40, i)).collect();
        let specs = attribute_predicates(&pop, 4, &PovertyRule::default()).unwrap();
        assert_eq!(specs[2].predicate, Predicate::IncomeAtMost(60.0));
        assert_eq!(knn_share(PlanarPoint::new(0.0, 0.0), &pop, &specs[2]).unwrap(), 0.0);

        let pop: Vec<_> = [10.0, 10.0, 10.0, 70.0].iter().map(|&i| person(0.0, 0.0, 40, i)).collect();
        let specs = attribute_predicates(&pop, 4, &PovertyRule::default()).unwrap();
        assert_eq!(specs[2].predicate, Predicate::IncomeAtMost(15.0));
        assert_eq!(pop.iter().filter(|p| specs[2].predicate.test(p)).count(), 3);

        let median = PovertyRule { stat: IncomeStat::Median, ..PovertyRule::default() };
        assert_eq!(median.threshold(&pop).unwrap(), 6.0);

        let kids: Vec<_> = (0..3).map(|_| person(0.0, 0.0, 10, 1.0)).collect();
        assert_eq!(PovertyRule::default().threshold(&kids), Err(DemographicsError::EmptyReference));
    }

    #[test]
    fn risk_group_boundary() {
        let pop: Vec<_> = [69, 70, 71].iter().map(|&a| person(0.0, 0.0, a, 1.0)).collect();
        let p = Predicate::AgeAtLeast(70);
        let flags: Vec<bool> = pop.iter().map(|x| p.test(x)).collect();
        assert_eq!(flags, vec![false, true, true]);
    }

    #[test]
    fn all_satisfy_gives_one() {
        let pop: Vec<_> = (0..150).map(|i| person(i as f64, 0.0, 80, 1.0)).collect();
        let s = spec(Attribute::Risk70, 100, Predicate::AgeAtLeast(70));
        assert_eq!(knn_share(PlanarPoint::new(3.0, 3.0), &pop, &s).unwrap(), 1.0);
    }

    #[test]
    fn uniform_composition_share() {
        // every location hosts 10 persons, 3 of them minority
        let mut pop = vec![];
        for i in 0..20 {
            for j in 0..20 {
                for r in 0..10 {
                    let mut p = person(i as f64 * 100.0, j as f64 * 100.0, 30, 1.0);
                    p.minority = r < 3;
                    pop.push(p);
                }
            }
        }
        let s = spec(Attribute::Minority, 100, Predicate::Minority);
        for anchor in [(513.1, 707.3), (1001.7, 1488.9), (0.3, 0.9)] {
            let share = knn_share(PlanarPoint::new(anchor.0, anchor.1), &pop, &s).unwrap();
            assert_eq!(share, 0.3);
        }
        let big = spec(Attribute::Minority, 500, Predicate::Minority);
        assert_eq!(knn_share(PlanarPoint::new(913.1, 907.3), &pop, &big).unwrap(), 0.3);
    }

    #[test]
    fn adult_scope_and_too_few() {
        let mut pop: Vec<_> = (0..5).map(|i| person(i as f64, 0.0, 10, 1.0)).collect();
        pop.push(PersonRecord { tertiary_edu: true, ..person(100.0, 0.0, 30, 1.0) });
        let s = AttributeSpec { attribute: Attribute::HighEdu, scope: Scope::Adult, k: 1, predicate: Predicate::TertiaryEdu };
        assert_eq!(knn_share(PlanarPoint::new(0.0, 0.0), &pop, &s).unwrap(), 1.0);
        let s2 = AttributeSpec { k: 2, ..s };
        assert!(matches!(knn_share(PlanarPoint::new(0.0, 0.0), &pop, &s2), Err(DemographicsError::TooFewNeighbors { have: 1, .. })));
    }

    #[test]
    fn context_single_point() {
        let pop: Vec<_> = (0..10).map(|i| person(250.0, 250.0, 60 + i, 1.0)).collect();
        let s = spec(Attribute::Risk70, 10, Predicate::AgeAtLeast(70));
        let cells = [KmCell::from_index(0, 0), KmCell::from_index(3, 4)];
        let ctx = context_for_cells(&cells, &pop, &[s], 1500.0).unwrap();
        assert_eq!(ctx.len(), 2);
        assert!(ctx.iter().all(|c| c.shares[&Attribute::Risk70] == 0.0));
        assert!(ctx[0].covered && !ctx[1].covered);
    }

    #[test]
    fn context_nearest_assignment() {
        let mut pop = vec![];
        for _ in 0..5 {
            pop.push(person(600.0, 500.0, 20, 1.0));
            pop.push(person(5600.0, 500.0, 80, 1.0));
        }
        let s = spec(Attribute::Risk70, 5, Predicate::AgeAtLeast(70));
        let ctx = context_for_cells(&[KmCell::from_index(0, 0), KmCell::from_index(5, 0)], &pop, &[s], 1e9).unwrap();
        assert_eq!(ctx[0].shares[&Attribute::Risk70], 0.0);
        assert_eq!(ctx[1].shares[&Attribute::Risk70], 1.0);
        assert_eq!(context_for_cells(&[], &[], &[s], 1.0), Err(DemographicsError::EmptyPopulation));
    }
}
