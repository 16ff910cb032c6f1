//! Synthetic worlds with known answers.
//!
//! A scenario describes a rectangular km grid with two towers per cell,
//! groups of agents that sleep at home and commute to work on some dates,
//! and the resident and job populations. Generation writes the files the
//! pipeline reads plus the ground truth it should recover.
//!
//! Random draws follow a fixed contract so fixtures are byte-identical on
//! every platform. Every generator is ChaCha8 seeded with `seed_from_u64`:
//! static agent draws use `seed` with stream = agent, the draws of date `d`
//! use `seed + 1 + d` with stream = agent, residents `seed + 101` and jobs
//! `seed + 102` with stream = linear cell index.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mobiscope_core::demographics::PersonRecord;
use mobiscope_core::knn::PointIndex;
use mobiscope_core::{euclid, ClockWindow, KmCell, PlanarPoint, Timestamp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::config::Dates;
use crate::error::{Error, Result};
use crate::io::{write_table, GridHourlyRow, JobSite, Table, TowerRow, EVENTS_HEADER};

pub const SLOTS_PER_DAY: usize = 288;
/// Earliest departure, 07:00.
pub const DEPART_SLOT: usize = 84;
/// Commuters are at work by 09:00.
pub const ARRIVE_BY_SLOT: usize = 108;
/// Earliest return, 16:00.
pub const RETURN_SLOT: usize = 192;
/// Towers sit this far west and east of the cell midpoint.
pub const SECTOR_OFFSET_M: f64 = 250.0;
pub const TRAVEL_M_PER_SLOT: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub width_km: u32,
    pub height_km: u32,
    /// Towers only in cells whose indices are both multiples of the stride.
    #[serde(default = "one")]
    pub tower_stride: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    /// Chance that any one record is missing.
    pub drop_prob: f64,
    /// Chance that a record at home is served by the east tower.
    pub sector_switch_prob: f64,
    /// Departures are delayed by up to this many slots.
    pub depart_jitter_slots: u32,
}

impl Default for Noise {
    fn default() -> Self {
        Noise { drop_prob: 0.0, sector_switch_prob: 0.0, depart_jitter_slots: 6 }
    }
}

/// Cell-index rectangle `[x0, x1) x [y0, y1)`, written `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl From<[u32; 4]> for Rect {
    fn from(a: [u32; 4]) -> Self {
        Rect { x0: a[0], y0: a[1], x1: a[2], y1: a[3] }
    }
}

impl From<Rect> for [u32; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn contains(&self, i: u32, j: u32) -> bool {
        (self.x0..self.x1).contains(&i) && (self.y0..self.y1).contains(&j)
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn cells(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (self.x0..self.x1).flat_map(move |i| (self.y0..self.y1).map(move |j| (i, j)))
    }

    pub fn km_cells(&self) -> impl Iterator<Item = KmCell> + '_ {
        self.cells().map(|(i, j)| KmCell::from_index(i, j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Demography {
    pub minority: f64,
    pub tertiary: f64,
    /// Share of residents aged 70 or more.
    pub elderly: f64,
    pub income_median: f64,
    /// Log-scale spread of disposable income.
    pub income_spread: f64,
}

impl Default for Demography {
    fn default() -> Self {
        Demography { minority: 0.1, tertiary: 0.3, elderly: 0.15, income_median: 20_000.0, income_spread: 0.5 }
    }
}

/// Agents sharing a home area, a work area and an attendance schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Group {
    pub name: String,
    pub n_agents: u32,
    pub home: Rect,
    /// Stationary agents have no work area.
    #[serde(default)]
    pub work: Option<Rect>,
    /// Chance of going to work, in date order treated-pre, treated-post,
    /// control-pre, control-post.
    #[serde(default = "full_attendance")]
    pub attendance: [f64; 4],
    /// Residents per cell of the home area.
    #[serde(default)]
    pub residents_per_cell: u32,
    /// Jobs per cell of the work area.
    #[serde(default)]
    pub jobs_per_cell: u32,
    #[serde(default)]
    pub demography: Demography,
}

fn full_attendance() -> [f64; 4] {
    [1.0; 4]
}

impl Group {
    /// Percent change of mean max distance implied by the attendance rates.
    pub fn injected_pct(&self) -> Option<f64> {
        let a = self.attendance;
        (self.work.is_some() && a[0] > 0.0).then(|| 100.0 * ((a[1] - a[0]) - (a[3] - a[2])) / a[0])
    }
}

/// Residents and jobs of cells outside every group area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Background {
    pub residents_per_cell: u32,
    pub jobs_per_cell: u32,
    pub demography: Demography,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default)]
    pub dates: Dates,
    pub world: WorldSpec,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub groups: Vec<Group>,
    #[serde(default)]
    pub background: Background,
}

fn check_prob(what: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("{what} {p} is not in [0, 1]")));
    }
    Ok(())
}

fn check_demography(what: &str, d: &Demography) -> Result<()> {
    check_prob(&format!("{what} minority"), d.minority)?;
    check_prob(&format!("{what} tertiary"), d.tertiary)?;
    check_prob(&format!("{what} elderly"), d.elderly)?;
    if !(d.income_median > 0.0 && d.income_median.is_finite()) || !(d.income_spread >= 0.0 && d.income_spread.is_finite()) {
        return Err(Error::Config(format!("{what} income parameters must be positive and finite")));
    }
    Ok(())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn n_agents(&self) -> u32 {
        self.groups.iter().map(|g| g.n_agents).sum()
    }

    fn has_towers(&self, i: u32, j: u32) -> bool {
        i % self.world.tower_stride == 0 && j % self.world.tower_stride == 0
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        if w.width_km == 0 || w.height_km == 0 || w.tower_stride == 0 {
            return Err(Error::Config("world dimensions and tower stride must be positive".into()));
        }
        let dates = self.dates.as_array();
        for (a, da) in dates.iter().enumerate() {
            if dates[a + 1..].contains(da) {
                return Err(Error::Config(format!("date {da} appears twice")));
            }
        }
        check_prob("drop_prob", self.noise.drop_prob)?;
        check_prob("sector_switch_prob", self.noise.sector_switch_prob)?;
        let max_steps = (ARRIVE_BY_SLOT - DEPART_SLOT) as i64 - self.noise.depart_jitter_slots as i64;
        if max_steps < 1 {
            return Err(Error::Config("depart_jitter_slots leaves no time to commute".into()));
        }
        check_demography("background", &self.background.demography)?;
        let mut names = std::collections::BTreeSet::new();
        for g in &self.groups {
            if g.name.is_empty() || !names.insert(g.name.as_str()) {
                return Err(Error::Config(format!("group name {:?} is empty or repeated", g.name)));
            }
            for a in g.attendance {
                check_prob(&format!("group {} attendance", g.name), a)?;
            }
            check_demography(&format!("group {}", g.name), &g.demography)?;
            for (what, r) in std::iter::once(("home", &g.home)).chain(g.work.as_ref().map(|r| ("work", r))) {
                if r.is_empty() || r.x1 > w.width_km || r.y1 > w.height_km {
                    return Err(Error::Config(format!("group {} {what} area is empty or outside the world", g.name)));
                }
                if let Some((i, j)) = r.cells().find(|&(i, j)| !self.has_towers(i, j)) {
                    return Err(Error::Config(format!(
                        "tower layout too sparse: {what} cell ({i}, {j}) of group {} has no tower",
                        g.name
                    )));
                }
            }
            if let Some(wr) = &g.work {
                let span = |a0: u32, a1: u32, b0: u32, b1: u32| ((a1 - 1).abs_diff(b0)).max((b1 - 1).abs_diff(a0)) as f64 * 1000.0;
                let far = span(g.home.x0, g.home.x1, wr.x0, wr.x1).hypot(span(g.home.y0, g.home.y1, wr.y0, wr.y1));
                if far > max_steps as f64 * TRAVEL_M_PER_SLOT {
                    return Err(Error::Config(format!(
                        "group {} commutes up to {far} m, more than can be covered by 09:00",
                        g.name
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Towers

/// Two towers per tower-bearing cell: `c{i}-{j}a` west and `c{i}-{j}b` east
/// of the midpoint.
#[derive(Debug, Clone)]
pub struct TowerLayout {
    pub keys: Vec<String>,
    pub points: Vec<PlanarPoint>,
    cells: Vec<KmCell>,
    west: HashMap<(u32, u32), usize>,
    index: PointIndex,
}

impl TowerLayout {
    pub fn new(world: &WorldSpec) -> Self {
        let (mut keys, mut points, mut cells, mut west) = (Vec::new(), Vec::new(), Vec::new(), HashMap::new());
        for i in (0..world.width_km).step_by(world.tower_stride as usize) {
            for j in (0..world.height_km).step_by(world.tower_stride as usize) {
                let cell = KmCell::from_index(i, j);
                let mid = cell.midpoint();
                west.insert((i, j), keys.len());
                for (side, dx) in [("a", -SECTOR_OFFSET_M), ("b", SECTOR_OFFSET_M)] {
                    keys.push(format!("c{i}-{j}{side}"));
                    points.push(mid.translate(dx, 0.0));
                    cells.push(cell);
                }
            }
        }
        let index = PointIndex::new(points.clone());
        TowerLayout { keys, points, cells, west, index }
    }

    pub fn rows(&self) -> Vec<TowerRow> {
        self.keys
            .iter()
            .zip(&self.points)
            .map(|(k, p)| TowerRow { tower_id: k.clone(), x_m: p.x, y_m: p.y })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// West tower of a cell, if the cell has towers.
    pub fn west_of(&self, i: u32, j: u32) -> Option<usize> {
        self.west.get(&(i, j)).copied()
    }

    pub fn nearest(&self, p: PlanarPoint) -> usize {
        self.index.nearest(p, 1)[0].index as usize
    }

    pub fn cell(&self, tower: usize) -> KmCell {
        self.cells[tower]
    }
}

// ---------------------------------------------------------------------------
// Agents

#[derive(Debug, Clone)]
struct Agent {
    group: usize,
    home: PlanarPoint,
    home_tower: usize,
    work: Option<Commute>,
}

#[derive(Debug, Clone)]
struct Commute {
    west: usize,
    point: PlanarPoint,
    /// Intermediate positions and their serving towers, home to work.
    path: Vec<(PlanarPoint, usize)>,
}

fn agents(s: &Scenario, towers: &TowerLayout) -> Vec<Agent> {
    let mut out = Vec::with_capacity(s.n_agents() as usize);
    for (gi, g) in s.groups.iter().enumerate() {
        for _ in 0..g.n_agents {
            let id = out.len() as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(id);
            let hi = rng.random_range(g.home.x0..g.home.x1);
            let hj = rng.random_range(g.home.y0..g.home.y1);
            let home_tower = towers.west_of(hi, hj).expect("validated home cell");
            let home = towers.points[home_tower];
            let work = g.work.map(|w| {
                let wi = rng.random_range(w.x0..w.x1);
                let wj = rng.random_range(w.y0..w.y1);
                let west = towers.west_of(wi, wj).expect("validated work cell");
                let point = towers.points[west];
                let steps = (euclid(home, point) / TRAVEL_M_PER_SLOT).ceil().max(1.0) as usize;
                let path = (1..steps)
                    .map(|k| {
                        let f = k as f64 / steps as f64;
                        let p = PlanarPoint::new(home.x + (point.x - home.x) * f, home.y + (point.y - home.y) * f);
                        (p, towers.nearest(p))
                    })
                    .collect();
                Commute { west, point, path }
            });
            out.push(Agent { group: gi, home, home_tower, work });
        }
    }
    out
}

/// Opaque per-day phone id; distinct for every `(agent, date)`.
pub fn phone_id(seed: u64, agent: u32, date_idx: usize) -> String {
    let mut z = ((agent as u64) << 2 | date_idx as u64).wrapping_add(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    format!("{z:016x}")
}

/// Where an agent is and which tower serves it in one slot.
#[derive(Debug, Clone, Copy)]
struct SlotState {
    position: PlanarPoint,
    tower: usize,
}

/// The 288 slot states of one agent-day.
fn schedule(agent: &Agent, attend: bool, depart: usize, ret: usize, east: &[bool]) -> Vec<SlotState> {
    let home = |s: usize| SlotState { position: agent.home, tower: agent.home_tower + east[s] as usize };
    let mut out: Vec<SlotState> = (0..SLOTS_PER_DAY).map(home).collect();
    let Some(c) = agent.work.as_ref().filter(|_| attend) else {
        return out;
    };
    let arrive = depart + c.path.len();
    for (k, &(position, tower)) in c.path.iter().enumerate() {
        out[depart + k] = SlotState { position, tower };
        out[ret + k] = {
            let (position, tower) = c.path[c.path.len() - 1 - k];
            SlotState { position, tower }
        };
    }
    for s in arrive..ret {
        out[s] = SlotState { position: c.point, tower: c.west + (s - arrive) % 2 };
    }
    out
}

// ---------------------------------------------------------------------------
// Ground truth

/// What one agent did on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDay {
    pub agent: u32,
    pub group: String,
    pub phone_id: String,
    pub date: NaiveDate,
    pub home: PlanarPoint,
    pub home_cell: KmCell,
    pub attended: bool,
    /// At least one record inside the night window was emitted.
    pub night_service: bool,
    /// Furthest true position from home over the day.
    pub max_dist_m: f64,
    pub events: u32,
}

impl Table for AgentDay {
    const HEADER: &'static [&'static str] = &[
        "agent", "group", "phone_id", "date", "home_x", "home_y", "home_cx", "home_cy", "attended",
        "night_service", "max_dist_m", "events",
    ];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.agent.to_string(),
            self.group.clone(),
            self.phone_id.clone(),
            self.date.to_string(),
            self.home.x.to_string(),
            self.home.y.to_string(),
            self.home_cell.cx().to_string(),
            self.home_cell.cy().to_string(),
            (self.attended as u8).to_string(),
            (self.night_service as u8).to_string(),
            crate::io::fixed(self.max_dist_m, 3),
            self.events.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        let get = |i: usize| rec.get(i).ok_or_else(|| format!("missing column {}", i + 1));
        let num = |i: usize| -> Result<f64, String> { get(i)?.parse().map_err(|_| format!("bad number in column {}", i + 1)) };
        let flag = |i: usize| -> Result<bool, String> {
            match get(i)? {
                "0" => Ok(false),
                "1" => Ok(true),
                s => Err(format!("bad flag {s:?}")),
            }
        };
        let home = PlanarPoint::new(num(4)?, num(5)?);
        Ok(AgentDay {
            agent: get(0)?.parse().map_err(|_| "bad agent".to_string())?,
            group: get(1)?.to_string(),
            phone_id: get(2)?.to_string(),
            date: NaiveDate::parse_from_str(get(3)?, "%Y-%m-%d").map_err(|_| "bad date".to_string())?,
            home,
            home_cell: KmCell::new(num(6)? as i64, num(7)? as i64).map_err(|e| e.to_string())?,
            attended: flag(8)?,
            night_service: flag(9)?,
            max_dist_m: num(10)?,
            events: get(11)?.parse().map_err(|_| "bad events".to_string())?,
        })
    }
}

/// Everything the generator knows about the world it emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dates: [NaiveDate; 4],
    pub n_agents: u32,
    /// Date-major, then agent.
    pub agent_days: Vec<AgentDay>,
    /// Distinct phones per date, hour and serving-tower cell.
    pub counts: BTreeMap<(NaiveDate, u8, KmCell), u32>,
    /// Percent change implied by each group's attendance rates.
    pub injected_pct: BTreeMap<String, Option<f64>>,
    pub events: u64,
}

impl GroundTruth {
    fn date_index(&self, date: NaiveDate) -> Result<usize> {
        self.dates
            .iter()
            .position(|d| *d == date)
            .ok_or_else(|| Error::Data(format!("date {date} is not part of the scenario")))
    }

    pub fn agent_day(&self, agent: u32, date: NaiveDate) -> Result<&AgentDay> {
        if agent >= self.n_agents {
            return Err(Error::Data(format!("unknown agent {agent}")));
        }
        Ok(&self.agent_days[self.date_index(date)? * self.n_agents as usize + agent as usize])
    }

    /// The cell of the agent's residence.
    pub fn oracle_home(&self, agent: u32) -> Result<KmCell> {
        Ok(self.agent_day(agent, self.dates[0])?.home_cell)
    }

    pub fn oracle_max_dist(&self, agent: u32, date: NaiveDate) -> Result<f64> {
        Ok(self.agent_day(agent, date)?.max_dist_m)
    }

    pub fn oracle_counts(&self, date: NaiveDate, hour: u8) -> Result<BTreeMap<KmCell, u32>> {
        self.date_index(date)?;
        if hour > 23 {
            return Err(Error::Data(format!("hour {hour} out of range")));
        }
        Ok(self
            .counts
            .range((date, hour, KmCell::from_index(0, 0))..)
            .take_while(|((d, h, _), _)| *d == date && *h == hour)
            .map(|((_, _, c), n)| (*c, *n))
            .collect())
    }

    pub fn count_rows(&self) -> Vec<GridHourlyRow> {
        self.counts
            .iter()
            .map(|(&(date, hour, cell), &n_phones)| GridHourlyRow { date, hour, cell, n_phones })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Generation

fn date_rng(seed: u64, date_idx: usize, agent: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + date_idx as u64));
    rng.set_stream(agent);
    rng
}

/// Writes the event stream of `s` to `sink` and returns the ground truth.
pub fn generate(s: &Scenario, sink: &mut dyn Write) -> Result<GroundTruth> {
    s.validate()?;
    let towers = TowerLayout::new(&s.world);
    let agents = agents(s, &towers);
    let io = |e| Error::io("<events stream>", e);
    let mut w = BufWriter::with_capacity(1 << 20, sink);
    writeln!(w, "{}", EVENTS_HEADER.join(",")).map_err(io)?;

    let night = ClockWindow::default();
    let dates = s.dates.as_array();
    let mut truth = GroundTruth {
        dates,
        n_agents: agents.len() as u32,
        agent_days: Vec::with_capacity(agents.len() * 4),
        counts: BTreeMap::new(),
        injected_pct: s.groups.iter().map(|g| (g.name.clone(), g.injected_pct())).collect(),
        events: 0,
    };
    let jitter = s.noise.depart_jitter_slots as usize;
    let mut east = vec![false; SLOTS_PER_DAY];
    let mut keep = vec![false; SLOTS_PER_DAY];
    let mut visits: Vec<(u8, KmCell)> = Vec::with_capacity(SLOTS_PER_DAY);
    for (di, &date) in dates.iter().enumerate() {
        let stamps: Vec<Timestamp> = (0..SLOTS_PER_DAY)
            .map(|k| Timestamp::from_date_hm(date, (k / 12) as u32, (k % 12) as u32 * 5).expect("valid slot"))
            .collect();
        let texts: Vec<String> = stamps.iter().map(|t| t.to_string()).collect();
        for (ai, agent) in agents.iter().enumerate() {
            let g = &s.groups[agent.group];
            let mut rng = date_rng(s.seed, di, ai as u64);
            let attend = rng.random::<f64>() < g.attendance[di];
            let depart = DEPART_SLOT + rng.random_range(0..=jitter);
            let ret = RETURN_SLOT + rng.random_range(0..=jitter);
            for k in 0..SLOTS_PER_DAY {
                east[k] = rng.random::<f64>() < s.noise.sector_switch_prob;
                keep[k] = rng.random::<f64>() >= s.noise.drop_prob;
            }
            let plan = schedule(agent, attend && agent.work.is_some(), depart, ret, &east);
            let phone = phone_id(s.seed, ai as u32, di);
            let (mut events, mut night_service, mut max_dist) = (0u32, false, 0.0f64);
            visits.clear();
            for (k, st) in plan.iter().enumerate() {
                max_dist = max_dist.max(euclid(st.position, agent.home));
                if !keep[k] {
                    continue;
                }
                writeln!(w, "{phone},{},{}", texts[k], towers.keys[st.tower]).map_err(io)?;
                events += 1;
                night_service |= night.overlap_minutes(stamps[k]) > 0;
                visits.push(((k / 12) as u8, towers.cell(st.tower)));
            }
            visits.sort_unstable();
            visits.dedup();
            for &(hour, cell) in &visits {
                *truth.counts.entry((date, hour, cell)).or_insert(0) += 1;
            }
            truth.events += events as u64;
            truth.agent_days.push(AgentDay {
                agent: ai as u32,
                group: g.name.clone(),
                phone_id: phone,
                date,
                home: agent.home,
                home_cell: towers.cell(agent.home_tower),
                attended: attend && agent.work.is_some(),
                night_service,
                max_dist_m: max_dist,
                events,
            });
        }
    }
    w.flush().map_err(io)?;
    Ok(truth)
}

fn cell_rng(seed: u64, world: &WorldSpec, i: u32, j: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 * world.height_km as u64 + j as u64);
    rng
}

/// Residents on the 100 m lattice, cell by cell.
pub fn population(s: &Scenario) -> Result<Vec<PersonRecord>> {
    let mut out = Vec::new();
    for i in 0..s.world.width_km {
        for j in 0..s.world.height_km {
            let (n, demo) = s
                .groups
                .iter()
                .find(|g| g.home.contains(i, j))
                .map(|g| (g.residents_per_cell, g.demography))
                .unwrap_or((s.background.residents_per_cell, s.background.demography));
            let income = LogNormal::new(demo.income_median.ln(), demo.income_spread)
                .map_err(|e| Error::Config(format!("income distribution: {e}")))?;
            let mut rng = cell_rng(s.seed.wrapping_add(101), &s.world, i, j);
            for _ in 0..n {
                let x = i as f64 * 1000.0 + 100.0 * rng.random_range(0..10) as f64;
                let y = j as f64 * 1000.0 + 100.0 * rng.random_range(0..10) as f64;
                let elderly = rng.random::<f64>() < demo.elderly;
                let young_age = rng.random_range(0..70u32);
                let old_age = rng.random_range(70..=95u32);
                let minority = rng.random::<f64>() < demo.minority;
                let tertiary_edu = rng.random::<f64>() < demo.tertiary;
                let disposable_income = rng.sample(income).round();
                out.push(PersonRecord {
                    location: PlanarPoint::new(x, y),
                    age: if elderly { old_age } else { young_age },
                    minority,
                    tertiary_edu,
                    disposable_income,
                });
            }
        }
    }
    Ok(out)
}

/// Job sites at whole-meter positions, cell by cell.
pub fn jobs(s: &Scenario) -> Vec<JobSite> {
    let mut out = Vec::new();
    for i in 0..s.world.width_km {
        for j in 0..s.world.height_km {
            let n = s
                .groups
                .iter()
                .find(|g| g.work.is_some_and(|w| w.contains(i, j)))
                .map(|g| g.jobs_per_cell)
                .unwrap_or(s.background.jobs_per_cell);
            let mut rng = cell_rng(s.seed.wrapping_add(102), &s.world, i, j);
            for _ in 0..n {
                let x = i as f64 * 1000.0 + rng.random_range(0..1000) as f64;
                let y = j as f64 * 1000.0 + rng.random_range(0..1000) as f64;
                out.push(JobSite(PlanarPoint::new(x, y)));
            }
        }
    }
    out
}

/// Files written by [`write_world`].
pub const WORLD_FILES: [&str; 6] =
    ["events.csv", "towers.csv", "population.csv", "jobs.csv", "truth.csv", "truth_counts.csv"];

/// Generates `s` into `dir`: pipeline inputs plus `truth.csv` (one row per
/// agent and date) and `truth_counts.csv` (grid-hourly counts by serving
/// tower cell).
pub fn write_world(s: &Scenario, dir: &Path) -> Result<GroundTruth> {
    s.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| -> PathBuf { dir.join(name) };
    write_table(&path("towers.csv"), &TowerLayout::new(&s.world).rows())?;
    write_table(&path("population.csv"), &population(s)?)?;
    write_table(&path("jobs.csv"), &jobs(s))?;
    let events = path("events.csv");
    let mut file = File::create(&events).map_err(|e| Error::io(&events, e))?;
    let truth = generate(s, &mut file)?;
    write_table(&path("truth.csv"), &truth.agent_days)?;
    write_table(&path("truth_counts.csv"), &truth.count_rows())?;
    Ok(truth)
}

