//! Input registries and output tables.
//!
//! Every file is UTF-8 CSV with a mandatory header row. Readers report the
//! offending line on any malformed row; writers emit rows in the order given
//! with fixed decimal formatting, so identical rows give identical bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mobiscope_core::demographics::PersonRecord;
use mobiscope_core::lisa::LisaClass;
use mobiscope_core::mobility::{PhoneDay, PhoneId, Ping, TowerId, TowerTable, MAX_TRACE_MINUTES};
use mobiscope_core::{KmCell, PlanarPoint, Timestamp};

use crate::error::{Error, Result};

pub const EVENTS_HEADER: [&str; 3] = ["phone_id", "timestamp", "tower_id"];

/// A row of a CSV file with a fixed schema.
pub trait Table: Sized {
    const HEADER: &'static [&'static str];
    fn to_record(&self) -> Vec<String>;
    fn from_record(rec: &csv::StringRecord) -> Result<Self, String>;
}

/// Fixed-decimal formatting that never prints `-0`.
pub fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn opt_fixed(v: Option<f64>, decimals: usize) -> String {
    v.map(|v| fixed(v, decimals)).unwrap_or_default()
}

fn field<'r>(rec: &'r csv::StringRecord, i: usize) -> Result<&'r str, String> {
    rec.get(i).ok_or_else(|| format!("missing column {}", i + 1))
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, String> {
    let s = field(rec, i)?;
    s.trim().parse().map_err(|_| format!("bad {name} {s:?}"))
}

fn parse_opt(rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<f64>, String> {
    let s = field(rec, i)?;
    if s.is_empty() {
        Ok(None)
    } else {
        parse(rec, i, name).map(Some)
    }
}

fn parse_f64(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, String> {
    let v: f64 = parse(rec, i, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} is not finite"))
    }
}

fn parse_coord(rec: &csv::StringRecord, i: usize, name: &str) -> Result<f64, String> {
    let v = parse_f64(rec, i, name)?;
    if v < 0.0 {
        return Err(format!("{name} {v} is negative"));
    }
    Ok(v)
}

fn parse_bool(rec: &csv::StringRecord, i: usize, name: &str) -> Result<bool, String> {
    match field(rec, i)? {
        "0" => Ok(false),
        "1" => Ok(true),
        s => Err(format!("bad {name} {s:?}, expected 0 or 1")),
    }
}

fn parse_cell(rec: &csv::StringRecord, i: usize) -> Result<KmCell, String> {
    let cx: i64 = parse(rec, i, "cx")?;
    let cy: i64 = parse(rec, i + 1, "cy")?;
    KmCell::new(cx, cy).map_err(|e| e.to_string())
}

fn parse_date(rec: &csv::StringRecord, i: usize) -> Result<NaiveDate, String> {
    let s = field(rec, i)?;
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("bad date {s:?}"))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::row(path, line, format!("{kind:?}")),
    }
}

fn open_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::with_capacity(1 << 20, file));
    let got = rdr.headers().map_err(|e| csv_error(path, e))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::row(
            path,
            1,
            format!("header {:?} does not match {:?}", got.iter().collect::<Vec<_>>(), header),
        ));
    }
    Ok(rdr)
}

pub fn read_table<T: Table>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = open_reader(path, T::HEADER)?;
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != T::HEADER.len() {
            return Err(Error::row(path, line, format!("{} fields, expected {}", rec.len(), T::HEADER.len())));
        }
        out.push(T::from_record(&rec).map_err(|m| Error::row(path, line, m))?);
    }
    Ok(out)
}

/// Writes `rows` under the table header; returns the row count.
pub fn write_table<T: Table>(path: &Path, rows: &[T]) -> Result<u64> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().from_writer(BufWriter::new(file));
    w.write_record(T::HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r.to_record()).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows.len() as u64)
}

// ---------------------------------------------------------------------------
// Towers

#[derive(Debug, Clone, PartialEq)]
pub struct TowerRow {
    pub tower_id: String,
    pub x_m: f64,
    pub y_m: f64,
}

impl Table for TowerRow {
    const HEADER: &'static [&'static str] = &["tower_id", "x_m", "y_m"];

    fn to_record(&self) -> Vec<String> {
        vec![self.tower_id.clone(), self.x_m.to_string(), self.y_m.to_string()]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        let tower_id = field(rec, 0)?.to_string();
        if tower_id.is_empty() {
            return Err("empty tower_id".into());
        }
        Ok(TowerRow { tower_id, x_m: parse_coord(rec, 1, "x_m")?, y_m: parse_coord(rec, 2, "y_m")? })
    }
}

/// Tower keys resolved to dense indices into a [`TowerTable`].
#[derive(Debug, Clone, Default)]
pub struct TowerRegistry {
    keys: Vec<String>,
    index: HashMap<String, TowerId>,
    table: TowerTable,
}

impl TowerRegistry {
    pub fn from_rows(rows: &[TowerRow]) -> Result<Self, String> {
        let mut reg = TowerRegistry::default();
        for r in rows {
            reg.insert(&r.tower_id, PlanarPoint::new(r.x_m, r.y_m))?;
        }
        Ok(reg)
    }

    pub fn insert(&mut self, key: &str, site: PlanarPoint) -> Result<TowerId, String> {
        if self.index.contains_key(key) {
            return Err(format!("duplicate tower_id {key:?}"));
        }
        let id = self.table.push(site);
        self.index.insert(key.to_string(), id);
        self.keys.push(key.to_string());
        Ok(id)
    }

    pub fn resolve(&self, key: &str) -> Option<TowerId> {
        self.index.get(key).copied()
    }

    pub fn key(&self, id: TowerId) -> &str {
        &self.keys[id.0 as usize]
    }

    pub fn table(&self) -> &TowerTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn rows(&self) -> Vec<TowerRow> {
        self.keys
            .iter()
            .zip(self.table.sites())
            .map(|(k, p)| TowerRow { tower_id: k.clone(), x_m: p.x, y_m: p.y })
            .collect()
    }
}

pub fn read_towers(path: &Path) -> Result<TowerRegistry> {
    let rows: Vec<TowerRow> = read_table(path)?;
    let mut reg = TowerRegistry::default();
    for (i, r) in rows.iter().enumerate() {
        reg.insert(&r.tower_id, PlanarPoint::new(r.x_m, r.y_m))
            .map_err(|m| Error::row(path, i as u64 + 2, m))?;
    }
    Ok(reg)
}

// ---------------------------------------------------------------------------
// Events

/// One phone-to-tower service record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellEvent {
    pub phone_id: String,
    pub timestamp: Timestamp,
    pub tower_id: String,
}

fn digits(b: &[u8]) -> Option<u32> {
    b.iter().try_fold(0u32, |acc, &c| c.is_ascii_digit().then(|| acc * 10 + (c - b'0') as u32))
}

/// Parses `YYYY-MM-DDTHH:MM`; the minute must be a multiple of 5.
pub fn parse_timestamp(s: &str) -> Result<Timestamp, String> {
    let b = s.as_bytes();
    let bad = || format!("bad timestamp {s:?}, expected YYYY-MM-DDTHH:MM");
    if b.len() != 16 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' {
        return Err(bad());
    }
    let (y, mo, d) = (digits(&b[0..4]).ok_or_else(bad)?, digits(&b[5..7]).ok_or_else(bad)?, digits(&b[8..10]).ok_or_else(bad)?);
    let (h, mi) = (digits(&b[11..13]).ok_or_else(bad)?, digits(&b[14..16]).ok_or_else(bad)?);
    let date = NaiveDate::from_ymd_opt(y as i32, mo, d).ok_or_else(bad)?;
    if h > 23 || mi > 59 {
        return Err(bad());
    }
    let ts = Timestamp::from_date_hm(date, h, mi).map_err(|e| e.to_string())?;
    if !ts.is_on_slot_grid() {
        return Err(format!("timestamp {s} is not on the 5-minute grid"));
    }
    Ok(ts)
}

/// Streaming reader over `events.csv`.
pub struct EventReader {
    path: PathBuf,
    rdr: csv::Reader<BufReader<File>>,
    rec: csv::ByteRecord,
    // the last parsed timestamp text and its value; files are mostly
    // grouped by phone and time, so repeats are common
    last_ts: ([u8; 16], Timestamp),
}

/// A row borrowed from the reader's buffer.
pub struct RawEvent<'a> {
    pub line: u64,
    pub phone_id: &'a str,
    pub timestamp: Timestamp,
    pub tower_id: &'a str,
}

impl EventReader {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(EventReader {
            path: path.to_path_buf(),
            rdr: open_reader(path, &EVENTS_HEADER)?,
            rec: csv::ByteRecord::new(),
            last_ts: ([0; 16], Timestamp::from_minutes(0)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_raw(&mut self) -> Result<Option<RawEvent<'_>>> {
        match self.rdr.read_byte_record(&mut self.rec) {
            Ok(true) => {}
            Ok(false) => return Ok(None),
            Err(e) => return Err(csv_error(&self.path, e)),
        }
        let line = self.rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |m: String| Error::row(&self.path, line, m);
        if self.rec.len() != 3 {
            return Err(row_err(format!("{} fields, expected 3", self.rec.len())));
        }
        let text = |i: usize| std::str::from_utf8(&self.rec[i]).map_err(|_| row_err("invalid UTF-8".into()));
        let phone_id = text(0)?;
        let ts_text = text(1)?;
        let tower_id = text(2)?;
        if phone_id.is_empty() {
            return Err(row_err("empty phone_id".into()));
        }
        let timestamp = if self.last_ts.0[..] == *ts_text.as_bytes() {
            self.last_ts.1
        } else {
            let ts = parse_timestamp(ts_text).map_err(row_err)?;
            if let Ok(buf) = ts_text.as_bytes().try_into() {
                self.last_ts = (buf, ts);
            }
            ts
        };
        Ok(Some(RawEvent { line, phone_id, timestamp, tower_id }))
    }
}

/// What to do with a phone whose records span more than 24 hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanPolicy {
    #[default]
    Reject,
    Drop,
}

/// Validated events in file order; unknown towers are dropped and counted.
///
/// Under [`SpanPolicy::Reject`] the stream fails on the first record that
/// stretches a phone beyond 24 hours.
pub struct EventStream<'t> {
    reader: EventReader,
    towers: &'t TowerRegistry,
    spans: HashMap<String, (i32, i32)>,
    dropped: u64,
    failed: bool,
}

pub fn read_events<'t>(path: &Path, towers: &'t TowerRegistry) -> Result<EventStream<'t>> {
    Ok(EventStream { reader: EventReader::open(path)?, towers, spans: HashMap::new(), dropped: 0, failed: false })
}

impl EventStream<'_> {
    /// Events dropped so far for referencing unknown towers.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

impl Iterator for EventStream<'_> {
    type Item = Result<CellEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let ev = match self.reader.next_raw() {
                Ok(Some(ev)) => ev,
                Ok(None) => return None,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            if self.towers.resolve(ev.tower_id).is_none() {
                self.dropped += 1;
                continue;
            }
            let t = ev.timestamp.minutes();
            let span = self.spans.entry(ev.phone_id.to_string()).or_insert((t, t));
            span.0 = span.0.min(t);
            span.1 = span.1.max(t);
            if span.1 - span.0 > MAX_TRACE_MINUTES {
                self.failed = true;
                return Some(Err(Error::Privacy { phone: ev.phone_id.to_string(), minutes: span.1 - span.0 }));
            }
            return Some(Ok(CellEvent {
                phone_id: ev.phone_id.to_string(),
                timestamp: ev.timestamp,
                tower_id: ev.tower_id.to_string(),
            }));
        }
    }
}

/// Events grouped into per-phone traces.
#[derive(Debug, Clone, Default)]
pub struct Ingest {
    /// Phone traces ordered by phone id.
    pub days: Vec<PhoneDay>,
    pub events: u64,
    pub dropped_unknown_tower: u64,
    /// Phones dropped for exceeding 24 hours (only under [`SpanPolicy::Drop`]).
    pub dropped_over_span: u64,
}

/// Reads `events.csv` and groups it into phone traces.
pub fn ingest_events(path: &Path, towers: &TowerRegistry, policy: SpanPolicy) -> Result<Ingest> {
    let mut reader = EventReader::open(path)?;
    let mut slots: HashMap<Box<str>, usize> = HashMap::new();
    let mut traces: Vec<(Box<str>, Vec<Ping>, i32, i32)> = Vec::new();
    let mut out = Ingest::default();
    while let Some(ev) = reader.next_raw()? {
        let Some(tower) = towers.resolve(ev.tower_id) else {
            out.dropped_unknown_tower += 1;
            continue;
        };
        let t = ev.timestamp.minutes();
        let slot = match slots.get(ev.phone_id) {
            Some(&s) => s,
            None => {
                let key: Box<str> = ev.phone_id.into();
                slots.insert(key.clone(), traces.len());
                traces.push((key, Vec::new(), t, t));
                traces.len() - 1
            }
        };
        let tr = &mut traces[slot];
        tr.1.push(Ping { at: ev.timestamp, tower });
        tr.2 = tr.2.min(t);
        tr.3 = tr.3.max(t);
        if policy == SpanPolicy::Reject && tr.3 - tr.2 > MAX_TRACE_MINUTES {
            return Err(Error::Privacy { phone: ev.phone_id.to_string(), minutes: tr.3 - tr.2 });
        }
        out.events += 1;
    }
    drop(slots);
    traces.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    out.days.reserve(traces.len());
    for (phone, pings, first, last) in traces {
        if last - first > MAX_TRACE_MINUTES {
            out.dropped_over_span += 1;
            out.events -= pings.len() as u64;
            continue;
        }
        out.days.push(PhoneDay::new(PhoneId(phone.into()), pings)?);
    }
    Ok(out)
}

/// Writes events in file order.
pub fn write_events<'a, I>(path: &Path, events: I) -> Result<u64>
where
    I: IntoIterator<Item = &'a CellEvent>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let mut n = 0;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", EVENTS_HEADER.join(",")).map_err(io)?;
    for ev in events {
        writeln!(w, "{},{},{}", ev.phone_id, ev.timestamp, ev.tower_id).map_err(io)?;
        n += 1;
    }
    w.flush().map_err(io)?;
    Ok(n)
}

// ---------------------------------------------------------------------------
// Population and jobs

impl Table for PersonRecord {
    const HEADER: &'static [&'static str] = &["x_m", "y_m", "age", "minority", "tertiary_edu", "disposable_income"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.location.x.to_string(),
            self.location.y.to_string(),
            self.age.to_string(),
            (self.minority as u8).to_string(),
            (self.tertiary_edu as u8).to_string(),
            self.disposable_income.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        let x = parse_coord(rec, 0, "x_m")?;
        let y = parse_coord(rec, 1, "y_m")?;
        if x % 100.0 != 0.0 || y % 100.0 != 0.0 {
            return Err(format!("location ({x}, {y}) is not on the 100 m lattice"));
        }
        let age: i64 = parse(rec, 2, "age")?;
        if !(0..=150).contains(&age) {
            return Err(format!("age {age} out of range"));
        }
        let income = parse_f64(rec, 5, "disposable_income")?;
        if income < 0.0 {
            return Err(format!("disposable_income {income} is negative"));
        }
        Ok(PersonRecord {
            location: PlanarPoint::new(x, y),
            age: age as u32,
            minority: parse_bool(rec, 3, "minority")?,
            tertiary_edu: parse_bool(rec, 4, "tertiary_edu")?,
            disposable_income: income,
        })
    }
}

pub fn read_population(path: &Path) -> Result<Vec<PersonRecord>> {
    read_table(path)
}

/// A workplace location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobSite(pub PlanarPoint);

impl Table for JobSite {
    const HEADER: &'static [&'static str] = &["x_m", "y_m"];

    fn to_record(&self) -> Vec<String> {
        vec![self.0.x.to_string(), self.0.y.to_string()]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        Ok(JobSite(PlanarPoint::new(parse_f64(rec, 0, "x_m")?, parse_f64(rec, 1, "y_m")?)))
    }
}

pub fn read_jobs(path: &Path) -> Result<Vec<PlanarPoint>> {
    Ok(read_table::<JobSite>(path)?.into_iter().map(|j| j.0).collect())
}

// ---------------------------------------------------------------------------
// Output tables

/// `grid_hourly.csv`: unique phones per cell and hour.
#[derive(Debug, Clone, PartialEq)]
pub struct GridHourlyRow {
    pub date: NaiveDate,
    pub hour: u8,
    pub cell: KmCell,
    pub n_phones: u32,
}

impl Table for GridHourlyRow {
    const HEADER: &'static [&'static str] = &["date", "hour", "cx", "cy", "n_phones"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.date.to_string(),
            self.hour.to_string(),
            self.cell.cx().to_string(),
            self.cell.cy().to_string(),
            self.n_phones.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        let hour: u8 = parse(rec, 1, "hour")?;
        if hour > 23 {
            return Err(format!("hour {hour} out of range"));
        }
        Ok(GridHourlyRow { date: parse_date(rec, 0)?, hour, cell: parse_cell(rec, 2)?, n_phones: parse(rec, 4, "n_phones")? })
    }
}

/// `home_distance.csv`: mean max distance per origin cell and date.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeDistanceRow {
    pub date: NaiveDate,
    pub origin: KmCell,
    pub mean_max_dist_m: f64,
    pub n_phones: u64,
}

impl Table for HomeDistanceRow {
    const HEADER: &'static [&'static str] = &["date", "ox", "oy", "mean_max_dist_m", "n_phones"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.date.to_string(),
            self.origin.cx().to_string(),
            self.origin.cy().to_string(),
            fixed(self.mean_max_dist_m, 1),
            self.n_phones.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        Ok(HomeDistanceRow {
            date: parse_date(rec, 0)?,
            origin: parse_cell(rec, 1)?,
            mean_max_dist_m: parse_f64(rec, 3, "mean_max_dist_m")?,
            n_phones: parse(rec, 4, "n_phones")?,
        })
    }
}

/// `homes.csv`: night-rest origin and max distance of each phone.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeRow {
    pub phone_id: String,
    pub date: NaiveDate,
    pub origin: PlanarPoint,
    pub cell: KmCell,
    pub max_dist_m: f64,
}

impl Table for HomeRow {
    const HEADER: &'static [&'static str] = &["phone_id", "date", "origin_x", "origin_y", "cx", "cy", "max_dist_m"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.phone_id.clone(),
            self.date.to_string(),
            fixed(self.origin.x, 1),
            fixed(self.origin.y, 1),
            self.cell.cx().to_string(),
            self.cell.cy().to_string(),
            fixed(self.max_dist_m, 1),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        Ok(HomeRow {
            phone_id: field(rec, 0)?.to_string(),
            date: parse_date(rec, 1)?,
            origin: PlanarPoint::new(parse_f64(rec, 2, "origin_x")?, parse_f64(rec, 3, "origin_y")?),
            cell: parse_cell(rec, 4)?,
            max_dist_m: parse_f64(rec, 6, "max_dist_m")?,
        })
    }
}

/// `did_grid.csv`: per-cell DiD of presence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DidRow {
    pub cell: KmCell,
    pub did: f64,
    pub baseline: f64,
    pub pct: Option<f64>,
}

impl Table for DidRow {
    const HEADER: &'static [&'static str] = &["cx", "cy", "did", "baseline", "pct"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.cell.cx().to_string(),
            self.cell.cy().to_string(),
            fixed(self.did, 1),
            fixed(self.baseline, 1),
            opt_fixed(self.pct, 3),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        Ok(DidRow {
            cell: parse_cell(rec, 0)?,
            did: parse_f64(rec, 2, "did")?,
            baseline: parse_f64(rec, 3, "baseline")?,
            pct: parse_opt(rec, 4, "pct")?,
        })
    }
}

/// `lisa.csv`: local Moran statistic and class per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LisaRow {
    pub cell: KmCell,
    pub local_i: Option<f64>,
    pub pseudo_p: Option<f64>,
    pub class: LisaClass,
}

impl Table for LisaRow {
    const HEADER: &'static [&'static str] = &["cx", "cy", "local_i", "pseudo_p", "class"];

    fn to_record(&self) -> Vec<String> {
        vec![
            self.cell.cx().to_string(),
            self.cell.cy().to_string(),
            opt_fixed(self.local_i, 6),
            opt_fixed(self.pseudo_p, 6),
            self.class.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        let class = field(rec, 4)?;
        Ok(LisaRow {
            cell: parse_cell(rec, 0)?,
            local_i: parse_opt(rec, 2, "local_i")?,
            pseudo_p: parse_opt(rec, 3, "pseudo_p")?,
            class: LisaClass::parse(class).ok_or_else(|| format!("bad class {class:?}"))?,
        })
    }
}

/// `demographics.csv`: k-NN shares per cell; empty for uncovered cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicsRow {
    pub cell: KmCell,
    /// minority, high_edu, poor, risk70.
    pub shares: Option<[f64; 4]>,
}

impl Table for DemographicsRow {
    const HEADER: &'static [&'static str] = &["cx", "cy", "minority", "high_edu", "poor", "risk70"];

    fn to_record(&self) -> Vec<String> {
        let mut r = vec![self.cell.cx().to_string(), self.cell.cy().to_string()];
        match self.shares {
            Some(s) => r.extend(s.iter().map(|v| fixed(*v, 6))),
            None => r.extend(std::iter::repeat_n(String::new(), 4)),
        }
        r
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        let vals = [
            parse_opt(rec, 2, "minority")?,
            parse_opt(rec, 3, "high_edu")?,
            parse_opt(rec, 4, "poor")?,
            parse_opt(rec, 5, "risk70")?,
        ];
        let shares = match vals {
            [Some(a), Some(b), Some(c), Some(d)] => Some([a, b, c, d]),
            [None, None, None, None] => None,
            _ => return Err("shares must be all present or all empty".into()),
        };
        if let Some(s) = shares {
            if s.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err("share outside [0, 1]".into());
            }
        }
        Ok(DemographicsRow { cell: parse_cell(rec, 0)?, shares })
    }
}

/// `jobs_distance.csv`: radius needed to reach the k nearest jobs.
#[derive(Debug, Clone, PartialEq)]
pub struct JobsDistanceRow {
    pub cell: KmCell,
    pub dist_m: f64,
}

impl Table for JobsDistanceRow {
    const HEADER: &'static [&'static str] = &["cx", "cy", "dist_m"];

    fn to_record(&self) -> Vec<String> {
        vec![self.cell.cx().to_string(), self.cell.cy().to_string(), fixed(self.dist_m, 1)]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self, String> {
        Ok(JobsDistanceRow { cell: parse_cell(rec, 0)?, dist_m: parse_f64(rec, 2, "dist_m")? })
    }
}

/// A table whose first column is a row label and the rest are free-form
/// values, as used by the report tables.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl LabeledTable {
    pub fn write(&self, path: &Path) -> Result<u64> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::WriterBuilder::new().from_writer(BufWriter::new(file));
        w.write_record(&self.header).map_err(|e| csv_error(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(self.rows.len() as u64)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file));
        let header = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec.map_err(|e| csv_error(path, e))?.iter().map(String::from).collect());
        }
        Ok(LabeledTable { header, rows })
    }

    pub fn row(&self, label: &str) -> Option<&[String]> {
        self.rows.iter().find(|r| r.first().map(String::as_str) == Some(label)).map(|r| &r[1..])
    }

    /// The value in row `label` under header `column`.
    pub fn value(&self, label: &str, column: &str) -> Option<&str> {
        let c = self.header.iter().position(|h| h == column)?;
        self.rows.iter().find(|r| r.first().map(String::as_str) == Some(label))?.get(c).map(String::as_str)
    }
}
