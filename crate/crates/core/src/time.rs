//! Timestamps at 5-minute service granularity and hour bucketing.

use core::fmt;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use thiserror::Error;

/// Spacing of service records, in minutes.
pub const SLOT_MINUTES: i32 = 5;

const MINUTES_PER_DAY: i32 = 24 * 60;
const UNIX_EPOCH_DAYS_FROM_CE: i32 = 719_163;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("timestamp {0} is not on the 5-minute grid")]
    Granularity(Timestamp),
    #[error("timestamp out of supported range")]
    OutOfRange,
    #[error("invalid clock window {0:02}:{1:02}-{2:02}:{3:02}")]
    InvalidWindow(u16, u16, u16, u16),
}

/// Minutes since 1970-01-01T00:00, timezone-naive.
///
/// Four bytes per record keeps multi-million event days compact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i32);

impl Timestamp {
    pub const fn from_minutes(minutes: i32) -> Self {
        Timestamp(minutes)
    }

    pub fn from_datetime(dt: NaiveDateTime) -> Result<Self, TimeError> {
        let days = dt.date().num_days_from_ce() - UNIX_EPOCH_DAYS_FROM_CE;
        let minutes = (days as i64) * MINUTES_PER_DAY as i64
            + dt.hour() as i64 * 60
            + dt.minute() as i64;
        i32::try_from(minutes)
            .map(Timestamp)
            .map_err(|_| TimeError::OutOfRange)
    }

    pub fn from_date_hm(date: NaiveDate, hour: u32, minute: u32) -> Result<Self, TimeError> {
        let dt = date.and_hms_opt(hour, minute, 0).ok_or(TimeError::OutOfRange)?;
        Self::from_datetime(dt)
    }

    pub const fn minutes(self) -> i32 {
        self.0
    }

    pub fn date(self) -> NaiveDate {
        let days = self.0.div_euclid(MINUTES_PER_DAY) + UNIX_EPOCH_DAYS_FROM_CE;
        // The i32 minute range is far inside chrono's supported dates.
        NaiveDate::from_num_days_from_ce_opt(days).expect("date within chrono range")
    }

    /// Minute of the clock day, 0..1440.
    pub fn minute_of_day(self) -> u16 {
        self.0.rem_euclid(MINUTES_PER_DAY) as u16
    }

    pub fn hour(self) -> u8 {
        (self.minute_of_day() / 60) as u8
    }

    pub fn to_datetime(self) -> NaiveDateTime {
        let m = self.minute_of_day() as u32;
        self.date()
            .and_hms_opt(m / 60, m % 60, 0)
            .expect("minute of day is a valid clock time")
    }

    pub fn is_on_slot_grid(self) -> bool {
        self.0.rem_euclid(SLOT_MINUTES) == 0
    }

    pub fn add_minutes(self, m: i32) -> Self {
        Timestamp(self.0 + m)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format("%Y-%m-%dT%H:%M"))
    }
}

/// One clock hour of one calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HourBucket {
    pub date: NaiveDate,
    pub hour: u8,
}

impl HourBucket {
    /// Bucket of a timestamp, without the granularity check.
    pub fn of(ts: Timestamp) -> Self {
        HourBucket {
            date: ts.date(),
            hour: ts.hour(),
        }
    }
}

/// Floors a service record time to its clock hour; 09:15 and 09:35 both
/// land in hour 9.
pub fn to_hour_bucket(ts: Timestamp) -> Result<HourBucket, TimeError> {
    if !ts.is_on_slot_grid() {
        return Err(TimeError::Granularity(ts));
    }
    Ok(HourBucket::of(ts))
}

/// An inclusive range of 5-minute slot start times within a clock day.
///
/// The default night-rest window `03:00..=06:55` covers the slots starting
/// at 03:00 through 06:55, i.e. the half-open interval [03:00, 07:00).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockWindow {
    first: u16,
    last: u16,
}

impl ClockWindow {
    pub fn new(first_h: u16, first_m: u16, last_h: u16, last_m: u16) -> Result<Self, TimeError> {
        let first = first_h * 60 + first_m;
        let last = last_h * 60 + last_m;
        if first_h > 23 || last_h > 23 || first_m > 59 || last_m > 59 || first > last {
            return Err(TimeError::InvalidWindow(first_h, first_m, last_h, last_m));
        }
        Ok(ClockWindow { first, last })
    }

    pub const fn night_rest() -> Self {
        ClockWindow {
            first: 3 * 60,
            last: 6 * 60 + 55,
        }
    }

    /// First and last slot start, minutes after midnight.
    pub fn bounds(&self) -> (u16, u16) {
        (self.first, self.last)
    }

    /// Minutes of the slot `[ts, ts + 5)` that fall inside the window.
    pub fn overlap_minutes(&self, ts: Timestamp) -> u32 {
        let start = ts.minute_of_day() as i32;
        let end = start + SLOT_MINUTES;
        let lo = start.max(self.first as i32);
        let hi = end.min(self.last as i32 + SLOT_MINUTES);
        (hi - lo).max(0) as u32
    }
}

impl Default for ClockWindow {
    fn default() -> Self {
        Self::night_rest()
    }
}
