//! Planar coordinates, the 1 km analysis grid and Euclidean distance.
//!
//! All coordinates are meters in one projected CRS with non-negative
//! easting/northing. The km grid assigns a coordinate to the midpoint of
//! its kilometre square: `trunc(x / 1000) * 1000 + 500`.

use core::fmt;

use thiserror::Error;

/// Side length of a grid square in meters.
pub const KM: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("coordinate {0} is not finite")]
    NonFinite(f64),
    #[error("coordinate {0} is negative; the grid is defined for non-negative projected coordinates")]
    Negative(f64),
    #[error("({0}, {1}) is not a km-grid midpoint")]
    NotMidpoint(i64, i64),
}

/// A point in projected planar meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    /// Validates that both coordinates are finite and non-negative.
    pub fn checked(x: f64, y: f64) -> Result<Self, GeoError> {
        check_coord(x)?;
        check_coord(y)?;
        Ok(PlanarPoint { x, y })
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Midpoint of the segment between `self` and `other`.
    pub fn halfway_to(self, other: PlanarPoint) -> PlanarPoint {
        PlanarPoint {
            x: (self.x + other.x) * 0.5,
            y: (self.y + other.y) * 0.5,
        }
    }

    pub fn translate(self, dx: f64, dy: f64) -> PlanarPoint {
        PlanarPoint {
            x: self.x + dx,
            y: self.y + dy,
        }
    }
}

impl fmt::Display for PlanarPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

fn check_coord(c: f64) -> Result<(), GeoError> {
    if !c.is_finite() {
        Err(GeoError::NonFinite(c))
    } else if c < 0.0 {
        Err(GeoError::Negative(c))
    } else {
        Ok(())
    }
}

/// Relocates a coordinate to the midpoint of its kilometre band.
///
/// `1234.0 -> 1500.0`, `999.9 -> 500.0`.
pub fn truncate_to_km(coord: f64) -> Result<f64, GeoError> {
    check_coord(coord)?;
    Ok(libm::trunc(coord / KM) * KM + 500.0)
}

/// Euclidean distance in meters.
#[inline]
pub fn euclid(a: PlanarPoint, b: PlanarPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    libm::sqrt(dx * dx + dy * dy)
}

/// Squared Euclidean distance; ordering-equivalent to [`euclid`].
#[inline]
pub fn dist2(a: PlanarPoint, b: PlanarPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// A 1 km grid square, identified by its integer midpoint in meters.
///
/// Ordering is by `cx` then `cy`, which is the stable row order of every
/// grid table this crate produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KmCell {
    cx: i64,
    cy: i64,
}

impl KmCell {
    /// Builds a cell from midpoint coordinates; both must be `k * 1000 + 500`.
    pub fn new(cx: i64, cy: i64) -> Result<Self, GeoError> {
        if cx.rem_euclid(1000) != 500 || cy.rem_euclid(1000) != 500 || cx < 0 || cy < 0 {
            return Err(GeoError::NotMidpoint(cx, cy));
        }
        Ok(KmCell { cx, cy })
    }

    /// The cell of the `i`-th column and `j`-th row of the grid.
    pub fn from_index(i: u32, j: u32) -> Self {
        KmCell {
            cx: i as i64 * 1000 + 500,
            cy: j as i64 * 1000 + 500,
        }
    }

    /// The square containing `p`.
    pub fn containing(p: PlanarPoint) -> Result<Self, GeoError> {
        let cx = truncate_to_km(p.x)?;
        let cy = truncate_to_km(p.y)?;
        Ok(KmCell {
            cx: cx as i64,
            cy: cy as i64,
        })
    }

    pub fn cx(&self) -> i64 {
        self.cx
    }

    pub fn cy(&self) -> i64 {
        self.cy
    }

    /// Column and row index of the square.
    pub fn index(&self) -> (i64, i64) {
        (self.cx / 1000, self.cy / 1000)
    }

    pub fn midpoint(&self) -> PlanarPoint {
        PlanarPoint::new(self.cx as f64, self.cy as f64)
    }
}

impl fmt::Display for KmCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.cx, self.cy)
    }
}
