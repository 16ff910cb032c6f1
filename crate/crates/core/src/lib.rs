//! Core algorithms for turning anonymized cell-tower service records into
//! mobility analytics.
//!
//! Everything here is pure computation over in-memory values and only needs
//! `alloc`: the half-way trajectory estimator and night-rest home inference
//! ([`mobility`]), km-grid hourly aggregation with order-independent shard
//! merging ([`gridagg`]), Difference-in-Differences grids and scalars
//! ([`did`]), local Moran's I with conditional permutation inference
//! ([`lisa`]), and bespoke k-nearest-neighbour population context
//! ([`demographics`], backed by [`knn`]).
//!
//! File formats, the synthetic world generator, parallel orchestration and
//! the CLI live in the `mobiscope` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod demographics;
pub mod did;
pub mod geo;
pub mod gridagg;
pub mod knn;
pub mod lisa;
pub mod mobility;
pub mod time;

pub use geo::{euclid, truncate_to_km, GeoError, KmCell, PlanarPoint};
pub use time::{to_hour_bucket, ClockWindow, HourBucket, TimeError, Timestamp, SLOT_MINUTES};
