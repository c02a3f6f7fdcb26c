//! Core engine for simulating spectral coexistence between two large LEO
//! constellations sharing downlink spectrum over a common ground region.
//!
//! The crate is organized around the pipeline a run follows:
//!
//! * [`orbits`]: Walker-Delta shell construction, circular-orbit propagation
//!   into ECEF, elevation geometry, and per-cluster overhead sets.
//! * [`antenna`]: quadratic phased-array gain pattern with sidelobe floors
//!   and boresight offset geometry.
//! * [`association`]: hexagonal cell grid, satellite-to-cluster association
//!   policies, and the rotating beam schedule.
//! * [`linkbudget`]: free-space path loss, distance-based EIRP control, and
//!   the SNR / INR / SINR chain, all carried in linear units internally.
//! * [`protection`]: sliding-window interference accounting and the
//!   effective per-handover threshold the solver must honor.
//! * [`solver`]: Lagrangian relaxation of the constrained association
//!   problem with subgradient multiplier updates, greedy feasibility repair,
//!   and a brute-force oracle for small instances.
//! * [`metrics`]: violation rates, utilization, and empirical CDFs.
//! * [`engine`]: the slot-stepped simulation loop tying it all together.
//!
//! The crate is `no_std` (with `alloc`); all IO, configuration parsing, and
//! file formats live in the companion `coexsim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod antenna;
pub mod association;
pub mod engine;
pub mod linkbudget;
pub mod metrics;
pub mod orbits;
pub mod protection;
pub mod solver;
pub mod vec3;

pub use vec3::Vec3;

/// Mean Earth radius in meters (spherical Earth model).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Geocentric gravitational constant, m^3/s^2.
pub const MU_EARTH: f64 = 3.986_004_418e14;

/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;

/// Decibels to linear power ratio.
#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Linear power ratio to decibels. Zero maps to `-inf`.
#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * libm::log10(lin)
}
