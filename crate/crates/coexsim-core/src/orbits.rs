//! Walker-Delta constellation construction and circular-orbit propagation.
//!
//! Shells are built deterministically: planes equally spaced in RAAN over
//! 360 degrees, satellites equally spaced in mean anomaly within a plane,
//! and an inter-plane phase offset of `F * 360 / (planes * sats_per_plane)`
//! degrees per plane. Propagation is Keplerian circular over a spherical
//! Earth, optionally rotated into ECEF by the Earth rotation rate.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};
use core::fmt;

use crate::association::CellGrid;
use crate::vec3::Vec3;
use crate::{EARTH_RADIUS_M, EARTH_ROTATION_RAD_S, MU_EARTH};

/// Which constellation a satellite or link belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemTag {
    Primary,
    Secondary,
}

impl SystemTag {
    pub fn label(self) -> &'static str {
        match self {
            SystemTag::Primary => "primary",
            SystemTag::Secondary => "secondary",
        }
    }
}

/// One Walker-Delta shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellParams {
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub num_planes: u32,
    pub sats_per_plane: u32,
    /// Walker phasing factor F; inter-plane anomaly offset is
    /// `F * 360 / total_sats` degrees per plane step.
    pub phasing_factor: u32,
}

impl ShellParams {
    pub fn total_sats(&self) -> usize {
        self.num_planes as usize * self.sats_per_plane as usize
    }
}

/// Optional per-shell epoch offsets applied at build time.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShellOffsets {
    pub raan_deg: f64,
    pub anomaly_deg: f64,
}

/// Precomputed per-shell propagation constants.
#[derive(Debug, Clone, Copy)]
struct ShellDerived {
    radius_m: f64,
    mean_motion_rad_s: f64,
    cos_inc: f64,
    sin_inc: f64,
}

/// Per-satellite orbital elements (circular orbit).
#[derive(Debug, Clone, Copy)]
pub struct SatElements {
    pub shell: usize,
    pub raan_rad: f64,
    pub anomaly0_rad: f64,
}

/// A full constellation: shells plus per-satellite elements.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub tag: SystemTag,
    pub shells: Vec<ShellParams>,
    pub sats: Vec<SatElements>,
    derived: Vec<ShellDerived>,
}

/// Propagated satellite state at one instant.
#[derive(Debug, Clone, Copy)]
pub struct SatelliteState {
    pub sat: usize,
    pub shell: usize,
    /// Position in meters, ECEF (or inertial when Earth rotation is off).
    pub pos_m: Vec3,
    /// Velocity in m/s, same frame as `pos_m`.
    pub vel_mps: Vec3,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrbitError {
    NoShells,
    ZeroPlanes { shell: usize },
    ZeroSatsPerPlane { shell: usize },
    BadAltitude { shell: usize },
    BadPhasing { shell: usize },
    GroundAtOrigin,
}

impl fmt::Display for OrbitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitError::NoShells => write!(f, "constellation has no shells"),
            OrbitError::ZeroPlanes { shell } => write!(f, "shell {shell} has zero planes"),
            OrbitError::ZeroSatsPerPlane { shell } => {
                write!(f, "shell {shell} has zero satellites per plane")
            }
            OrbitError::BadAltitude { shell } => {
                write!(f, "shell {shell} has non-positive altitude")
            }
            OrbitError::BadPhasing { shell } => {
                write!(f, "shell {shell} phasing factor must be < num_planes")
            }
            OrbitError::GroundAtOrigin => write!(f, "ground position at the origin"),
        }
    }
}

/// Orbital period of a circular orbit at the given altitude, seconds.
pub fn orbital_period_s(altitude_m: f64) -> f64 {
    let r = EARTH_RADIUS_M + altitude_m;
    TAU * libm::sqrt(r * r * r / MU_EARTH)
}

/// Build a Walker-Delta constellation with zero epoch offsets.
pub fn build_walker_delta(shells: &[ShellParams], tag: SystemTag) -> Result<Constellation, OrbitError> {
    let offsets = alloc::vec![ShellOffsets::default(); shells.len()];
    build_walker_delta_with_offsets(shells, &offsets, tag)
}

/// Build a Walker-Delta constellation with per-shell RAAN/anomaly offsets.
///
/// Satellite ids are assigned sequentially: shells in input order, planes
/// major, in-plane index minor.
pub fn build_walker_delta_with_offsets(
    shells: &[ShellParams],
    offsets: &[ShellOffsets],
    tag: SystemTag,
) -> Result<Constellation, OrbitError> {
    if shells.is_empty() {
        return Err(OrbitError::NoShells);
    }
    let mut sats = Vec::new();
    let mut derived = Vec::with_capacity(shells.len());
    for (si, sh) in shells.iter().enumerate() {
        if sh.num_planes == 0 {
            return Err(OrbitError::ZeroPlanes { shell: si });
        }
        if sh.sats_per_plane == 0 {
            return Err(OrbitError::ZeroSatsPerPlane { shell: si });
        }
        if !(sh.altitude_m > 0.0) {
            return Err(OrbitError::BadAltitude { shell: si });
        }
        if sh.phasing_factor >= sh.num_planes {
            return Err(OrbitError::BadPhasing { shell: si });
        }
        let off = offsets.get(si).copied().unwrap_or_default();
        let radius = EARTH_RADIUS_M + sh.altitude_m;
        let inc = sh.inclination_deg.to_radians();
        derived.push(ShellDerived {
            radius_m: radius,
            mean_motion_rad_s: libm::sqrt(MU_EARTH / (radius * radius * radius)),
            cos_inc: libm::cos(inc),
            sin_inc: libm::sin(inc),
        });
        let total = sh.total_sats() as f64;
        let phase_step = sh.phasing_factor as f64 * TAU / total;
        for plane in 0..sh.num_planes {
            let raan = off.raan_deg.to_radians() + plane as f64 * TAU / sh.num_planes as f64;
            for k in 0..sh.sats_per_plane {
                let anomaly0 = off.anomaly_deg.to_radians()
                    + k as f64 * TAU / sh.sats_per_plane as f64
                    + plane as f64 * phase_step;
                sats.push(SatElements { shell: si, raan_rad: raan, anomaly0_rad: anomaly0 });
            }
        }
    }
    Ok(Constellation { tag, shells: shells.to_vec(), sats, derived })
}

impl Constellation {
    pub fn len(&self) -> usize {
        self.sats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sats.is_empty()
    }

    /// Orbital radius (meters from Earth center) of one satellite.
    pub fn radius_m(&self, sat: usize) -> f64 {
        self.derived[self.sats[sat].shell].radius_m
    }

    /// Orbital period of the shell a satellite belongs to, seconds.
    pub fn period_s(&self, sat: usize) -> f64 {
        TAU / self.derived[self.sats[sat].shell].mean_motion_rad_s
    }

    /// State of one satellite at `t_s` seconds after epoch.
    ///
    /// With `earth_rotation` the inertial state is rotated by the Earth
    /// rotation angle into ECEF; without it the inertial frame is returned
    /// directly (useful for closure tests over one orbital period).
    pub fn state_at(&self, sat: usize, t_s: f64, earth_rotation: bool) -> SatelliteState {
        let el = &self.sats[sat];
        let d = &self.derived[el.shell];
        let u = el.anomaly0_rad + d.mean_motion_rad_s * t_s;
        let (sin_u, cos_u) = (libm::sin(u), libm::cos(u));
        let (sin_o, cos_o) = (libm::sin(el.raan_rad), libm::cos(el.raan_rad));
        // Rz(raan) * Rx(inc) * [r cos(u), r sin(u), 0]
        let r = d.radius_m;
        let pos_i = Vec3::new(
            r * (cos_o * cos_u - sin_o * sin_u * d.cos_inc),
            r * (sin_o * cos_u + cos_o * sin_u * d.cos_inc),
            r * sin_u * d.sin_inc,
        );
        let v = r * d.mean_motion_rad_s;
        let vel_i = Vec3::new(
            v * (-cos_o * sin_u - sin_o * cos_u * d.cos_inc),
            v * (-sin_o * sin_u + cos_o * cos_u * d.cos_inc),
            v * cos_u * d.sin_inc,
        );
        if !earth_rotation {
            return SatelliteState { sat, shell: el.shell, pos_m: pos_i, vel_mps: vel_i };
        }
        let theta = EARTH_ROTATION_RAD_S * t_s;
        let pos = pos_i.rotate_z(-theta);
        let vel_rot = vel_i.rotate_z(-theta);
        // Transport term: d/dt Rz(-theta) applied to the inertial position.
        let vel = Vec3::new(
            vel_rot.x + EARTH_ROTATION_RAD_S * pos.y,
            vel_rot.y - EARTH_ROTATION_RAD_S * pos.x,
            vel_rot.z,
        );
        SatelliteState { sat, shell: el.shell, pos_m: pos, vel_mps: vel }
    }

    /// Propagate every satellite to `t_s` seconds after epoch.
    pub fn propagate_ecef(&self, t_s: f64, earth_rotation: bool) -> Vec<SatelliteState> {
        (0..self.len()).map(|i| self.state_at(i, t_s, earth_rotation)).collect()
    }
}

/// Elevation angle in degrees of `sat` as seen from `ground` (both ECEF
/// meters), measured from the local horizontal plane. Range [-90, 90].
pub fn elevation_angle_deg(ground: Vec3, sat: Vec3) -> Result<f64, OrbitError> {
    let g_norm = ground.norm();
    if g_norm < 1.0 {
        return Err(OrbitError::GroundAtOrigin);
    }
    let v = sat - ground;
    let sin_el = ground.dot(v) / (g_norm * v.norm());
    Ok(libm::asin(sin_el.clamp(-1.0, 1.0)).to_degrees())
}

/// Central angle (radians) at which elevation drops to `eps_deg` for a
/// satellite at orbital radius `r_m`. Elevation is strictly decreasing in
/// the central angle, so `elevation >= eps` iff `psi <= psi_threshold`.
fn psi_threshold(eps_deg: f64, r_m: f64) -> f64 {
    let eps = eps_deg.to_radians();
    FRAC_PI_2 - eps - libm::asin((EARTH_RADIUS_M * libm::cos(eps) / r_m).clamp(-1.0, 1.0))
}

// Guard band (radians) between the central-angle prefilter and the exact
// per-cell elevation test, so rounding can never disagree across paths.
const PSI_GUARD_RAD: f64 = 1e-9;

/// True when the satellite's elevation is at least `eps_min_deg` at every
/// cell center of the cluster.
pub fn is_overhead(sat_pos: Vec3, cluster: &crate::association::Cluster, eps_min_deg: f64) -> bool {
    let r = sat_pos.norm();
    let psi_th = psi_threshold(eps_min_deg, r);
    let cos_psi = cluster.center_ecef.dot(sat_pos) / (cluster.center_ecef.norm() * r);
    let psi = libm::acos(cos_psi.clamp(-1.0, 1.0));
    if psi + cluster.angular_radius_rad <= psi_th - PSI_GUARD_RAD {
        return true;
    }
    if psi - cluster.angular_radius_rad >= psi_th + PSI_GUARD_RAD {
        return false;
    }
    cluster.cells.iter().all(|c| {
        elevation_angle_deg(c.center_ecef, sat_pos).map_or(false, |e| e >= eps_min_deg)
    })
}

/// Per-cluster overhead sets: indices (ascending) of the satellites whose
/// minimum elevation over all of the cluster's cell centers is at least
/// `eps_min_deg`.
pub fn overhead_sets(states: &[SatelliteState], grid: &CellGrid, eps_min_deg: f64) -> Vec<Vec<usize>> {
    grid.clusters
        .iter()
        .map(|cl| {
            states
                .iter()
                .enumerate()
                .filter(|(_, st)| is_overhead(st.pos_m, cl, eps_min_deg))
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}
