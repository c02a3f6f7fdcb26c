//! Phased-array gain pattern and boresight offset geometry.
//!
//! The pattern is a quadratic mainlobe with two floors:
//!
//! `G(theta) = max(peak - 3*(theta/theta_3db)^2, max(peak - sidelobe_floor, far_floor))`
//!
//! which is monotone non-increasing in the off-boresight angle and hits
//! exactly `peak - 3` dB at `theta_3db`. Written with the conventional 12
//! coefficient this is `peak - 12*(theta/W)^2` for a full half-power width
//! `W = 2*theta_3db`; the parameter stored here is the half-power offset.

use core::fmt;

use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub peak_gain_dbi: f64,
    pub theta_3db_deg: f64,
    /// Sidelobe suppression relative to peak, dB (positive).
    pub sidelobe_floor_db: f64,
    /// Absolute far-sidelobe floor, dBi.
    pub far_floor_dbi: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AntennaError {
    NonPositiveBeamwidth,
    DegenerateGeometry,
}

impl fmt::Display for AntennaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AntennaError::NonPositiveBeamwidth => write!(f, "3 dB beamwidth must be positive"),
            AntennaError::DegenerateGeometry => {
                write!(f, "boresight offset undefined for coincident points")
            }
        }
    }
}

impl AntennaPattern {
    pub fn new(
        peak_gain_dbi: f64,
        theta_3db_deg: f64,
        sidelobe_floor_db: f64,
        far_floor_dbi: f64,
    ) -> Result<Self, AntennaError> {
        if !(theta_3db_deg > 0.0) {
            return Err(AntennaError::NonPositiveBeamwidth);
        }
        Ok(AntennaPattern { peak_gain_dbi, theta_3db_deg, sidelobe_floor_db, far_floor_dbi })
    }

    /// Satellite transmit array (64x64 elements): 36 dBi peak, 1.6 degree
    /// 3 dB beamwidth.
    pub fn tx_default() -> Self {
        AntennaPattern {
            peak_gain_dbi: 36.0,
            theta_3db_deg: 1.6,
            sidelobe_floor_db: 30.0,
            far_floor_dbi: 0.0,
        }
    }

    /// User terminal receive array (32x32 elements): 30 dBi peak, 3.2 degree
    /// 3 dB beamwidth.
    pub fn rx_default() -> Self {
        AntennaPattern {
            peak_gain_dbi: 30.0,
            theta_3db_deg: 3.2,
            sidelobe_floor_db: 30.0,
            far_floor_dbi: 0.0,
        }
    }

    /// Gain in dBi at `off_deg` degrees off boresight, 0 <= off_deg <= 180.
    #[inline]
    pub fn gain_dbi(&self, off_deg: f64) -> f64 {
        debug_assert!((0.0..=180.0).contains(&off_deg), "off-boresight angle {off_deg}");
        let t = off_deg / self.theta_3db_deg;
        let main = self.peak_gain_dbi - 3.0 * t * t;
        let floor = (self.peak_gain_dbi - self.sidelobe_floor_db).max(self.far_floor_dbi);
        main.max(floor)
    }

    /// Gain as a linear power ratio.
    #[inline]
    pub fn gain_lin(&self, off_deg: f64) -> f64 {
        crate::db_to_lin(self.gain_dbi(off_deg))
    }

    /// Peak gain as a linear power ratio.
    #[inline]
    pub fn peak_lin(&self) -> f64 {
        crate::db_to_lin(self.peak_gain_dbi)
    }
}

/// Angle in degrees at `apex` between the boresight direction (toward
/// `boresight`) and the direction toward `object`. All points ECEF meters.
pub fn boresight_offset_angle_deg(
    apex: Vec3,
    boresight: Vec3,
    object: Vec3,
) -> Result<f64, AntennaError> {
    let a = boresight - apex;
    let b = object - apex;
    if a.norm_sq() == 0.0 || b.norm_sq() == 0.0 {
        return Err(AntennaError::DegenerateGeometry);
    }
    Ok(a.angle_to(b).to_degrees())
}
