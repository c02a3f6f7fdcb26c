//! Free-space path loss, distance-controlled EIRP, and the SNR/INR/SINR
//! chain.
//!
//! Everything is carried per-Hz so occupied bandwidth never enters: EIRP is
//! a spectral density (dBW/Hz at the interface) and noise is a PSD. All
//! interior arithmetic is in linear units; decibels appear only at the
//! public dB interfaces. The transmit array gain is folded into the
//! controlled EIRP, so an interfering beam contributes
//! `EIRP * (G_tx(theta)/G_tx_peak) * G_rx(phi) / (P_n * L)`.

use core::fmt;

use crate::antenna::AntennaPattern;
use crate::association::Cluster;
use crate::orbits::{is_overhead, SystemTag};
use crate::vec3::Vec3;
use crate::{db_to_lin, lin_to_db};

/// Per-system link configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub carrier_ghz: f64,
    /// Reference EIRP spectral density, dBW/Hz, reached at nadir from the
    /// system's highest shell.
    pub max_eirp_density_dbw_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Highest shell altitude of the system, meters.
    pub top_altitude_m: f64,
    /// Minimum serving elevation angle, degrees.
    pub eps_min_deg: f64,
}

impl LinkParams {
    pub fn primary_default() -> Self {
        LinkParams {
            carrier_ghz: 20.0,
            max_eirp_density_dbw_hz: -54.3,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 1.2,
            top_altitude_m: 570e3,
            eps_min_deg: 25.0,
        }
    }

    pub fn secondary_default() -> Self {
        LinkParams {
            carrier_ghz: 20.0,
            max_eirp_density_dbw_hz: -53.3,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 1.2,
            top_altitude_m: 630e3,
            eps_min_deg: 25.0,
        }
    }

    /// Receiver noise PSD including noise figure, W/Hz.
    pub fn noise_lin_w_hz(&self) -> f64 {
        db_to_lin(self.noise_psd_dbm_hz - 30.0 + self.noise_figure_db)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkError {
    NonPositiveDistance,
    NonPositiveFrequency,
    BelowMinElevation,
}

impl fmt::Display for LinkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkError::NonPositiveDistance => write!(f, "distance must be positive"),
            LinkError::NonPositiveFrequency => write!(f, "frequency must be positive"),
            LinkError::BelowMinElevation => {
                write!(f, "serving satellite below the minimum elevation angle")
            }
        }
    }
}

/// Free-space path loss in dB for `f_ghz` gigahertz over `d_m` meters.
pub fn free_space_path_loss_db(f_ghz: f64, d_m: f64) -> Result<f64, LinkError> {
    if !(d_m > 0.0) {
        return Err(LinkError::NonPositiveDistance);
    }
    if !(f_ghz > 0.0) {
        return Err(LinkError::NonPositiveFrequency);
    }
    Ok(32.45 + 20.0 * libm::log10(f_ghz) + 20.0 * libm::log10(d_m))
}

/// Distance-controlled EIRP density in dBW/Hz at slant distance `d_m`:
/// the reference density scaled so the received flux matches a nadir
/// transmission from the system's highest shell.
pub fn controlled_eirp_dbw_hz(p: &LinkParams, d_m: f64) -> Result<f64, LinkError> {
    if !(d_m > 0.0) {
        return Err(LinkError::NonPositiveDistance);
    }
    Ok(p.max_eirp_density_dbw_hz + 20.0 * libm::log10(d_m / p.top_altitude_m))
}

/// SINR from linear SNR and linear aggregate INR.
#[inline]
pub fn link_sinr_lin(snr_lin: f64, inr_lin: f64) -> f64 {
    snr_lin / (1.0 + inr_lin)
}

/// Spectral efficiency, bits/s/Hz.
#[inline]
pub fn spectral_efficiency(sinr_lin: f64) -> f64 {
    libm::log2(1.0 + sinr_lin)
}

/// Precomputed linear-domain constants for one system.
#[derive(Debug, Clone, Copy)]
struct SystemDerived {
    eirp_max_lin: f64,
    top_altitude_m: f64,
    /// FSPL as a linear factor is `k_fspl * d^2`.
    k_fspl: f64,
    noise_lin: f64,
    eps_min_deg: f64,
}

impl SystemDerived {
    fn new(p: &LinkParams) -> Self {
        SystemDerived {
            eirp_max_lin: db_to_lin(p.max_eirp_density_dbw_hz),
            top_altitude_m: p.top_altitude_m,
            k_fspl: db_to_lin(32.45) * p.carrier_ghz * p.carrier_ghz,
            noise_lin: p.noise_lin_w_hz(),
            eps_min_deg: p.eps_min_deg,
        }
    }

    #[inline]
    fn eirp_lin(&self, d_m: f64) -> f64 {
        let r = d_m / self.top_altitude_m;
        self.eirp_max_lin * r * r
    }
}

/// Shared link environment: antenna patterns plus both systems' parameters.
#[derive(Debug, Clone)]
pub struct LinkEnv {
    pub tx: AntennaPattern,
    pub rx: AntennaPattern,
    pub primary: LinkParams,
    pub secondary: LinkParams,
    d_primary: SystemDerived,
    d_secondary: SystemDerived,
    tx_peak_lin: f64,
    rx_peak_lin: f64,
}

impl LinkEnv {
    pub fn new(tx: AntennaPattern, rx: AntennaPattern, primary: LinkParams, secondary: LinkParams) -> Self {
        LinkEnv {
            d_primary: SystemDerived::new(&primary),
            d_secondary: SystemDerived::new(&secondary),
            tx_peak_lin: db_to_lin(tx.peak_gain_dbi),
            rx_peak_lin: db_to_lin(rx.peak_gain_dbi),
            tx,
            rx,
            primary,
            secondary,
        }
    }

    pub fn defaults() -> Self {
        LinkEnv::new(
            AntennaPattern::tx_default(),
            AntennaPattern::rx_default(),
            LinkParams::primary_default(),
            LinkParams::secondary_default(),
        )
    }

    pub fn params(&self, system: SystemTag) -> &LinkParams {
        match system {
            SystemTag::Primary => &self.primary,
            SystemTag::Secondary => &self.secondary,
        }
    }

    fn derived(&self, system: SystemTag) -> &SystemDerived {
        match system {
            SystemTag::Primary => &self.d_primary,
            SystemTag::Secondary => &self.d_secondary,
        }
    }

    pub fn eps_min_deg(&self, system: SystemTag) -> f64 {
        self.derived(system).eps_min_deg
    }

    /// Transmit gain of an interfering beam relative to boresight, as a
    /// linear ratio (the absolute gain is folded into EIRP).
    #[inline]
    fn tx_rel_lin(&self, off_deg: f64) -> f64 {
        self.tx.gain_lin(off_deg) / self.tx_peak_lin
    }

    /// Linear SNR of `user` served by a satellite at `sat` whose beam is
    /// centered on `cell`, all ECEF meters.
    ///
    /// Fails when the satellite is below the serving system's minimum
    /// elevation angle anywhere over the user's cluster.
    pub fn link_snr(
        &self,
        system: SystemTag,
        user: Vec3,
        sat: Vec3,
        cell: Vec3,
        cluster: &Cluster,
    ) -> Result<f64, LinkError> {
        let d = self.derived(system);
        if !is_overhead(sat, cluster, d.eps_min_deg) {
            return Err(LinkError::BelowMinElevation);
        }
        Ok(self.link_snr_unchecked(system, user, sat, cell))
    }

    /// SNR without the elevation check; callers gate on overhead membership.
    #[inline]
    pub fn link_snr_unchecked(&self, system: SystemTag, user: Vec3, sat: Vec3, cell: Vec3) -> f64 {
        let d = self.derived(system);
        let d_sc = (cell - sat).norm();
        let mut g_tx_rel = 1.0;
        if user != cell {
            let off = (cell - sat).angle_to(user - sat).to_degrees();
            g_tx_rel = self.tx_rel_lin(off);
        }
        let d_us_sq = (user - sat).norm_sq();
        d.eirp_lin(d_sc) * g_tx_rel * self.rx_peak_lin / (d.noise_lin * d.k_fspl * d_us_sq)
    }

    /// Linear INR contributed by a single interfering beam.
    ///
    /// `interferer_system` transmits from `int_sat` toward `cell`; the
    /// victim user at `user` points its receive beam at `serving_sat` and
    /// belongs to the other system.
    #[inline]
    pub fn beam_inr(
        &self,
        interferer_system: SystemTag,
        user: Vec3,
        serving_sat: Vec3,
        int_sat: Vec3,
        cell: Vec3,
    ) -> f64 {
        let victim = match interferer_system {
            SystemTag::Primary => SystemTag::Secondary,
            SystemTag::Secondary => SystemTag::Primary,
        };
        let it = self.derived(interferer_system);
        let vt = self.derived(victim);
        let to_cell = cell - int_sat;
        let to_user = user - int_sat;
        let d_sc = to_cell.norm();
        let off_tx = to_cell.angle_to(to_user).to_degrees();
        let off_rx = (serving_sat - user).angle_to(int_sat - user).to_degrees();
        let num = it.eirp_lin(d_sc) * self.tx_rel_lin(off_tx) * self.rx.gain_lin(off_rx);
        num / (vt.noise_lin * vt.k_fspl * to_user.norm_sq())
    }

    /// Linear INR at one victim user from one interfering satellite serving
    /// one cluster: the sum over the scheduled co-channel beams.
    ///
    /// `active_cells` must be ascending (as produced by `schedule_beams`);
    /// the accumulation order is part of the engine's determinism contract.
    pub fn satellite_cluster_inr(
        &self,
        interferer_system: SystemTag,
        user: Vec3,
        user_color: u8,
        serving_sat: Vec3,
        int_sat: Vec3,
        served_cluster: &Cluster,
        active_cells: &[u16],
    ) -> f64 {
        let mut sum = 0.0;
        for &ci in active_cells {
            let cell = &served_cluster.cells[ci as usize];
            if cell.color != user_color {
                continue;
            }
            sum += self.beam_inr(interferer_system, user, serving_sat, int_sat, cell.center_ecef);
        }
        sum
    }
}

/// Convenience dB views of the linear chain, for traces and spot checks.
pub fn snr_db(snr_lin: f64) -> f64 {
    lin_to_db(snr_lin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{build_grid, RegionConfig};
    use crate::EARTH_RADIUS_M;

    #[test]
    fn fspl_reference_value() {
        // 32.45 + 20*log10(20) + 20*log10(550e3), evaluated independently.
        let v = free_space_path_loss_db(20.0, 550e3).unwrap();
        assert!((v - 173.2778537031645).abs() < 1e-9);
    }

    #[test]
    fn fspl_rejects_non_positive_inputs() {
        assert!(free_space_path_loss_db(0.0, 1.0).is_err());
        assert!(free_space_path_loss_db(20.0, 0.0).is_err());
        assert!(free_space_path_loss_db(20.0, -5.0).is_err());
    }

    #[test]
    fn controlled_eirp_example() {
        let p = LinkParams::primary_default();
        let v = controlled_eirp_dbw_hz(&p, 550e3).unwrap();
        assert!((v - -54.61024332356495).abs() < 1e-9);
        // At the reference altitude the density is the configured maximum.
        assert!((controlled_eirp_dbw_hz(&p, 570e3).unwrap() - -54.3).abs() < 1e-12);
    }

    #[test]
    fn noise_floor_with_figure() {
        let p = LinkParams::primary_default();
        // -174 dBm/Hz = -204 dBW/Hz, plus 1.2 dB noise figure.
        assert!((lin_to_db(p.noise_lin_w_hz()) - -202.8).abs() < 1e-9);
    }

    fn one_cluster() -> crate::association::CellGrid {
        build_grid(&RegionConfig {
            center_lat_deg: 0.0,
            center_lon_deg: 0.0,
            cell_radius_m: 10_000.0,
            cluster_offsets: alloc::vec![(0, 0)],
            priorities: alloc::vec![1],
        })
        .unwrap()
    }

    #[test]
    fn snr_at_nadir_from_top_shell() {
        let grid = one_cluster();
        let cl = &grid.clusters[0];
        let user = cl.cells[0].center_ecef;
        let sat = user.normalized() * (EARTH_RADIUS_M + 570e3);
        let env = LinkEnv::defaults();
        let snr = env.link_snr(SystemTag::Primary, user, sat, user, cl).unwrap();
        // -54.3 + 30 - FSPL(20 GHz, 570 km) + 202.8, evaluated independently.
        assert!((lin_to_db(snr) - 4.911902973270571).abs() < 1e-9, "snr {}", lin_to_db(snr));
    }

    #[test]
    fn snr_errors_below_min_elevation() {
        let grid = one_cluster();
        let cl = &grid.clusters[0];
        let user = cl.cells[0].center_ecef;
        let sat = user.rotate_z(40f64.to_radians()).normalized() * (EARTH_RADIUS_M + 570e3);
        let env = LinkEnv::defaults();
        assert_eq!(
            env.link_snr(SystemTag::Primary, user, sat, user, cl).unwrap_err(),
            LinkError::BelowMinElevation
        );
    }

    #[test]
    fn sinr_combines_noise_and_interference() {
        // SNR 3.31 with aggregate INR 0.5 gives 3.31/1.5.
        let s = link_sinr_lin(3.31, 0.5);
        assert!((s - 2.2066666666666666).abs() < 1e-15);
        // No interference: SINR equals SNR.
        assert_eq!(link_sinr_lin(3.31, 0.0), 3.31);
    }

    #[test]
    fn beam_inr_matches_snr_in_degenerate_geometry() {
        // Interferer co-located with the serving satellite, beam centered on
        // the victim's own position: every factor in the INR chain matches
        // the SNR chain except the system constants, so with identical
        // parameters the two values coincide.
        let grid = one_cluster();
        let cl = &grid.clusters[0];
        let user = cl.cells[0].center_ecef;
        let sat = user.normalized() * (EARTH_RADIUS_M + 570e3);
        let mut secondary = LinkParams::secondary_default();
        secondary.max_eirp_density_dbw_hz = -54.3;
        secondary.top_altitude_m = 570e3;
        let env = LinkEnv::new(
            AntennaPattern::tx_default(),
            AntennaPattern::rx_default(),
            LinkParams::primary_default(),
            secondary,
        );
        let snr = env.link_snr(SystemTag::Primary, user, sat, user, cl).unwrap();
        let inr = env.beam_inr(SystemTag::Secondary, user, sat, sat, user);
        assert!((snr - inr).abs() <= 1e-15 * snr);
    }

    #[test]
    fn beam_inr_falls_off_boresight() {
        let grid = one_cluster();
        let cl = &grid.clusters[0];
        let user = cl.cells[0].center_ecef;
        let serving = user.normalized() * (EARTH_RADIUS_M + 570e3);
        let env = LinkEnv::defaults();
        // The interferer's beam targets a far cell; pointing loss reduces
        // INR relative to a beam centered on the user.
        let int_sat = user.rotate_z(0.02).normalized() * (EARTH_RADIUS_M + 630e3);
        let on_user = env.beam_inr(SystemTag::Secondary, user, serving, int_sat, user);
        let far_cell = cl.cells[100].center_ecef;
        let off_user = env.beam_inr(SystemTag::Secondary, user, serving, int_sat, far_cell);
        assert!(off_user < on_user);
    }

    #[test]
    fn cluster_inr_sums_only_co_channel_beams() {
        let grid = one_cluster();
        let cl = &grid.clusters[0];
        let user = cl.cells[0].center_ecef;
        let user_color = cl.cells[0].color;
        let serving = user.normalized() * (EARTH_RADIUS_M + 570e3);
        let int_sat = user.rotate_z(0.03).normalized() * (EARTH_RADIUS_M + 630e3);
        let env = LinkEnv::defaults();
        let active: Vec<u16> = (0..8).collect();
        let total = env.satellite_cluster_inr(
            SystemTag::Secondary,
            user,
            user_color,
            serving,
            int_sat,
            cl,
            &active,
        );
        let mut manual = 0.0;
        for &ci in &active {
            if cl.cells[ci as usize].color == user_color {
                manual += env.beam_inr(
                    SystemTag::Secondary,
                    user,
                    serving,
                    int_sat,
                    cl.cells[ci as usize].center_ecef,
                );
            }
        }
        assert_eq!(total, manual);
        assert!(total > 0.0);
    }

    #[test]
    fn spectral_efficiency_reference_points() {
        assert_eq!(spectral_efficiency(0.0), 0.0);
        assert!((spectral_efficiency(1.0) - 1.0).abs() < 1e-15);
        assert!((spectral_efficiency(3.0) - 2.0).abs() < 1e-15);
    }
}
