//! Scenario files: TOML schema, validation, CLI overrides, and construction
//! of the simulation world.
//!
//! A scenario is a single TOML document; unknown keys are rejected. Two
//! presets ship inside the binary: `starlink_kuiper_texas` (the fully
//! commented reference) and `small_region` (three clusters, sized for quick
//! runs). `--scenario` accepts either a preset name or a path.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use coexsim_core::antenna::AntennaPattern;
use coexsim_core::association::{build_grid, RegionConfig, CELLS_PER_CLUSTER};
use coexsim_core::engine::{ExtraUser, Mode, Policy, RunConfig, World};
use coexsim_core::linkbudget::{LinkEnv, LinkParams};
use coexsim_core::orbits::{build_walker_delta, ShellParams, SystemTag};
use coexsim_core::protection::ProtectionConfig;
use coexsim_core::solver::SolverConfig;
use coexsim_core::vec3::Vec3;
use coexsim_core::EARTH_RADIUS_M;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// Fully commented reference scenario, also the default.
pub const PRESET_DEFAULT: &str = include_str!("../scenarios/starlink_kuiper_texas.toml");
/// Three-cluster preset sized for quick protected-mode runs.
pub const PRESET_SMALL: &str = include_str!("../scenarios/small_region.toml");

/// Beam counts accepted without `allow_nonstandard`.
pub const STANDARD_BEAM_COUNTS: [u32; 4] = [8, 16, 24, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeKey {
    Baseline,
    Protected,
}

impl ModeKey {
    pub fn to_engine(self) -> Mode {
        match self {
            ModeKey::Baseline => Mode::Baseline,
            ModeKey::Protected => Mode::Protected,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModeKey::Baseline => "baseline",
            ModeKey::Protected => "protected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKey {
    /// Highest elevation at the cluster center.
    He,
    /// Maximum remaining contact time.
    Mct,
}

impl PolicyKey {
    pub fn to_engine(self) -> Policy {
        match self {
            PolicyKey::He => Policy::HighestElevation,
            PolicyKey::Mct => Policy::MaxContact,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolicyKey::He => "he",
            PolicyKey::Mct => "mct",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub mode: ModeKey,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default = "default_slot_s")]
    pub slot_s: f64,
    #[serde(default = "default_true")]
    pub earth_rotation: bool,
    pub region: RegionSection,
    pub primary: SystemSection,
    pub secondary: SystemSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub beams: BeamsSection,
    pub protection: ProtectionSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub users: UsersSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    #[serde(default = "default_cell_radius_m")]
    pub cell_radius_m: f64,
    pub cluster_offsets: Vec<(i32, i32)>,
    pub priorities: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "default_policy")]
    pub policy: PolicyKey,
    pub shells: Vec<ShellRow>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellRow {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub planes: u32,
    pub sats_per_plane: u32,
    #[serde(default = "default_phasing")]
    pub phasing_factor: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub carrier_ghz: f64,
    pub tx_peak_gain_dbi: f64,
    pub tx_theta_3db_deg: f64,
    pub rx_peak_gain_dbi: f64,
    pub rx_theta_3db_deg: f64,
    pub sidelobe_floor_db: f64,
    pub far_floor_dbi: f64,
    pub primary_eirp_density_dbw_hz: f64,
    pub secondary_eirp_density_dbw_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub eps_min_deg: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            carrier_ghz: 20.0,
            tx_peak_gain_dbi: 36.0,
            tx_theta_3db_deg: 1.6,
            rx_peak_gain_dbi: 30.0,
            rx_theta_3db_deg: 3.2,
            sidelobe_floor_db: 30.0,
            far_floor_dbi: 0.0,
            primary_eirp_density_dbw_hz: -54.3,
            secondary_eirp_density_dbw_hz: -53.3,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 1.2,
            eps_min_deg: 25.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamsSection {
    pub count: u32,
    pub allow_nonstandard: bool,
}

impl Default for BeamsSection {
    fn default() -> Self {
        BeamsSection { count: 8, allow_nonstandard: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionSection {
    pub inr_avg_th_db: f64,
    pub inr_max_th_db: f64,
    #[serde(default = "default_th_s")]
    pub th_s: f64,
    #[serde(default = "default_tw_s")]
    pub tw_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub step_a: f64,
    pub step_b: f64,
    pub rel_tol: f64,
    pub patience: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            max_iters: d.max_iters,
            step_a: d.step_a,
            step_b: d.step_b,
            rel_tol: d.rel_tol,
            patience: d.patience,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersSection {
    pub extras_per_cluster_primary: usize,
    pub extras_per_cluster_secondary: usize,
    pub record_link_trace: bool,
}

impl Default for UsersSection {
    fn default() -> Self {
        UsersSection {
            extras_per_cluster_primary: 0,
            extras_per_cluster_secondary: 0,
            record_link_trace: false,
        }
    }
}

fn default_slot_s() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_cell_radius_m() -> f64 {
    10_000.0
}

fn default_policy() -> PolicyKey {
    PolicyKey::He
}

fn default_phasing() -> u32 {
    1
}

fn default_th_s() -> f64 {
    15.0
}

fn default_tw_s() -> f64 {
    10.0
}

/// Scenario keys that may be overridden from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<ModeKey>,
    pub policy_primary: Option<PolicyKey>,
    pub policy_secondary: Option<PolicyKey>,
    pub beams: Option<u32>,
    pub inr_avg_th_db: Option<f64>,
    pub inr_max_th_db: Option<f64>,
    pub th_s: Option<f64>,
    pub tw_s: Option<f64>,
    pub duration_s: Option<f64>,
    pub seed: Option<u64>,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
}

/// Everything a run needs, built from one scenario.
pub struct Built {
    pub world: World,
    pub run_cfg: RunConfig,
    pub extras: Vec<ExtraUser>,
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).context("parsing scenario")?;
        let sc = Scenario { file };
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Resolves a `--scenario` argument: a bundled preset name or a path.
    pub fn resolve(arg: &str) -> Result<Self> {
        match arg {
            "starlink_kuiper_texas" => Self::from_toml(PRESET_DEFAULT),
            "small_region" => Self::from_toml(PRESET_SMALL),
            path => Self::load(Path::new(path)),
        }
    }

    /// Applies CLI overrides, then re-validates.
    pub fn apply(&mut self, ov: &Overrides) -> Result<()> {
        let f = &mut self.file;
        if let Some(v) = ov.mode {
            f.mode = v;
        }
        if let Some(v) = ov.policy_primary {
            f.primary.policy = v;
        }
        if let Some(v) = ov.policy_secondary {
            f.secondary.policy = v;
        }
        if let Some(v) = ov.beams {
            f.beams.count = v;
        }
        if let Some(v) = ov.inr_avg_th_db {
            f.protection.inr_avg_th_db = v;
        }
        if let Some(v) = ov.inr_max_th_db {
            f.protection.inr_max_th_db = v;
        }
        if let Some(v) = ov.th_s {
            f.protection.th_s = v;
        }
        if let Some(v) = ov.tw_s {
            f.protection.tw_s = v;
        }
        if let Some(v) = ov.duration_s {
            f.duration_s = v;
        }
        if let Some(v) = ov.seed {
            f.seed = v;
        }
        self.validate()
    }

    /// Handover period in slots.
    pub fn horizon_slots(&self) -> usize {
        to_slots(self.file.protection.th_s, self.file.slot_s)
    }

    /// Trailing history window in slots.
    pub fn window_slots(&self) -> usize {
        to_slots(self.file.protection.tw_s, self.file.slot_s)
    }

    /// Checks every invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let f = &self.file;
        let mut errs: Vec<String> = Vec::new();
        let mut err = |msg: String| errs.push(msg);

        if !(f.slot_s > 0.0) || !f.slot_s.is_finite() {
            err(format!("slot_s must be positive and finite, got {}", f.slot_s));
        } else {
            if !(f.protection.th_s > 0.0) {
                err(format!("protection.th_s must be positive, got {}", f.protection.th_s));
            } else if !whole_slots(f.protection.th_s, f.slot_s) || self.horizon_slots() == 0 {
                err(format!(
                    "protection.th_s = {} is not a whole number of {} s slots",
                    f.protection.th_s, f.slot_s
                ));
            }
            if !(f.protection.tw_s >= 0.0) {
                err(format!("protection.tw_s must be nonnegative, got {}", f.protection.tw_s));
            } else if !whole_slots(f.protection.tw_s, f.slot_s) {
                err(format!(
                    "protection.tw_s = {} is not a whole number of {} s slots",
                    f.protection.tw_s, f.slot_s
                ));
            }
        }
        if !(f.duration_s >= f.protection.th_s) {
            err(format!(
                "duration_s = {} must cover at least one handover period ({} s)",
                f.duration_s, f.protection.th_s
            ));
        }
        if f.protection.inr_avg_th_db.is_nan() || !f.protection.inr_avg_th_db.is_finite() {
            err("protection.inr_avg_th_db must be finite".into());
        }
        if f.protection.inr_max_th_db.is_nan() {
            err("protection.inr_max_th_db must not be NaN".into());
        }

        if !STANDARD_BEAM_COUNTS.contains(&f.beams.count) {
            if f.beams.allow_nonstandard {
                log::warn!(
                    "nonstandard beam count {} (standard: {:?})",
                    f.beams.count,
                    STANDARD_BEAM_COUNTS
                );
            } else {
                err(format!(
                    "beams.count must be one of {:?} (or set beams.allow_nonstandard), got {}",
                    STANDARD_BEAM_COUNTS, f.beams.count
                ));
            }
        }
        if f.beams.count == 0 || f.beams.count as usize > CELLS_PER_CLUSTER {
            err(format!("beams.count must be in 1..={CELLS_PER_CLUSTER}, got {}", f.beams.count));
        }

        if !(f.link.carrier_ghz > 0.0) {
            err(format!("link.carrier_ghz must be positive, got {}", f.link.carrier_ghz));
        }
        if !(0.0..90.0).contains(&f.link.eps_min_deg) {
            err(format!("link.eps_min_deg must be in [0, 90), got {}", f.link.eps_min_deg));
        }
        for (label, theta) in
            [("tx", f.link.tx_theta_3db_deg), ("rx", f.link.rx_theta_3db_deg)]
        {
            if !(theta > 0.0) {
                err(format!("link.{label}_theta_3db_deg must be positive, got {theta}"));
            }
        }

        if f.region.center_lat_deg.abs() > 85.0 {
            err(format!(
                "region.center_lat_deg must be within +-85, got {}",
                f.region.center_lat_deg
            ));
        }
        if f.region.cluster_offsets.is_empty() {
            err("region.cluster_offsets must name at least one cluster".into());
        }
        if f.region.priorities.len() != f.region.cluster_offsets.len() {
            err(format!(
                "region.priorities has {} entries for {} clusters",
                f.region.priorities.len(),
                f.region.cluster_offsets.len()
            ));
        }

        for (label, sys) in [("primary", &f.primary), ("secondary", &f.secondary)] {
            if sys.shells.is_empty() {
                err(format!("{label}.shells must not be empty"));
            }
            for (i, sh) in sys.shells.iter().enumerate() {
                if !(sh.altitude_km > 0.0) {
                    err(format!("{label}.shells[{i}].altitude_km must be positive"));
                }
                if sh.planes == 0 || sh.sats_per_plane == 0 {
                    err(format!("{label}.shells[{i}] must have planes and sats_per_plane >= 1"));
                }
                if sh.planes > 0 && sh.phasing_factor >= sh.planes {
                    err(format!(
                        "{label}.shells[{i}].phasing_factor must be < planes ({})",
                        sh.planes
                    ));
                }
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            bail!("invalid scenario:\n  - {}", errs.join("\n  - "));
        }
    }

    /// Builds the world, run configuration, and extra users.
    pub fn build(&self) -> Result<Built> {
        let f = &self.file;

        let primary = build_walker_delta(&shell_params(&f.primary), SystemTag::Primary)
            .map_err(|e| anyhow::anyhow!("primary constellation: {e}"))?;
        let secondary = build_walker_delta(&shell_params(&f.secondary), SystemTag::Secondary)
            .map_err(|e| anyhow::anyhow!("secondary constellation: {e}"))?;

        let region = RegionConfig {
            center_lat_deg: f.region.center_lat_deg,
            center_lon_deg: f.region.center_lon_deg,
            cell_radius_m: f.region.cell_radius_m,
            cluster_offsets: f.region.cluster_offsets.clone(),
            priorities: f.region.priorities.clone(),
        };
        let grid = build_grid(&region).map_err(|e| anyhow::anyhow!("region grid: {e}"))?;

        let tx = AntennaPattern::new(
            f.link.tx_peak_gain_dbi,
            f.link.tx_theta_3db_deg,
            f.link.sidelobe_floor_db,
            f.link.far_floor_dbi,
        )
        .map_err(|e| anyhow::anyhow!("tx pattern: {e}"))?;
        let rx = AntennaPattern::new(
            f.link.rx_peak_gain_dbi,
            f.link.rx_theta_3db_deg,
            f.link.sidelobe_floor_db,
            f.link.far_floor_dbi,
        )
        .map_err(|e| anyhow::anyhow!("rx pattern: {e}"))?;

        let link_params = |eirp: f64, shells: &[ShellRow]| LinkParams {
            carrier_ghz: f.link.carrier_ghz,
            max_eirp_density_dbw_hz: eirp,
            noise_psd_dbm_hz: f.link.noise_psd_dbm_hz,
            noise_figure_db: f.link.noise_figure_db,
            top_altitude_m: shells
                .iter()
                .map(|s| s.altitude_km * 1000.0)
                .fold(0.0, f64::max),
            eps_min_deg: f.link.eps_min_deg,
        };
        let env = LinkEnv::new(
            tx,
            rx,
            link_params(f.link.primary_eirp_density_dbw_hz, &f.primary.shells),
            link_params(f.link.secondary_eirp_density_dbw_hz, &f.secondary.shells),
        );

        let protection = ProtectionConfig::from_db(
            f.protection.inr_avg_th_db,
            f.protection.inr_max_th_db,
            self.horizon_slots(),
            self.window_slots(),
        )
        .map_err(|e| anyhow::anyhow!("protection: {e}"))?;

        let solver = SolverConfig {
            max_iters: f.solver.max_iters,
            step_a: f.solver.step_a,
            step_b: f.solver.step_b,
            rel_tol: f.solver.rel_tol,
            patience: f.solver.patience,
            ..SolverConfig::default()
        };

        let world = World {
            primary,
            secondary,
            grid,
            env,
            slot_s: f.slot_s,
            earth_rotation: f.earth_rotation,
        };
        let run_cfg = RunConfig {
            mode: f.mode.to_engine(),
            policy_primary: f.primary.policy.to_engine(),
            policy_secondary: f.secondary.policy.to_engine(),
            n_beams: f.beams.count,
            duration_s: f.duration_s,
            protection,
            solver,
            record_link_trace: f.users.record_link_trace,
        };
        let extras = place_extras(&world, f);

        Ok(Built { world, run_cfg, extras })
    }
}

fn shell_params(sys: &SystemSection) -> Vec<ShellParams> {
    sys.shells
        .iter()
        .map(|s| ShellParams {
            altitude_m: s.altitude_km * 1000.0,
            inclination_deg: s.inclination_deg,
            num_planes: s.planes,
            sats_per_plane: s.sats_per_plane,
            phasing_factor: s.phasing_factor,
        })
        .collect()
}

fn whole_slots(seconds: f64, slot_s: f64) -> bool {
    let slots = (seconds / slot_s).round();
    (slots * slot_s - seconds).abs() <= 1e-6 * seconds.abs().max(slot_s)
}

fn to_slots(seconds: f64, slot_s: f64) -> usize {
    (seconds / slot_s).round() as usize
}

/// Seeded placement of extra victim users: uniform within a random cell of
/// the named cluster. Draw order is fixed (primary system first, clusters
/// ascending) so a seed pins every position regardless of counts elsewhere.
fn place_extras(world: &World, f: &ScenarioFile) -> Vec<ExtraUser> {
    let mut rng = ChaCha8Rng::seed_from_u64(f.seed);
    let mut extras = Vec::new();
    for (system, count) in [
        (SystemTag::Primary, f.users.extras_per_cluster_primary),
        (SystemTag::Secondary, f.users.extras_per_cluster_secondary),
    ] {
        for (ci, cluster) in world.grid.clusters.iter().enumerate() {
            for _ in 0..count {
                let cell = rng.gen_range(0..cluster.cells.len());
                let center = cluster.cells[cell].center_ecef;
                // Uniform in the cell's inscribed disc on the local tangent
                // plane, then projected back to the sphere.
                let r = f.region.cell_radius_m * rng.gen::<f64>().sqrt();
                let phi = core::f64::consts::TAU * rng.gen::<f64>();
                let up = center.normalized();
                let east = Vec3::new(0.0, 0.0, 1.0).cross(up).normalized();
                let north = up.cross(east);
                let p = center + east * (r * phi.cos()) + north * (r * phi.sin());
                extras.push(ExtraUser {
                    system,
                    cluster: ci,
                    pos_m: p.normalized() * EARTH_RADIUS_M,
                });
            }
        }
    }
    extras
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        let texas = Scenario::from_toml(PRESET_DEFAULT).unwrap();
        assert_eq!(texas.file.name, "starlink_kuiper_texas");
        assert_eq!(texas.file.region.cluster_offsets.len(), 10);
        assert_eq!(texas.horizon_slots(), 150);
        assert_eq!(texas.window_slots(), 100);

        let small = Scenario::from_toml(PRESET_SMALL).unwrap();
        assert_eq!(small.file.region.cluster_offsets.len(), 3);
        assert!(small.file.protection.inr_max_th_db.is_finite());
    }

    #[test]
    fn default_preset_builds_full_constellations() {
        let sc = Scenario::resolve("starlink_kuiper_texas").unwrap();
        let built = sc.build().unwrap();
        assert_eq!(built.world.primary.len(), 6900);
        assert_eq!(built.world.secondary.len(), 3236);
        assert_eq!(built.world.grid.num_clusters(), 10);
        assert_eq!(built.world.grid.num_cells(), 1270);
        // Two primary extras per cluster.
        assert_eq!(built.extras.len(), 20);
        for e in &built.extras {
            assert!((e.pos_m.norm() - EARTH_RADIUS_M).abs() < 1e-6);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = PRESET_SMALL.replace("[solver]", "[solver]\nbogus_key = 1");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(format!("{err:#}").contains("bogus_key"), "{err:#}");
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let text = PRESET_SMALL.replace("th_s = 15.0", "th_s = 0.0");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(format!("{err:#}").contains("th_s"), "{err:#}");
    }

    #[test]
    fn duration_shorter_than_horizon_is_rejected() {
        let text = PRESET_SMALL.replace("duration_s = 60.0", "duration_s = 10.0");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(format!("{err:#}").contains("handover period"), "{err:#}");
    }

    #[test]
    fn seed_defaults_to_zero_and_overrides_apply() {
        let text = PRESET_SMALL.replace("seed = 0\n", "");
        let mut sc = Scenario::from_toml(&text).unwrap();
        assert_eq!(sc.file.seed, 0);

        let ov = Overrides {
            mode: Some(ModeKey::Baseline),
            beams: Some(16),
            inr_max_th_db: Some(f64::INFINITY),
            seed: Some(7),
            ..Overrides::default()
        };
        sc.apply(&ov).unwrap();
        assert_eq!(sc.file.mode, ModeKey::Baseline);
        assert_eq!(sc.file.beams.count, 16);
        assert!(sc.file.protection.inr_max_th_db.is_infinite());
        assert_eq!(sc.file.seed, 7);
    }

    #[test]
    fn nonstandard_beam_count_needs_the_escape_hatch() {
        let text = PRESET_SMALL.replace("count = 8", "count = 9");
        assert!(Scenario::from_toml(&text).is_err());
        let text = text.replace("allow_nonstandard = false", "allow_nonstandard = true");
        assert!(Scenario::from_toml(&text).is_ok());
    }

    #[test]
    fn extras_are_seed_deterministic() {
        let sc = |seed: &str| {
            let text = PRESET_SMALL
                .replace("seed = 0", seed)
                .replace("extras_per_cluster_primary = 0", "extras_per_cluster_primary = 2");
            Scenario::from_toml(&text).unwrap().build().unwrap().extras
        };
        let a = sc("seed = 1");
        let b = sc("seed = 1");
        let c = sc("seed = 2");
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pos_m, y.pos_m);
        }
        assert!(a.iter().zip(&c).any(|(x, y)| x.pos_m != y.pos_m));
    }
}
