//! Slot-by-slot coexistence simulation of the two constellations over a
//! shared cell grid.
//!
//! Time advances in fixed slots grouped into handover windows of
//! `ProtectionConfig::horizon_slots`. Each window: the primary system
//! associates by its configured policy; the secondary either follows its
//! own policy (baseline mode) or receives assignments from the Lagrangian
//! solver under the interference budgets (protected mode); then every slot
//! of the window is realized: beams rotate over the cells, aggregate INR
//! is sampled at each victim user, history is banked, and the window is
//! re-verified against the thresholds after the fact.
//!
//! Determinism contract: satellite positions always come from
//! `Constellation::state_at` at the slot's absolute time, and every
//! interference sum accumulates clusters in ascending index with beam
//! terms ascending inside (`LinkEnv::satellite_cluster_inr`). Coefficient
//! construction, repair's trial sums, and the realized trace all follow
//! that one order, so a selection proven feasible at the handover stays
//! within the absolute threshold in the realized trace bit for bit.
//! Unserved or below-elevation links transmit nothing: they produce no
//! capacity, no interference, and no victim entry (the trace slot is
//! recorded as zero with the link mask cleared). Interference at a tracked
//! victim accumulates into the history every slot, but a value only counts
//! as an observed sample while the victim's cell is beamformed, since that
//! is when the user is actually receiving; the active mask marks those
//! receiving slots.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::association::{
    associate_highest_elevation, associate_max_contact, schedule_beams, AssocError,
    AssociationMatrix, CellGrid, MctContext,
};
use crate::linkbudget::{link_sinr_lin, spectral_efficiency, LinkEnv};
use crate::orbits::{is_overhead, Constellation, SystemTag};
use crate::protection::{
    effective_avg_threshold, verify_window, HistoryBank, ProtectionConfig, WindowReport,
};
use crate::solver::{solve, Candidate, ClusterCoeffs, CoeffTable, SolverConfig, Thresholds};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Both systems run their association policies with no coordination.
    Baseline,
    /// The secondary's assignments come from the budgeted solver.
    Protected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    HighestElevation,
    MaxContact,
}

/// Static simulation inputs shared by every run.
#[derive(Debug, Clone)]
pub struct World {
    pub primary: Constellation,
    pub secondary: Constellation,
    /// Both systems serve the same grid; co-channel worst case.
    pub grid: CellGrid,
    pub env: LinkEnv,
    pub slot_s: f64,
    pub earth_rotation: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub policy_primary: Policy,
    /// Secondary policy; used in baseline mode only.
    pub policy_secondary: Policy,
    pub n_beams: u32,
    pub duration_s: f64,
    pub protection: ProtectionConfig,
    pub solver: SolverConfig,
    /// Record per-slot SNR traces (per-slot INR is always kept).
    pub record_link_trace: bool,
}

/// A victim sample point that is not a cell center. Enters traces and
/// distribution sampling but never the protection constraints.
#[derive(Debug, Clone, Copy)]
pub struct ExtraUser {
    pub system: SystemTag,
    pub cluster: usize,
    pub pos_m: Vec3,
}

/// Representative user: the center of one cell. Canonical user index is
/// `cluster * cells_per_cluster + cell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserRef {
    pub cluster: usize,
    pub cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverDiag {
    pub t_s: f64,
    pub dual_bound: f64,
    pub primal_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fully_feasible: bool,
    pub effective_avg_th_lin: f64,
    /// Engine cluster indices left unserved.
    pub outage_clusters: Vec<usize>,
    /// Selected secondary satellite per engine cluster.
    pub selected: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub slots: usize,
    pub slot_s: f64,
    pub users: Vec<UserRef>,
    /// Per slot association snapshots.
    pub assoc_primary: Vec<AssociationMatrix>,
    pub assoc_secondary: Vec<AssociationMatrix>,
    /// Per slot, per user: aggregate INR at primary users from the
    /// secondary system, linear. Zero where the link mask is false.
    pub inr_primary: Vec<Vec<f64>>,
    /// True where the user's cluster had a serving satellite, i.e. the
    /// receive antenna was tracking and the INR value is meaningful.
    pub link_primary: Vec<Vec<bool>>,
    /// True where the link exists and the user's cell was beamformed that
    /// slot: the user was receiving, so the INR value is an observed
    /// interference sample. Subset of the link mask.
    pub active_primary: Vec<Vec<bool>>,
    /// Same three, at secondary users from the primary system.
    pub inr_secondary: Vec<Vec<f64>>,
    pub link_secondary: Vec<Vec<bool>>,
    pub active_secondary: Vec<Vec<bool>>,
    pub snr_primary: Option<Vec<Vec<f64>>>,
    pub snr_secondary: Option<Vec<Vec<f64>>>,
    /// Per slot, per extra user (input order), linear INR from the other
    /// system. Masks as for the cell-center users, gated on the extra's
    /// pinned cell.
    pub extra_inr: Vec<Vec<f64>>,
    pub extra_link: Vec<Vec<bool>>,
    pub extra_active: Vec<Vec<bool>>,
    /// First slot of each handover window.
    pub handover_slots: Vec<u64>,
    /// Served cluster counts at each window start.
    pub served_primary: Vec<usize>,
    pub served_secondary: Vec<usize>,
    /// Solver diagnostics, one per window (protected mode only).
    pub diagnostics: Vec<HandoverDiag>,
    /// Threshold re-verification per window, over primary users.
    pub window_reports: Vec<WindowReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    BadDuration,
    BadSlotLength,
    BadExtraCluster { index: usize, cluster: usize },
    Assoc(AssocError),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::BadDuration => write!(f, "duration must cover at least one slot"),
            EngineError::BadSlotLength => write!(f, "slot length must be positive and finite"),
            EngineError::BadExtraCluster { index, cluster } => {
                write!(f, "extra user {index} names cluster {cluster} outside the grid")
            }
            EngineError::Assoc(e) => write!(f, "association: {e}"),
        }
    }
}

impl From<AssocError> for EngineError {
    fn from(e: AssocError) -> Self {
        EngineError::Assoc(e)
    }
}

/// Serving geometry of one system at one slot: per cluster, the serving
/// satellite's position if it is assigned and overhead, and the same data
/// flattened to an ascending active list for interference sums.
struct SlotCtx {
    serving_pos: Vec<Option<Vec3>>,
    active: Vec<(usize, Vec3)>,
}

fn slot_ctx(
    constellation: &Constellation,
    grid: &CellGrid,
    assoc: &AssociationMatrix,
    t_s: f64,
    eps_min_deg: f64,
    earth_rotation: bool,
) -> SlotCtx {
    let n = grid.clusters.len();
    let mut serving_pos = Vec::with_capacity(n);
    let mut active = Vec::new();
    for (mc, cluster) in grid.clusters.iter().enumerate() {
        let entry = assoc.serving[mc].and_then(|sat| {
            let pos = constellation.state_at(sat, t_s, earth_rotation).pos_m;
            if is_overhead(pos, cluster, eps_min_deg) {
                Some(pos)
            } else {
                None
            }
        });
        if let Some(pos) = entry {
            active.push((mc, pos));
        }
        serving_pos.push(entry);
    }
    SlotCtx { serving_pos, active }
}

/// Aggregate INR at one victim from every active interfering satellite,
/// clusters ascending.
fn aggregate_inr(
    env: &LinkEnv,
    grid: &CellGrid,
    interferer: SystemTag,
    victim_pos: Vec3,
    victim_color: u8,
    victim_serving_pos: Vec3,
    interferer_active: &[(usize, Vec3)],
    sched: &[u16],
) -> f64 {
    let mut total = 0.0;
    for &(mc, sat_pos) in interferer_active {
        total += env.satellite_cluster_inr(
            interferer,
            victim_pos,
            victim_color,
            victim_serving_pos,
            sat_pos,
            &grid.clusters[mc],
            sched,
        );
    }
    total
}

fn other(system: SystemTag) -> SystemTag {
    match system {
        SystemTag::Primary => SystemTag::Secondary,
        SystemTag::Secondary => SystemTag::Primary,
    }
}

/// Association snapshots for `len` slots starting at `t0`, advancing the
/// policy's own state. Highest-elevation associates once at the window
/// start and holds; max-contact re-evaluates its trigger every slot.
fn simulate_window(
    world: &World,
    system: SystemTag,
    policy: Policy,
    prev: &AssociationMatrix,
    t0: u64,
    len: u64,
) -> Vec<AssociationMatrix> {
    let constellation = match system {
        SystemTag::Primary => &world.primary,
        SystemTag::Secondary => &world.secondary,
    };
    let eps = world.env.eps_min_deg(system);
    match policy {
        Policy::HighestElevation => {
            let states = constellation.propagate_ecef(t0 as f64 * world.slot_s, world.earth_rotation);
            let overhead = crate::orbits::overhead_sets(&states, &world.grid, eps);
            let assoc = associate_highest_elevation(system, &states, &overhead, &world.grid);
            vec![assoc; len as usize]
        }
        Policy::MaxContact => {
            let ctx = MctContext {
                constellation,
                grid: &world.grid,
                eps_min_deg: eps,
                slot_s: world.slot_s,
                earth_rotation: world.earth_rotation,
            };
            let mut out = Vec::with_capacity(len as usize);
            let mut cur = prev.clone();
            cur.system = system;
            for w in 0..len {
                let slot = t0 + w;
                let states = constellation.propagate_ecef(slot as f64 * world.slot_s, world.earth_rotation);
                let overhead = crate::orbits::overhead_sets(&states, &world.grid, eps);
                cur = associate_max_contact(&cur, slot, &states, &overhead, &ctx);
                out.push(cur.clone());
            }
            out
        }
    }
}

/// Builds the solver coefficient table for one secondary handover window.
///
/// Clusters appear in priority order; candidates are the satellites
/// overhead at the window start, ascending. Per-slot coefficients carry
/// the transmit gating: a candidate that sets mid-window contributes
/// neither capacity nor interference from that slot on.
fn build_coeff_table(
    world: &World,
    cfg: &RunConfig,
    t0: u64,
    window: u64,
    primary_ctx: &[SlotCtx],
    users: &[UserRef],
) -> Result<CoeffTable, EngineError> {
    let grid = &world.grid;
    let env = &world.env;
    let eps_sec = env.eps_min_deg(SystemTag::Secondary);
    let horizon = window as usize;

    let t0_states = world
        .secondary
        .propagate_ecef(t0 as f64 * world.slot_s, world.earth_rotation);
    let overhead = crate::orbits::overhead_sets(&t0_states, grid, eps_sec);

    let mut scheds = Vec::with_capacity(horizon);
    for w in 0..window {
        scheds.push(schedule_beams(t0 + w, cfg.n_beams)?);
    }

    let mut clusters = Vec::with_capacity(grid.clusters.len());
    for &mc in &grid.priority_order() {
        let cluster = &grid.clusters[mc];
        let mut candidates = Vec::with_capacity(overhead[mc].len());
        for &sat in &overhead[mc] {
            let mut slot_user = vec![0.0; users.len() * horizon];
            let mut capacity = 0.0;
            for w in 0..horizon {
                let t_s = (t0 + w as u64) as f64 * world.slot_s;
                let pos = world.secondary.state_at(sat, t_s, world.earth_rotation).pos_m;
                if !is_overhead(pos, cluster, eps_sec) {
                    continue;
                }
                let sched = &scheds[w];
                let pctx = &primary_ctx[w];
                // Interference coefficients at primary victims.
                for (u, user) in users.iter().enumerate() {
                    let serving = match pctx.serving_pos[user.cluster] {
                        Some(p) => p,
                        None => continue,
                    };
                    let cell = &grid.clusters[user.cluster].cells[user.cell];
                    slot_user[u * horizon + w] = env.satellite_cluster_inr(
                        SystemTag::Secondary,
                        cell.center_ecef,
                        cell.color,
                        serving,
                        pos,
                        cluster,
                        sched,
                    );
                }
                // Capacity at the cells this candidate would serve.
                for &ci in sched.iter() {
                    let cell = &cluster.cells[ci as usize];
                    let snr = env.link_snr_unchecked(SystemTag::Secondary, cell.center_ecef, pos, cell.center_ecef);
                    let inr = aggregate_inr(
                        env,
                        grid,
                        SystemTag::Primary,
                        cell.center_ecef,
                        cell.color,
                        pos,
                        &pctx.active,
                        sched,
                    );
                    capacity += spectral_efficiency(link_sinr_lin(snr, inr));
                }
            }
            candidates.push(Candidate::from_slots(sat, capacity, users.len(), horizon, slot_user));
        }
        clusters.push(ClusterCoeffs { cluster: mc, candidates });
    }
    Ok(CoeffTable { users: users.len(), horizon, clusters })
}

pub fn run(world: &World, cfg: &RunConfig, extras: &[ExtraUser]) -> Result<RunOutput, EngineError> {
    if !(world.slot_s > 0.0) || !world.slot_s.is_finite() {
        return Err(EngineError::BadSlotLength);
    }
    if !(cfg.duration_s > 0.0) || !cfg.duration_s.is_finite() {
        return Err(EngineError::BadDuration);
    }
    let slots = libm::round(cfg.duration_s / world.slot_s) as u64;
    if slots == 0 {
        return Err(EngineError::BadDuration);
    }
    // Validate the beam count once; per-slot calls cannot fail after this.
    schedule_beams(0, cfg.n_beams)?;

    let grid = &world.grid;
    let n_clusters = grid.clusters.len();
    let cells_per = grid.clusters[0].cells.len();
    let mut users = Vec::with_capacity(n_clusters * cells_per);
    for cluster in 0..n_clusters {
        for cell in 0..cells_per {
            users.push(UserRef { cluster, cell });
        }
    }

    // Pin each extra user to the nearest cell of its cluster; that cell's
    // color decides which beams are co-channel for it.
    let mut extra_cells = Vec::with_capacity(extras.len());
    for (i, e) in extras.iter().enumerate() {
        if e.cluster >= n_clusters {
            return Err(EngineError::BadExtraCluster { index: i, cluster: e.cluster });
        }
        let cells = &grid.clusters[e.cluster].cells;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (ci, c) in cells.iter().enumerate() {
            let d = (c.center_ecef - e.pos_m).norm_sq();
            if d < best_d {
                best_d = d;
                best = ci;
            }
        }
        extra_cells.push(best);
    }

    let h = cfg.protection.horizon_slots as u64;
    let mut hist = HistoryBank::new(users.len(), cfg.protection.window_slots);

    let mut out = RunOutput {
        slots: slots as usize,
        slot_s: world.slot_s,
        users: users.clone(),
        assoc_primary: Vec::with_capacity(slots as usize),
        assoc_secondary: Vec::with_capacity(slots as usize),
        inr_primary: Vec::with_capacity(slots as usize),
        link_primary: Vec::with_capacity(slots as usize),
        active_primary: Vec::with_capacity(slots as usize),
        inr_secondary: Vec::with_capacity(slots as usize),
        link_secondary: Vec::with_capacity(slots as usize),
        active_secondary: Vec::with_capacity(slots as usize),
        snr_primary: cfg.record_link_trace.then(Vec::new),
        snr_secondary: cfg.record_link_trace.then(Vec::new),
        extra_inr: Vec::with_capacity(slots as usize),
        extra_link: Vec::with_capacity(slots as usize),
        extra_active: Vec::with_capacity(slots as usize),
        handover_slots: Vec::new(),
        served_primary: Vec::new(),
        served_secondary: Vec::new(),
        diagnostics: Vec::new(),
        window_reports: Vec::new(),
    };

    let eps_p = world.env.eps_min_deg(SystemTag::Primary);
    let eps_s = world.env.eps_min_deg(SystemTag::Secondary);
    let mut assoc_p = AssociationMatrix::empty(SystemTag::Primary, n_clusters);
    let mut assoc_s = AssociationMatrix::empty(SystemTag::Secondary, n_clusters);

    let mut t0 = 0u64;
    while t0 < slots {
        let window = h.min(slots - t0);
        out.handover_slots.push(t0);
        let hist_at_start = hist.clone();

        let primary_window = simulate_window(world, SystemTag::Primary, cfg.policy_primary, &assoc_p, t0, window);
        assoc_p = primary_window[window as usize - 1].clone();

        // Primary serving geometry per window slot, shared by coefficient
        // construction and the realized loop.
        let mut primary_ctx = Vec::with_capacity(window as usize);
        for w in 0..window as usize {
            let t_s = (t0 + w as u64) as f64 * world.slot_s;
            primary_ctx.push(slot_ctx(&world.primary, grid, &primary_window[w], t_s, eps_p, world.earth_rotation));
        }

        let secondary_window: Vec<AssociationMatrix> = match cfg.mode {
            Mode::Baseline => {
                let w = simulate_window(world, SystemTag::Secondary, cfg.policy_secondary, &assoc_s, t0, window);
                assoc_s = w[window as usize - 1].clone();
                w
            }
            Mode::Protected => {
                let table = build_coeff_table(world, cfg, t0, window, &primary_ctx, &users)?;
                let th_eff = effective_avg_threshold(&cfg.protection, &hist_at_start);
                let th = Thresholds { avg_eff_lin: th_eff, max_lin: cfg.protection.max_th_lin };
                let sol = solve(&table, &th, &cfg.solver);
                let mut serving = vec![None; n_clusters];
                for (mi, sel) in sol.selection.iter().enumerate() {
                    if let Some(ci) = sel {
                        serving[table.clusters[mi].cluster] = Some(table.clusters[mi].candidates[*ci].sat);
                    }
                }
                out.diagnostics.push(HandoverDiag {
                    t_s: t0 as f64 * world.slot_s,
                    dual_bound: sol.dual_bound,
                    primal_value: sol.primal_value,
                    iterations: sol.iterations,
                    converged: sol.converged,
                    fully_feasible: sol.fully_feasible,
                    effective_avg_th_lin: th_eff,
                    outage_clusters: sol.outages.iter().map(|&mi| table.clusters[mi].cluster).collect(),
                    selected: serving.clone(),
                });
                assoc_s = AssociationMatrix { system: SystemTag::Secondary, serving };
                vec![assoc_s.clone(); window as usize]
            }
        };

        out.served_primary.push(primary_window[0].served_count());
        out.served_secondary.push(secondary_window[0].served_count());

        let mut horizon_trace: Vec<Vec<f64>> = Vec::with_capacity(window as usize);
        for w in 0..window as usize {
            let t = t0 + w as u64;
            let t_s = t as f64 * world.slot_s;
            let sched = schedule_beams(t, cfg.n_beams)?;
            let pctx = &primary_ctx[w];
            let sctx = slot_ctx(&world.secondary, grid, &secondary_window[w], t_s, eps_s, world.earth_rotation);

            // Both systems run the same TDM schedule, so one lookup tells
            // whether a cell index receives a beam this slot.
            let mut beamed = vec![false; cells_per];
            for &c in &sched {
                beamed[c as usize] = true;
            }

            let mut inr_p = vec![0.0; users.len()];
            let mut lnk_p = vec![false; users.len()];
            let mut act_p = vec![false; users.len()];
            let mut inr_s = vec![0.0; users.len()];
            let mut lnk_s = vec![false; users.len()];
            let mut act_s = vec![false; users.len()];
            let mut snr_p = cfg.record_link_trace.then(|| vec![0.0; users.len()]);
            let mut snr_s = cfg.record_link_trace.then(|| vec![0.0; users.len()]);

            for (u, user) in users.iter().enumerate() {
                let cell = &grid.clusters[user.cluster].cells[user.cell];
                if let Some(serving) = pctx.serving_pos[user.cluster] {
                    lnk_p[u] = true;
                    act_p[u] = beamed[user.cell];
                    inr_p[u] = aggregate_inr(
                        &world.env,
                        grid,
                        SystemTag::Secondary,
                        cell.center_ecef,
                        cell.color,
                        serving,
                        &sctx.active,
                        &sched,
                    );
                    if let Some(s) = snr_p.as_mut() {
                        s[u] = world
                            .env
                            .link_snr_unchecked(SystemTag::Primary, cell.center_ecef, serving, cell.center_ecef);
                    }
                }
                if let Some(serving) = sctx.serving_pos[user.cluster] {
                    lnk_s[u] = true;
                    act_s[u] = beamed[user.cell];
                    inr_s[u] = aggregate_inr(
                        &world.env,
                        grid,
                        SystemTag::Primary,
                        cell.center_ecef,
                        cell.color,
                        serving,
                        &pctx.active,
                        &sched,
                    );
                    if let Some(s) = snr_s.as_mut() {
                        s[u] = world
                            .env
                            .link_snr_unchecked(SystemTag::Secondary, cell.center_ecef, serving, cell.center_ecef);
                    }
                }
            }

            let mut extra_inr = vec![0.0; extras.len()];
            let mut extra_lnk = vec![false; extras.len()];
            let mut extra_act = vec![false; extras.len()];
            for (i, e) in extras.iter().enumerate() {
                let ctx = match e.system {
                    SystemTag::Primary => pctx,
                    SystemTag::Secondary => &sctx,
                };
                let int_ctx = match e.system {
                    SystemTag::Primary => &sctx,
                    SystemTag::Secondary => pctx,
                };
                if let Some(serving) = ctx.serving_pos[e.cluster] {
                    extra_lnk[i] = true;
                    extra_act[i] = beamed[extra_cells[i]];
                    let color = grid.clusters[e.cluster].cells[extra_cells[i]].color;
                    extra_inr[i] = aggregate_inr(
                        &world.env,
                        grid,
                        other(e.system),
                        e.pos_m,
                        color,
                        serving,
                        &int_ctx.active,
                        &sched,
                    );
                }
            }

            hist.push_slot(&inr_p);
            horizon_trace.push(inr_p.clone());
            out.inr_primary.push(inr_p);
            out.link_primary.push(lnk_p);
            out.active_primary.push(act_p);
            out.inr_secondary.push(inr_s);
            out.link_secondary.push(lnk_s);
            out.active_secondary.push(act_s);
            if let (Some(all), Some(one)) = (out.snr_primary.as_mut(), snr_p) {
                all.push(one);
            }
            if let (Some(all), Some(one)) = (out.snr_secondary.as_mut(), snr_s) {
                all.push(one);
            }
            out.extra_inr.push(extra_inr);
            out.extra_link.push(extra_lnk);
            out.extra_active.push(extra_act);
            out.assoc_primary.push(primary_window[w].clone());
            out.assoc_secondary.push(secondary_window[w].clone());
        }

        out.window_reports
            .push(verify_window(&cfg.protection, &hist_at_start, &horizon_trace));
        t0 += window;
    }

    Ok(out)
}
