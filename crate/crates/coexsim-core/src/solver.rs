//! Lagrangian assignment of serving satellites to clusters under
//! interference budgets.
//!
//! One handover decides, for every cluster, which candidate satellite (if
//! any) serves it for the coming horizon. The objective is total horizon
//! capacity; the couplings are:
//!
//! * per victim user, the summed horizon-average INR across all selected
//!   satellites must stay within the effective average threshold;
//! * per victim user and slot, the summed INR must stay within the
//!   absolute threshold;
//! * a satellite serves at most one cluster.
//!
//! The average and absolute constraints are max-form (binding at the worst
//! user, respectively worst user-slot) and are dualized with one scalar
//! multiplier each; the per-cluster cardinality gets one multiplier per
//! cluster. The per-cluster subproblem scores each candidate by charging
//! the multipliers against the coefficients of the currently binding
//! *anchor* user and user-slot (taken from the previous iterate's
//! selection). Replacing a max by the value at any fixed point only
//! loosens the penalty, so every dual value computed this way is a valid
//! upper bound on the optimum, for any anchor and any nonnegative
//! multipliers. Multipliers follow projected subgradient steps with a
//! diminishing step size; the best (lowest) dual iterate is kept and its
//! multipliers drive the repair phase.
//!
//! Repair walks clusters in priority order and gives each the best-scored
//! candidate that keeps the partial selection feasible and does not reuse
//! a satellite; a cluster with no feasible candidate takes an outage.
//! Trial sums during repair accumulate clusters in ascending engine index,
//! the same order the realized trace uses, so repair feasibility carries
//! over to the realized interference bit for bit.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Coefficients of one candidate assignment (satellite, cluster).
#[derive(Debug, Clone)]
pub struct Candidate {
    /// Satellite index within its constellation.
    pub sat: usize,
    /// Horizon capacity of the assignment, bits/s/Hz summed over slots.
    pub capacity: f64,
    /// Per victim user: horizon-average INR added, linear. Length `users`.
    pub avg_user: Vec<f64>,
    /// Per victim user and slot: INR added that slot, linear. Length
    /// `users * horizon`, indexed `u * horizon + tau`.
    pub slot_user: Vec<f64>,
}

impl Candidate {
    /// Builds a candidate from per-slot coefficients, deriving the per-user
    /// horizon averages by chronological summation.
    pub fn from_slots(sat: usize, capacity: f64, users: usize, horizon: usize, slot_user: Vec<f64>) -> Self {
        assert_eq!(slot_user.len(), users * horizon, "slot coefficient shape");
        assert!(horizon > 0, "horizon must be positive");
        let mut avg_user = Vec::with_capacity(users);
        for u in 0..users {
            let mut s = 0.0;
            for tau in 0..horizon {
                s += slot_user[u * horizon + tau];
            }
            avg_user.push(s / horizon as f64);
        }
        Candidate { sat, capacity, avg_user, slot_user }
    }
}

/// Candidate set for one cluster.
#[derive(Debug, Clone)]
pub struct ClusterCoeffs {
    /// Engine-level cluster index; trial sums accumulate ascending in this.
    pub cluster: usize,
    /// Candidates, ascending by satellite index.
    pub candidates: Vec<Candidate>,
}

/// Full coefficient table for one handover, clusters in priority order.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    pub users: usize,
    pub horizon: usize,
    pub clusters: Vec<ClusterCoeffs>,
}

impl CoeffTable {
    /// Validates coefficient shapes; call after construction.
    pub fn check(&self) {
        for cc in &self.clusters {
            for c in &cc.candidates {
                assert_eq!(c.avg_user.len(), self.users, "avg coefficient shape");
                assert_eq!(c.slot_user.len(), self.users * self.horizon, "slot coefficient shape");
            }
        }
    }
}

/// Horizon thresholds, linear. `avg_eff_lin` is the effective average
/// budget left after charging history; it may be zero or negative, in
/// which case nothing (not even silence) satisfies the window constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub avg_eff_lin: f64,
    pub max_lin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda: f64,
    pub mu: f64,
    pub nu: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(clusters: usize) -> Self {
        Multipliers { lambda: 0.0, mu: 0.0, nu: vec![0.0; clusters] }
    }
}

/// Anchor coordinates the score penalties are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Anchors {
    pub user: usize,
    pub slot_user: usize,
    pub slot_tau: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Step size is `a / (b + k)` at iteration `k`.
    pub step_a: f64,
    pub step_b: f64,
    /// Relative dual improvement below which an iteration counts as stalled.
    pub rel_tol: f64,
    /// Consecutive stalled iterations before stopping early.
    pub patience: usize,
    pub scale_lambda: f64,
    pub scale_mu: f64,
    pub scale_nu: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200,
            step_a: 1.0,
            step_b: 10.0,
            rel_tol: 1e-6,
            patience: 20,
            scale_lambda: 1.0,
            scale_mu: 1.0,
            scale_nu: 1.0,
        }
    }
}

/// Slacks of the dualized constraints at a given selection, plus the
/// coordinates where the max-form constraints bind.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradients {
    pub s_lambda: f64,
    pub s_mu: f64,
    pub s_nu: Vec<f64>,
    pub anchors: Anchors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverSolution {
    /// Per table cluster: index into its candidate list, or None (outage).
    pub selection: Vec<Option<usize>>,
    /// Total capacity of the repaired selection.
    pub primal_value: f64,
    /// Best (lowest) dual value seen; a certified upper bound on the
    /// optimum of the constrained assignment problem.
    pub dual_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    /// True when the effective average budget is nonnegative and every
    /// cluster received a satellite.
    pub fully_feasible: bool,
    /// Table indices of clusters left unserved.
    pub outages: Vec<usize>,
    /// Multipliers of the best dual iterate (used for repair scoring).
    pub multipliers: Multipliers,
}

impl HandoverSolution {
    /// Selected satellite index per table cluster.
    pub fn selected_sats(&self, table: &CoeffTable) -> Vec<Option<usize>> {
        self.selection
            .iter()
            .enumerate()
            .map(|(mi, s)| s.map(|ci| table.clusters[mi].candidates[ci].sat))
            .collect()
    }
}

/// `mult * th` with the `0 * inf` corner pinned to 0 so disabled
/// constraints contribute nothing to the dual.
#[inline]
fn mul_guard(mult: f64, th: f64) -> f64 {
    if mult == 0.0 {
        0.0
    } else {
        mult * th
    }
}

#[inline]
fn anchored_score(cand: &Candidate, mi: usize, mult: &Multipliers, anchors: Anchors, users: usize, horizon: usize) -> f64 {
    let mut s = cand.capacity - mult.nu[mi];
    if users > 0 {
        s -= mul_guard(mult.lambda, cand.avg_user[anchors.user]);
        s -= mul_guard(mult.mu, cand.slot_user[anchors.slot_user * horizon + anchors.slot_tau]);
    }
    s
}

/// Best candidate of one cluster under the current multipliers: the index
/// of the maximal positive score (ties to the lowest index), plus the
/// clamped score entering the dual value.
pub fn cluster_subproblem(
    cluster: &ClusterCoeffs,
    mi: usize,
    mult: &Multipliers,
    anchors: Anchors,
    users: usize,
    horizon: usize,
) -> (Option<usize>, f64) {
    let mut best: Option<usize> = None;
    let mut best_score = 0.0f64;
    for (ci, cand) in cluster.candidates.iter().enumerate() {
        let s = anchored_score(cand, mi, mult, anchors, users, horizon);
        if s > best_score {
            best_score = s;
            best = Some(ci);
        }
    }
    (best, best_score)
}

/// Dual value from the summed positive subproblem scores.
pub fn dual_value(positive_score_sum: f64, mult: &Multipliers, th: &Thresholds) -> f64 {
    let mut g = positive_score_sum;
    g += mul_guard(mult.lambda, th.avg_eff_lin);
    g += mul_guard(mult.mu, th.max_lin);
    for &n in &mult.nu {
        g += n;
    }
    g
}

/// Constraint slacks at `selection` and the coordinates where the summed
/// interference peaks (the next iteration's anchors).
pub fn compute_subgradients(table: &CoeffTable, selection: &[Option<usize>], th: &Thresholds) -> Subgradients {
    let users = table.users;
    let horizon = table.horizon;
    let mut anchors = Anchors::default();
    let mut worst_avg = 0.0f64;
    let mut worst_slot = 0.0f64;
    if users > 0 {
        for u in 0..users {
            let mut s = 0.0;
            for (mi, sel) in selection.iter().enumerate() {
                if let Some(ci) = sel {
                    s += table.clusters[mi].candidates[*ci].avg_user[u];
                }
            }
            if s > worst_avg {
                worst_avg = s;
                anchors.user = u;
            }
        }
        for u in 0..users {
            for tau in 0..horizon {
                let mut s = 0.0;
                for (mi, sel) in selection.iter().enumerate() {
                    if let Some(ci) = sel {
                        s += table.clusters[mi].candidates[*ci].slot_user[u * horizon + tau];
                    }
                }
                if s > worst_slot {
                    worst_slot = s;
                    anchors.slot_user = u;
                    anchors.slot_tau = tau;
                }
            }
        }
    }
    let s_nu = selection.iter().map(|s| if s.is_some() { 0.0 } else { 1.0 }).collect();
    Subgradients {
        s_lambda: th.avg_eff_lin - worst_avg,
        s_mu: th.max_lin - worst_slot,
        s_nu,
        anchors,
    }
}

/// One projected subgradient step with step size `a / (b + k)`.
pub fn update_multipliers(mult: &mut Multipliers, sg: &Subgradients, k: usize, cfg: &SolverConfig) {
    let alpha = cfg.step_a / (cfg.step_b + k as f64);
    mult.lambda = proj(mult.lambda - alpha * cfg.scale_lambda * sg.s_lambda);
    mult.mu = proj(mult.mu - alpha * cfg.scale_mu * sg.s_mu);
    for (n, s) in mult.nu.iter_mut().zip(&sg.s_nu) {
        *n = proj(*n - alpha * cfg.scale_nu * s);
    }
}

#[inline]
fn proj(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Runs the dual loop and the priority repair for one handover.
pub fn solve(table: &CoeffTable, th: &Thresholds, cfg: &SolverConfig) -> HandoverSolution {
    debug_assert!(!th.avg_eff_lin.is_nan() && !th.max_lin.is_nan());
    table.check();
    let m = table.clusters.len();
    let mut mult = Multipliers::zeros(m);
    let mut anchors = Anchors::default();
    let mut best_dual = f64::INFINITY;
    let mut best_mult = mult.clone();
    let mut best_anchors = anchors;
    let mut stall = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    for k in 0..cfg.max_iters.max(1) {
        iterations = k + 1;
        let mut selection = Vec::with_capacity(m);
        let mut pos_sum = 0.0;
        for (mi, cl) in table.clusters.iter().enumerate() {
            let (sel, score) = cluster_subproblem(cl, mi, &mult, anchors, table.users, table.horizon);
            pos_sum += score;
            selection.push(sel);
        }
        let g = dual_value(pos_sum, &mult, th);
        let improved = !best_dual.is_finite() || g < best_dual - cfg.rel_tol * max_f(1.0, libm::fabs(best_dual));
        if g < best_dual {
            best_dual = g;
            best_mult = mult.clone();
            best_anchors = anchors;
        }
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                converged = true;
                break;
            }
        }
        let sg = compute_subgradients(table, &selection, th);
        anchors = sg.anchors;
        update_multipliers(&mut mult, &sg, k, cfg);
    }

    let (selection, outages, primal_value) = repair(table, th, &best_mult, best_anchors);
    let fully_feasible = th.avg_eff_lin >= 0.0 && outages.is_empty();
    HandoverSolution {
        selection,
        primal_value,
        dual_bound: best_dual,
        iterations,
        converged,
        fully_feasible,
        outages,
        multipliers: best_mult,
    }
}

#[inline]
fn max_f(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

/// Indices of `table.clusters` sorted by ascending engine cluster index;
/// the canonical accumulation order for trial sums.
fn canonical_order(table: &CoeffTable) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.clusters.len()).collect();
    order.sort_by_key(|&i| table.clusters[i].cluster);
    order
}

fn repair(
    table: &CoeffTable,
    th: &Thresholds,
    mult: &Multipliers,
    anchors: Anchors,
) -> (Vec<Option<usize>>, Vec<usize>, f64) {
    let m = table.clusters.len();
    let canon = canonical_order(table);
    let mut chosen: Vec<Option<usize>> = vec![None; m];
    let mut used_sats: Vec<usize> = Vec::new();
    let mut outages = Vec::new();
    for mi in 0..m {
        let cl = &table.clusters[mi];
        let mut order: Vec<usize> = (0..cl.candidates.len()).collect();
        let scores: Vec<f64> = cl
            .candidates
            .iter()
            .map(|c| anchored_score(c, mi, mult, anchors, table.users, table.horizon))
            .collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(Ordering::Equal)
                .then(cl.candidates[a].sat.cmp(&cl.candidates[b].sat))
        });
        let mut picked = None;
        for &ci in &order {
            let cand = &cl.candidates[ci];
            if used_sats.contains(&cand.sat) {
                continue;
            }
            if trial_feasible(table, &canon, &chosen, mi, ci, th) {
                picked = Some(ci);
                break;
            }
        }
        match picked {
            Some(ci) => {
                used_sats.push(cl.candidates[ci].sat);
                chosen[mi] = Some(ci);
            }
            None => outages.push(mi),
        }
    }
    let mut primal = 0.0;
    for (mi, sel) in chosen.iter().enumerate() {
        if let Some(ci) = sel {
            primal += table.clusters[mi].candidates[*ci].capacity;
        }
    }
    (chosen, outages, primal)
}

/// Whether `chosen` plus candidate `ci` for table cluster `mi` satisfies
/// both interference budgets. Sums run over clusters in canonical order.
fn trial_feasible(
    table: &CoeffTable,
    canon: &[usize],
    chosen: &[Option<usize>],
    mi: usize,
    ci: usize,
    th: &Thresholds,
) -> bool {
    let users = table.users;
    let horizon = table.horizon;
    for u in 0..users {
        let mut s = 0.0;
        for &idx in canon {
            let sel = if idx == mi { Some(ci) } else { chosen[idx] };
            if let Some(c) = sel {
                s += table.clusters[idx].candidates[c].avg_user[u];
            }
        }
        if s > th.avg_eff_lin {
            return false;
        }
    }
    for u in 0..users {
        for tau in 0..horizon {
            let mut s = 0.0;
            for &idx in canon {
                let sel = if idx == mi { Some(ci) } else { chosen[idx] };
                if let Some(c) = sel {
                    s += table.clusters[idx].candidates[c].slot_user[u * horizon + tau];
                }
            }
            if s > th.max_lin {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// The enumeration would exceed the combination limit.
    TooLarge { combos: u64, limit: u64 },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooLarge { combos, limit } => {
                write!(f, "{combos} assignments exceed the enumeration limit {limit}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// False when no assignment, including all-outage, meets the budgets.
    pub feasible: bool,
    pub objective: f64,
    pub selection: Vec<Option<usize>>,
}

/// Exhaustive reference optimizer. Enumerates every assignment (including
/// outages), enforcing satellite uniqueness and both budgets with the same
/// canonical sums as repair; keeps the first-found maximum so ties resolve
/// lexicographically in enumeration order (outage before candidate 0).
pub fn brute_force(table: &CoeffTable, th: &Thresholds, limit: u64) -> Result<OracleResult, OracleError> {
    let mut combos: u64 = 1;
    for cl in &table.clusters {
        combos = combos.saturating_mul(cl.candidates.len() as u64 + 1);
        if combos > limit {
            return Err(OracleError::TooLarge { combos, limit });
        }
    }
    let canon = canonical_order(table);
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    let mut current: Vec<Option<usize>> = vec![None; table.clusters.len()];
    let mut used: Vec<usize> = Vec::new();
    descend(table, th, &canon, 0, &mut current, &mut used, &mut best);
    match best {
        Some((objective, selection)) => Ok(OracleResult { feasible: true, objective, selection }),
        None => Ok(OracleResult {
            feasible: false,
            objective: 0.0,
            selection: vec![None; table.clusters.len()],
        }),
    }
}

fn descend(
    table: &CoeffTable,
    th: &Thresholds,
    canon: &[usize],
    depth: usize,
    current: &mut Vec<Option<usize>>,
    used: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<Option<usize>>)>,
) {
    if depth == table.clusters.len() {
        if !assignment_feasible(table, canon, current, th) {
            return;
        }
        let mut obj = 0.0;
        for (mi, sel) in current.iter().enumerate() {
            if let Some(ci) = sel {
                obj += table.clusters[mi].candidates[*ci].capacity;
            }
        }
        let better = match best {
            Some((b, _)) => obj > *b,
            None => true,
        };
        if better {
            *best = Some((obj, current.clone()));
        }
        return;
    }
    current[depth] = None;
    descend(table, th, canon, depth + 1, current, used, best);
    for ci in 0..table.clusters[depth].candidates.len() {
        let sat = table.clusters[depth].candidates[ci].sat;
        if used.contains(&sat) {
            continue;
        }
        current[depth] = Some(ci);
        used.push(sat);
        descend(table, th, canon, depth + 1, current, used, best);
        used.pop();
        current[depth] = None;
    }
}

fn assignment_feasible(table: &CoeffTable, canon: &[usize], sel: &[Option<usize>], th: &Thresholds) -> bool {
    for u in 0..table.users {
        let mut s = 0.0;
        for &idx in canon {
            if let Some(ci) = sel[idx] {
                s += table.clusters[idx].candidates[ci].avg_user[u];
            }
        }
        if s > th.avg_eff_lin {
            return false;
        }
    }
    for u in 0..table.users {
        for tau in 0..table.horizon {
            let mut s = 0.0;
            for &idx in canon {
                if let Some(ci) = sel[idx] {
                    s += table.clusters[idx].candidates[ci].slot_user[u * table.horizon + tau];
                }
            }
            if s > th.max_lin {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(sat: usize, capacity: f64, slot: Vec<f64>, users: usize, horizon: usize) -> Candidate {
        Candidate::from_slots(sat, capacity, users, horizon, slot)
    }

    fn single_cluster_table() -> CoeffTable {
        // One user, one slot. A: strong but dirty. B: weaker but clean.
        CoeffTable {
            users: 1,
            horizon: 1,
            clusters: vec![ClusterCoeffs {
                cluster: 0,
                candidates: vec![
                    cand(0, 2.0, vec![1.0], 1, 1),
                    cand(1, 1.0, vec![0.25], 1, 1),
                ],
            }],
        }
    }

    #[test]
    fn from_slots_derives_chronological_means() {
        let c = cand(3, 1.0, vec![1.0, 3.0, 2.0, 0.0, 0.0, 0.0], 2, 3);
        assert_eq!(c.avg_user, vec![2.0, 0.0]);
    }

    #[test]
    fn subproblem_picks_highest_score_and_clamps() {
        let t = single_cluster_table();
        let mult = Multipliers::zeros(1);
        let (sel, score) = cluster_subproblem(&t.clusters[0], 0, &mult, Anchors::default(), 1, 1);
        assert_eq!(sel, Some(0));
        assert_eq!(score, 2.0);
        // Penalize until B wins: lambda = mu = 1 makes A score 0, B 0.5.
        let mult = Multipliers { lambda: 1.0, mu: 1.0, nu: vec![0.0] };
        let (sel, score) = cluster_subproblem(&t.clusters[0], 0, &mult, Anchors::default(), 1, 1);
        assert_eq!(sel, Some(1));
        assert_eq!(score, 0.5);
        // Penalize past zero: nothing selected, score clamps to zero.
        let mult = Multipliers { lambda: 3.0, mu: 3.0, nu: vec![0.0] };
        let (sel, score) = cluster_subproblem(&t.clusters[0], 0, &mult, Anchors::default(), 1, 1);
        assert_eq!(sel, None);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn multiplier_walk_first_steps() {
        // Hand-traced projected subgradient steps on the single-cluster
        // instance with both thresholds at 0.5.
        let t = single_cluster_table();
        let th = Thresholds { avg_eff_lin: 0.5, max_lin: 0.5 };
        let cfg = SolverConfig::default();
        let mut mult = Multipliers::zeros(1);
        let anchors = Anchors::default();

        // Iteration 0: A selected, slack 0.5 - 1.0 = -0.5 on both.
        let (sel, score) = cluster_subproblem(&t.clusters[0], 0, &mult, anchors, 1, 1);
        assert_eq!((sel, score), (Some(0), 2.0));
        let g0 = dual_value(score, &mult, &th);
        assert_eq!(g0, 2.0);
        let sg = compute_subgradients(&t, &[sel], &th);
        assert_eq!(sg.s_lambda, -0.5);
        assert_eq!(sg.s_mu, -0.5);
        assert_eq!(sg.s_nu, vec![0.0]);
        update_multipliers(&mut mult, &sg, 0, &cfg);
        // 0 + (1/10) * 0.5
        assert_eq!(mult.lambda, 0.05);
        assert_eq!(mult.mu, 0.05);

        // Iteration 1: A still wins; dual shrinks to 1.9 + 0.05.
        let (sel, score) = cluster_subproblem(&t.clusters[0], 0, &mult, anchors, 1, 1);
        assert_eq!(sel, Some(0));
        assert!((score - 1.9).abs() < 1e-15);
        let g1 = dual_value(score, &mult, &th);
        assert!((g1 - 1.95).abs() < 1e-15);
        let sg = compute_subgradients(&t, &[sel], &th);
        update_multipliers(&mut mult, &sg, 1, &cfg);
        // 0.05 + (1/11) * 0.5 on both multipliers.
        assert!((mult.lambda - 0.09545454545454546).abs() < 1e-15);
        assert!((mult.mu - 0.09545454545454546).abs() < 1e-15);

        // Iteration 2 dual: 2 - 2*lambda + lambda = 2 - lambda.
        let (_, score) = cluster_subproblem(&t.clusters[0], 0, &mult, anchors, 1, 1);
        let g2 = dual_value(score, &mult, &th);
        assert!((g2 - (2.0 - 0.09545454545454546)).abs() < 1e-12);
        assert!(g2 < g1 && g1 < g0);
    }

    #[test]
    fn solve_repairs_to_the_clean_candidate() {
        let t = single_cluster_table();
        let th = Thresholds { avg_eff_lin: 0.5, max_lin: 0.5 };
        let sol = solve(&t, &th, &SolverConfig::default());
        // A violates both budgets; repair must land on B.
        assert_eq!(sol.selection, vec![Some(1)]);
        assert_eq!(sol.primal_value, 1.0);
        assert!(sol.fully_feasible);
        assert!(sol.outages.is_empty());
        // True dual minimum of this instance is 4/3.
        assert!(sol.dual_bound >= 1.0 - 1e-12);
        assert!(sol.dual_bound <= 4.0 / 3.0 + 0.05, "dual {}", sol.dual_bound);
        assert_eq!(sol.selected_sats(&t), vec![Some(1)]);
    }

    #[test]
    fn dual_bound_holds_with_disjoint_user_loads() {
        // Two clusters hurting disjoint users: the sum of per-candidate
        // worst-user loads (2.0) exceeds the coupled maximum (1.0), the
        // shape where per-candidate worst-case penalties would break the
        // bound. Anchored penalties keep it exact.
        let t = CoeffTable {
            users: 2,
            horizon: 1,
            clusters: vec![
                ClusterCoeffs {
                    cluster: 0,
                    candidates: vec![cand(0, 10.0, vec![1.0, 0.0], 2, 1)],
                },
                ClusterCoeffs {
                    cluster: 1,
                    candidates: vec![cand(1, 10.0, vec![0.0, 1.0], 2, 1)],
                },
            ],
        };
        let th = Thresholds { avg_eff_lin: 1.0, max_lin: 1.0 };
        let sol = solve(&t, &th, &SolverConfig::default());
        assert_eq!(sol.primal_value, 20.0);
        assert!(sol.dual_bound >= 20.0 - 1e-12);
        assert!(sol.fully_feasible);
        let oracle = brute_force(&t, &th, 1_000_000).unwrap();
        assert!(oracle.feasible);
        assert_eq!(oracle.objective, 20.0);
        assert!(sol.dual_bound >= oracle.objective - 1e-12);
    }

    #[test]
    fn repair_respects_satellite_uniqueness() {
        // Both clusters want satellite 7; the second must fall back.
        let t = CoeffTable {
            users: 1,
            horizon: 1,
            clusters: vec![
                ClusterCoeffs {
                    cluster: 0,
                    candidates: vec![
                        cand(7, 5.0, vec![0.1], 1, 1),
                        cand(9, 1.0, vec![0.1], 1, 1),
                    ],
                },
                ClusterCoeffs {
                    cluster: 1,
                    candidates: vec![cand(7, 4.0, vec![0.1], 1, 1)],
                },
            ],
        };
        let th = Thresholds { avg_eff_lin: 10.0, max_lin: 10.0 };
        let sol = solve(&t, &th, &SolverConfig::default());
        assert_eq!(sol.selected_sats(&t), vec![Some(7), None]);
        assert_eq!(sol.outages, vec![1]);
        assert!(!sol.fully_feasible);
        assert_eq!(sol.primal_value, 5.0);
        // The oracle can do better by giving 7 to the second cluster.
        let oracle = brute_force(&t, &th, 1_000_000).unwrap();
        assert_eq!(oracle.objective, 5.0);
        assert_eq!(oracle.selection, vec![Some(0), None]);
        assert!(sol.dual_bound >= oracle.objective - 1e-12);
    }

    #[test]
    fn oracle_reassigns_shared_satellite_when_profitable() {
        // Priority greedy gives sat 7 to cluster 0 (capacity 3); the oracle
        // pairs cluster 0 with sat 9 and cluster 1 with sat 7 (total 7).
        let t = CoeffTable {
            users: 1,
            horizon: 1,
            clusters: vec![
                ClusterCoeffs {
                    cluster: 0,
                    candidates: vec![
                        cand(7, 3.0, vec![0.0], 1, 1),
                        cand(9, 2.0, vec![0.0], 1, 1),
                    ],
                },
                ClusterCoeffs {
                    cluster: 1,
                    candidates: vec![cand(7, 5.0, vec![0.0], 1, 1)],
                },
            ],
        };
        let th = Thresholds { avg_eff_lin: 1.0, max_lin: 1.0 };
        let sol = solve(&t, &th, &SolverConfig::default());
        let oracle = brute_force(&t, &th, 1_000_000).unwrap();
        assert_eq!(oracle.objective, 7.0);
        assert_eq!(oracle.selection, vec![Some(1), Some(0)]);
        // Priority greedy keeps sat 7 on cluster 0 and strands cluster 1.
        assert_eq!(sol.primal_value, 3.0);
        assert_eq!(sol.outages, vec![1]);
        assert!(sol.dual_bound >= oracle.objective - 1e-12);
    }

    #[test]
    fn negative_budget_forces_total_outage() {
        let t = single_cluster_table();
        let th = Thresholds { avg_eff_lin: -0.1, max_lin: 0.5 };
        let sol = solve(&t, &th, &SolverConfig::default());
        assert_eq!(sol.selection, vec![None]);
        assert_eq!(sol.outages, vec![0]);
        assert!(!sol.fully_feasible);
        assert_eq!(sol.primal_value, 0.0);
        let oracle = brute_force(&t, &th, 1_000_000).unwrap();
        assert!(!oracle.feasible);
    }

    #[test]
    fn infinite_max_threshold_is_inert() {
        let t = single_cluster_table();
        let th = Thresholds { avg_eff_lin: 2.0, max_lin: f64::INFINITY };
        let sol = solve(&t, &th, &SolverConfig::default());
        assert_eq!(sol.selection, vec![Some(0)]);
        assert!(sol.fully_feasible);
        assert!(sol.dual_bound.is_finite());
        assert!(sol.dual_bound >= 2.0 - 1e-12);
    }

    #[test]
    fn empty_table_is_trivially_solved() {
        let t = CoeffTable { users: 0, horizon: 1, clusters: vec![] };
        let th = Thresholds { avg_eff_lin: 1.0, max_lin: 1.0 };
        let sol = solve(&t, &th, &SolverConfig::default());
        assert!(sol.selection.is_empty());
        assert_eq!(sol.primal_value, 0.0);
        assert!(sol.fully_feasible);
        assert_eq!(sol.dual_bound, 0.0);
        let oracle = brute_force(&t, &th, 10).unwrap();
        assert!(oracle.feasible);
        assert_eq!(oracle.objective, 0.0);
    }

    #[test]
    fn oracle_rejects_oversized_enumerations() {
        let many: Vec<Candidate> = (0..99).map(|s| cand(s, 1.0, vec![0.0], 1, 1)).collect();
        let t = CoeffTable {
            users: 1,
            horizon: 1,
            clusters: (0..4)
                .map(|m| ClusterCoeffs { cluster: m, candidates: many.clone() })
                .collect(),
        };
        let th = Thresholds { avg_eff_lin: 1.0, max_lin: 1.0 };
        assert!(matches!(
            brute_force(&t, &th, 1_000_000),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn solve_is_deterministic() {
        let t = CoeffTable {
            users: 2,
            horizon: 2,
            clusters: vec![
                ClusterCoeffs {
                    cluster: 0,
                    candidates: vec![
                        cand(0, 3.0, vec![0.3, 0.1, 0.0, 0.2], 2, 2),
                        cand(1, 2.5, vec![0.1, 0.1, 0.1, 0.1], 2, 2),
                    ],
                },
                ClusterCoeffs {
                    cluster: 1,
                    candidates: vec![
                        cand(2, 1.0, vec![0.2, 0.0, 0.1, 0.0], 2, 2),
                        cand(3, 2.0, vec![0.4, 0.4, 0.0, 0.0], 2, 2),
                    ],
                },
            ],
        };
        let th = Thresholds { avg_eff_lin: 0.35, max_lin: 0.6 };
        let a = solve(&t, &th, &SolverConfig::default());
        let b = solve(&t, &th, &SolverConfig::default());
        assert_eq!(a, b);
        assert!(a.dual_bound >= a.primal_value - 1e-12);
        let oracle = brute_force(&t, &th, 1_000_000).unwrap();
        assert!(a.dual_bound >= oracle.objective - 1e-12);
        assert!(a.primal_value <= oracle.objective + 1e-12);
    }
}
