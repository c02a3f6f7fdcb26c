//! Randomized invariant checks across the core modules.
//!
//! Each property pins a structural guarantee the simulator relies on:
//! monotone antenna falloff, rotation-invariant elevation, schedule
//! coverage, association uniqueness, weak duality of the relaxation, and
//! the sliding-window budget algebra.

use std::collections::BTreeSet;

use coexsim_core::antenna::AntennaPattern;
use coexsim_core::association::{
    associate_highest_elevation, build_grid, schedule_beams, CellGrid, RegionConfig,
    CELLS_PER_CLUSTER,
};
use coexsim_core::metrics::{empirical_cdf, fraction_above};
use coexsim_core::orbits::{
    build_walker_delta, elevation_angle_deg, is_overhead, overhead_sets, ShellParams,
    SystemTag,
};
use coexsim_core::protection::{effective_avg_threshold, HistoryBank, ProtectionConfig};
use coexsim_core::solver::{
    brute_force, solve, Candidate, ClusterCoeffs, CoeffTable, SolverConfig, Thresholds,
};
use coexsim_core::vec3::Vec3;
use coexsim_core::{db_to_lin, lin_to_db, EARTH_RADIUS_M, MU_EARTH};
use proptest::prelude::*;

fn sph(r: f64, lat_deg: f64, lon_deg: f64) -> Vec3 {
    let lat = lat_deg.to_radians();
    let lon = lon_deg.to_radians();
    Vec3::new(r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin())
}

fn region(n: usize) -> RegionConfig {
    RegionConfig {
        center_lat_deg: 31.0,
        center_lon_deg: -99.0,
        cell_radius_m: 10_000.0,
        cluster_offsets: [(0, 0), (1, 0), (0, 1)][..n].to_vec(),
        priorities: (1..=n as u32).collect(),
    }
}

fn grid(n: usize) -> CellGrid {
    build_grid(&region(n)).unwrap()
}

fn shell(alt_km: f64, planes: u32, spp: u32) -> ShellParams {
    ShellParams {
        altitude_m: alt_km * 1000.0,
        inclination_deg: 53.0,
        num_planes: planes,
        sats_per_plane: spp,
        phasing_factor: 1,
    }
}

proptest! {
    #[test]
    fn db_conversion_roundtrips(db in -300.0..300.0f64) {
        let lin = db_to_lin(db);
        prop_assert!(lin > 0.0);
        let back = lin_to_db(lin);
        prop_assert!((back - db).abs() < 1e-9 * db.abs().max(1.0), "{db} -> {back}");
    }

    #[test]
    fn pattern_gain_is_monotone_and_bounded(a in 0.0..180.0f64, b in 0.0..180.0f64) {
        for p in [AntennaPattern::tx_default(), AntennaPattern::rx_default()] {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.gain_dbi(lo) >= p.gain_dbi(hi));
            let g = p.gain_dbi(a);
            let floor = (p.peak_gain_dbi - p.sidelobe_floor_db).max(p.far_floor_dbi);
            prop_assert!(g <= p.peak_gain_dbi && g >= floor);
            let lin = p.gain_lin(a);
            prop_assert!((lin - db_to_lin(g)).abs() <= 1e-12 * lin);
        }
    }

    #[test]
    fn elevation_is_rotation_invariant(
        glat in -80.0..80.0f64,
        glon in -180.0..180.0f64,
        slat in -80.0..80.0f64,
        slon in -180.0..180.0f64,
        alt_km in 300.0..2000.0f64,
        rot in -3.14..3.14f64,
    ) {
        let g = sph(EARTH_RADIUS_M, glat, glon);
        let s = sph(EARTH_RADIUS_M + alt_km * 1000.0, slat, slon);
        let e1 = elevation_angle_deg(g, s).unwrap();
        prop_assert!((-90.0..=90.0).contains(&e1));
        let e2 = elevation_angle_deg(g.rotate_z(rot), s.rotate_z(rot)).unwrap();
        prop_assert!((e1 - e2).abs() < 1e-6, "{e1} vs {e2}");
    }

    #[test]
    fn overhead_is_monotone_in_threshold(
        slat in -60.0..60.0f64,
        slon in -130.0..-60.0f64,
        alt_km in 400.0..1200.0f64,
        eps_lo in 0.0..85.0f64,
        gap in 0.0..30.0f64,
    ) {
        let g = grid(1);
        let cl = &g.clusters[0];
        let sat = sph(EARTH_RADIUS_M + alt_km * 1000.0, slat, slon);
        let eps_hi = (eps_lo + gap).min(89.9);
        if is_overhead(sat, cl, eps_hi) {
            prop_assert!(is_overhead(sat, cl, eps_lo));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn overhead_sets_match_pointwise_test(t in 0.0..7000.0f64, eps in 5.0..60.0f64) {
        let c = build_walker_delta(&[shell(550.0, 8, 8)], SystemTag::Primary).unwrap();
        let states = c.propagate_ecef(t, true);
        let g = grid(2);
        let sets = overhead_sets(&states, &g, eps);
        for (ci, cl) in g.clusters.iter().enumerate() {
            let expect: Vec<usize> = (0..states.len())
                .filter(|&s| is_overhead(states[s].pos_m, cl, eps))
                .collect();
            prop_assert_eq!(&sets[ci], &expect, "cluster {}", ci);
        }
    }
}

proptest! {
    #[test]
    fn schedule_covers_every_cell_each_cycle(n in 1u32..=127, start in 0u64..10_000) {
        let cycle = (CELLS_PER_CLUSTER as u64).div_ceil(n as u64);
        let mut seen = BTreeSet::new();
        for s in start..start + cycle {
            let cells = schedule_beams(s, n).unwrap();
            prop_assert_eq!(cells.len(), n as usize);
            prop_assert!(cells.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(cells.iter().all(|&c| (c as usize) < CELLS_PER_CLUSTER));
            seen.extend(cells);
        }
        prop_assert_eq!(seen.len(), CELLS_PER_CLUSTER);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn association_serves_from_candidates_without_reuse(
        sets in prop::collection::vec(prop::collection::btree_set(0usize..36, 0..10), 3),
    ) {
        let g = grid(3);
        let c = build_walker_delta(&[shell(550.0, 6, 6)], SystemTag::Primary).unwrap();
        let states = c.propagate_ecef(0.0, true);
        let overhead: Vec<Vec<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
        let assoc = associate_highest_elevation(SystemTag::Primary, &states, &overhead, &g);
        prop_assert!(assoc.satellites_unique());
        let mut taken = BTreeSet::new();
        for (c, s) in assoc.serving.iter().enumerate() {
            if let Some(s) = *s {
                prop_assert!(overhead[c].contains(&s), "cluster {} got foreign sat {}", c, s);
                taken.insert(s);
            }
        }
        // A cluster stays unserved only when everything it saw was taken.
        for (c, s) in assoc.serving.iter().enumerate() {
            if s.is_none() {
                for cand in &overhead[c] {
                    prop_assert!(taken.contains(cand), "cluster {} starved while sat {} was free", c, cand);
                }
            }
        }
    }
}

/// One random relaxation instance: a coefficient table plus thresholds.
#[derive(Debug, Clone)]
struct Inst {
    table: CoeffTable,
    th: Thresholds,
}

fn inst_strategy() -> impl Strategy<Value = Inst> {
    (1usize..=3, 1usize..=2, 1usize..=2, any::<bool>())
        .prop_flat_map(|(nclusters, users, horizon, reverse)| {
            let cluster = prop::collection::btree_set(0usize..5, 1..=3).prop_flat_map(
                move |sats| {
                    let n = sats.len();
                    let sats: Vec<usize> = sats.into_iter().collect();
                    prop::collection::vec(
                        (0.0..4.0f64, prop::collection::vec(0.0..1.5f64, users * horizon)),
                        n..=n,
                    )
                    .prop_map(move |raw| {
                        sats.iter()
                            .zip(raw)
                            .map(|(&sat, (cap, slots))| {
                                Candidate::from_slots(sat, cap, users, horizon, slots)
                            })
                            .collect::<Vec<_>>()
                    })
                },
            );
            let th = (
                prop_oneof![3 => -0.5..3.0f64, 1 => Just(0.0)],
                prop_oneof![3 => 0.2..4.0f64, 1 => Just(f64::INFINITY)],
            );
            (prop::collection::vec(cluster, nclusters..=nclusters), th).prop_map(
                move |(clusters, (avg, max))| {
                    let clusters = clusters
                        .into_iter()
                        .enumerate()
                        .map(|(i, candidates)| ClusterCoeffs {
                            // Engine index order may differ from priority order.
                            cluster: if reverse { nclusters - 1 - i } else { i },
                            candidates,
                        })
                        .collect();
                    Inst {
                        table: CoeffTable { users, horizon, clusters },
                        th: Thresholds { avg_eff_lin: avg, max_lin: max },
                    }
                },
            )
        })
}

/// Recomputes the trial sums of a selection in canonical order (ascending
/// engine cluster index) and checks them against the thresholds with the
/// exact comparisons the repair pass uses.
fn selection_is_feasible(table: &CoeffTable, selection: &[Option<usize>], th: &Thresholds) -> bool {
    let mut order: Vec<usize> = (0..table.clusters.len()).collect();
    order.sort_by_key(|&i| table.clusters[i].cluster);
    for u in 0..table.users {
        let mut s = 0.0;
        for &i in &order {
            s += match selection[i] {
                Some(ci) => table.clusters[i].candidates[ci].avg_user[u],
                None => 0.0,
            };
        }
        if s > th.avg_eff_lin {
            return false;
        }
        for tau in 0..table.horizon {
            let mut s = 0.0;
            for &i in &order {
                s += match selection[i] {
                    Some(ci) => table.clusters[i].candidates[ci].slot_user[u * table.horizon + tau],
                    None => 0.0,
                };
            }
            if s > th.max_lin {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_repair_is_feasible_and_dual_dominates(inst in inst_strategy()) {
        let Inst { table, th } = inst;
        table.check();
        let sol = solve(&table, &th, &SolverConfig::default());
        let oracle = brute_force(&table, &th, 100_000).unwrap();

        // The repaired selection satisfies the dualized constraints whenever
        // anything can; a negative budget admits no selection at all.
        if th.avg_eff_lin >= 0.0 {
            prop_assert!(selection_is_feasible(&table, &sol.selection, &th));
        }

        // No satellite serves two clusters.
        let sats: Vec<usize> = sol
            .selected_sats(&table)
            .into_iter()
            .flatten()
            .collect();
        let distinct: BTreeSet<usize> = sats.iter().copied().collect();
        prop_assert_eq!(sats.len(), distinct.len());

        // Primal value is the capacity of the selection.
        let cap: f64 = sol
            .selection
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|ci| table.clusters[i].candidates[ci].capacity))
            .sum();
        prop_assert!((sol.primal_value - cap).abs() <= 1e-9 * cap.abs().max(1.0));

        // Outage bookkeeping matches the selection.
        for (i, s) in sol.selection.iter().enumerate() {
            prop_assert_eq!(s.is_none(), sol.outages.contains(&i));
        }
        prop_assert_eq!(sol.fully_feasible, th.avg_eff_lin >= 0.0 && sol.outages.is_empty());

        if th.avg_eff_lin < 0.0 {
            // Nothing, not even silence, fits a negative budget.
            prop_assert!(sol.selection.iter().all(|s| s.is_none()));
            prop_assert!(!oracle.feasible);
        } else {
            prop_assert!(oracle.feasible);
            let slack = 1e-9 * oracle.objective.abs().max(1.0);
            // Weak duality: the certified bound dominates the optimum,
            // which in turn dominates the repaired primal.
            prop_assert!(sol.dual_bound >= oracle.objective - slack,
                "dual {} < oracle {}", sol.dual_bound, oracle.objective);
            prop_assert!(sol.primal_value <= oracle.objective + slack,
                "primal {} > oracle {}", sol.primal_value, oracle.objective);
        }
    }
}

proptest! {
    #[test]
    fn cdf_is_a_distribution(xs in prop::collection::vec(-50.0..50.0f64, 1..60), x in -60.0..60.0f64) {
        let cdf = empirical_cdf(&xs);
        prop_assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        prop_assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
        let below = cdf.iter().rev().find(|(v, _)| *v <= x).map_or(0.0, |(_, f)| *f);
        prop_assert!((fraction_above(&xs, x) - (1.0 - below)).abs() < 1e-9);
    }

    #[test]
    fn effective_threshold_identity(
        users in 1usize..4,
        window in 0usize..6,
        horizon in 1usize..6,
        avg_db in -20.0..10.0f64,
        fills in prop::collection::vec(0.0..2.0f64, 0..30),
    ) {
        let cfg = ProtectionConfig::from_db(avg_db, f64::INFINITY, horizon, window).unwrap();
        let mut hist = HistoryBank::new(users, window);
        for slot in fills.chunks_exact(users) {
            hist.push_slot(slot);
        }
        let eff = effective_avg_threshold(&cfg, &hist);
        // th_eff * T_h + worst window sum == (T_w + T_h) * th_avg.
        let lhs = eff * horizon as f64 + hist.max_window_sum();
        let rhs = (window as f64 + horizon as f64) * cfg.avg_th_lin;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        // An empty window can only enlarge the budget.
        let empty = HistoryBank::new(users, window);
        prop_assert!(eff <= effective_avg_threshold(&cfg, &empty));
    }

    #[test]
    fn walker_states_stay_on_shell(
        t in 0.0..20_000.0f64,
        rot in any::<bool>(),
        planes in 2u32..6,
        spp in 2u32..6,
        alt_km in 350.0..1500.0f64,
        incl in 10.0..98.0f64,
    ) {
        let sh = ShellParams {
            altitude_m: alt_km * 1000.0,
            inclination_deg: incl,
            num_planes: planes,
            sats_per_plane: spp,
            phasing_factor: 1,
        };
        let c = build_walker_delta(&[sh], SystemTag::Secondary).unwrap();
        let r_expect = EARTH_RADIUS_M + alt_km * 1000.0;
        let states = c.propagate_ecef(t, rot);
        prop_assert_eq!(states.len(), (planes * spp) as usize);
        for s in &states {
            prop_assert!((s.pos_m.norm() - r_expect).abs() < 1e-6 * r_expect);
        }
        if !rot {
            // Circular orbit speed in the inertial frame.
            let v_expect = (MU_EARTH / r_expect).sqrt();
            for s in &states {
                prop_assert!((s.vel_mps.norm() - v_expect).abs() < 1e-6 * v_expect);
            }
        }
    }
}
