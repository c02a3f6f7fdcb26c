//! Ground cell grid, satellite-to-cluster association policies, and the
//! rotating beam schedule.
//!
//! The region is a set of hexagonal clusters, 127 cells each (a radius-6
//! hex disc), laid out on a supercluster lattice so neighboring clusters
//! tessellate without gaps. Both systems serve the identical grid with the
//! identical frequency-reuse-3 coloring, which makes co-channel overlap
//! between the systems maximal.

use alloc::vec::Vec;
use core::fmt;

use crate::orbits::{elevation_angle_deg, is_overhead, Constellation, SatelliteState, SystemTag};
use crate::vec3::Vec3;
use crate::EARTH_RADIUS_M;

/// Cells per cluster: a hex disc of ring radius 6 (1 + 6 + 12 + ... + 36).
pub const CELLS_PER_CLUSTER: usize = 127;

/// Frequency reuse factor; cells are colored 0..3 with no two adjacent
/// cells sharing a color.
pub const FREQ_REUSE: u8 = 3;

// Supercluster lattice basis in axial cell coordinates. 127 = 7^2 + 7*6 +
// 6^2, so radius-6 discs translated by (7, 6) and its 60-degree rotation
// (-6, 13) partition the hex lattice exactly.
const CLUSTER_BASIS_U: (i64, i64) = (7, 6);
const CLUSTER_BASIS_V: (i64, i64) = (-6, 13);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssocError {
    NoClusters,
    DuplicateClusterOffsets { a: usize, b: usize },
    BadPriorities,
    BadRegionCenter,
    BadCellRadius,
    BadBeamCount { n_beams: u32 },
}

impl fmt::Display for AssocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssocError::NoClusters => write!(f, "region has no clusters"),
            AssocError::DuplicateClusterOffsets { a, b } => {
                write!(f, "clusters {a} and {b} share the same center")
            }
            AssocError::BadPriorities => {
                write!(f, "priorities must be a permutation of 1..=num_clusters")
            }
            AssocError::BadRegionCenter => {
                write!(f, "region center latitude must be within [-85, 85] degrees")
            }
            AssocError::BadCellRadius => write!(f, "cell radius must be positive"),
            AssocError::BadBeamCount { n_beams } => {
                write!(f, "beam count {n_beams} outside 1..=127")
            }
        }
    }
}

/// One hexagonal ground cell.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub center_ecef: Vec3,
    /// Global axial coordinates on the shared hex lattice.
    pub axial: (i64, i64),
    /// Frequency reuse color, 0..3.
    pub color: u8,
}

/// One cluster of `CELLS_PER_CLUSTER` cells.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    pub center_ecef: Vec3,
    /// Service priority rank; 1 is served first.
    pub priority: u32,
    pub cells: Vec<Cell>,
    /// Max central angle between the cluster center and any cell center,
    /// used to prefilter overhead tests.
    pub angular_radius_rad: f64,
}

/// The full ground region shared by both systems.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub clusters: Vec<Cluster>,
    pub cell_radius_m: f64,
}

impl CellGrid {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn num_cells(&self) -> usize {
        self.clusters.len() * CELLS_PER_CLUSTER
    }

    /// Cluster indices sorted by priority rank (rank 1 first).
    pub fn priority_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.clusters.len()).collect();
        order.sort_by_key(|&n| self.clusters[n].priority);
        order
    }
}

/// Region description consumed by [`build_grid`].
#[derive(Debug, Clone)]
pub struct RegionConfig {
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    pub cell_radius_m: f64,
    /// Cluster centers as integer coordinates on the supercluster lattice;
    /// (0, 0) is the region center.
    pub cluster_offsets: Vec<(i32, i32)>,
    /// Permutation of 1..=len(cluster_offsets); 1 is served first.
    pub priorities: Vec<u32>,
}

/// Axial unit directions of the hex lattice, in ring-walk order.
const HEX_DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

/// Enumerate the local axial coordinates of a radius-6 hex disc: center
/// first, then rings 1..=6 walked in a fixed spiral.
fn disc_axial() -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(CELLS_PER_CLUSTER);
    out.push((0, 0));
    for ring in 1i64..=6 {
        let mut q = HEX_DIRS[4].0 * ring;
        let mut r = HEX_DIRS[4].1 * ring;
        for dir in HEX_DIRS {
            for _ in 0..ring {
                out.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
    }
    out
}

/// Reuse-3 coloring: `(q - r) mod 3` never matches any of a cell's six
/// neighbors.
fn cell_color(q: i64, r: i64) -> u8 {
    (((q - r) % 3 + 3) % 3) as u8
}

fn axial_to_local_m(q: i64, r: i64, spacing_m: f64) -> (f64, f64) {
    let x = spacing_m * (q as f64 + r as f64 / 2.0);
    let y = spacing_m * (libm::sqrt(3.0) / 2.0) * r as f64;
    (x, y)
}

/// Build the shared cell grid from a region description.
///
/// Cells are laid out on a local tangent plane at the region center and
/// projected back to the sphere; adjacent-cell color distinctness holds
/// across cluster boundaries because the coloring uses global lattice
/// coordinates.
pub fn build_grid(region: &RegionConfig) -> Result<CellGrid, AssocError> {
    if region.cluster_offsets.is_empty() {
        return Err(AssocError::NoClusters);
    }
    if !(region.cell_radius_m > 0.0) {
        return Err(AssocError::BadCellRadius);
    }
    if !region.center_lat_deg.is_finite()
        || region.center_lat_deg.abs() > 85.0
        || !region.center_lon_deg.is_finite()
    {
        return Err(AssocError::BadRegionCenter);
    }
    for i in 0..region.cluster_offsets.len() {
        for j in (i + 1)..region.cluster_offsets.len() {
            if region.cluster_offsets[i] == region.cluster_offsets[j] {
                return Err(AssocError::DuplicateClusterOffsets { a: i, b: j });
            }
        }
    }
    let n = region.cluster_offsets.len();
    if region.priorities.len() != n {
        return Err(AssocError::BadPriorities);
    }
    let mut seen = alloc::vec![false; n];
    for &p in &region.priorities {
        if p == 0 || p as usize > n || seen[p as usize - 1] {
            return Err(AssocError::BadPriorities);
        }
        seen[p as usize - 1] = true;
    }

    // Local tangent basis at the region center.
    let lat = region.center_lat_deg.to_radians();
    let lon = region.center_lon_deg.to_radians();
    let up = Vec3::new(
        libm::cos(lat) * libm::cos(lon),
        libm::cos(lat) * libm::sin(lon),
        libm::sin(lat),
    );
    let east = Vec3::new(-libm::sin(lon), libm::cos(lon), 0.0);
    let north = up.cross(east);
    let origin = up * EARTH_RADIUS_M;
    let project = |x_m: f64, y_m: f64| -> Vec3 {
        (origin + east * x_m + north * y_m).normalized() * EARTH_RADIUS_M
    };

    // Center-to-center spacing of adjacent hex cells with circumradius R.
    let spacing = libm::sqrt(3.0) * region.cell_radius_m;
    let local = disc_axial();

    let mut clusters = Vec::with_capacity(n);
    for (ci, &(a, b)) in region.cluster_offsets.iter().enumerate() {
        let base_q = a as i64 * CLUSTER_BASIS_U.0 + b as i64 * CLUSTER_BASIS_V.0;
        let base_r = a as i64 * CLUSTER_BASIS_U.1 + b as i64 * CLUSTER_BASIS_V.1;
        let mut cells = Vec::with_capacity(CELLS_PER_CLUSTER);
        for &(lq, lr) in &local {
            let (q, r) = (base_q + lq, base_r + lr);
            let (x, y) = axial_to_local_m(q, r, spacing);
            cells.push(Cell { center_ecef: project(x, y), axial: (q, r), color: cell_color(q, r) });
        }
        let center_ecef = cells[0].center_ecef;
        let angular_radius_rad = cells
            .iter()
            .map(|c| center_ecef.angle_to(c.center_ecef))
            .fold(0.0f64, f64::max);
        let up_c = center_ecef.normalized();
        clusters.push(Cluster {
            center_lat_deg: libm::asin(up_c.z.clamp(-1.0, 1.0)).to_degrees(),
            center_lon_deg: libm::atan2(up_c.y, up_c.x).to_degrees(),
            center_ecef,
            priority: region.priorities[ci],
            cells,
            angular_radius_rad,
        });
    }
    Ok(CellGrid { clusters, cell_radius_m: region.cell_radius_m })
}

// ===== Association =====

/// Per-cluster serving satellite assignment for one system.
///
/// Invariants: at most one satellite per cluster (by construction of the
/// `serving` vector) and no satellite serves two clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMatrix {
    pub system: SystemTag,
    /// `serving[n]` is the satellite index serving cluster `n`, if any.
    pub serving: Vec<Option<usize>>,
}

impl AssociationMatrix {
    pub fn empty(system: SystemTag, num_clusters: usize) -> Self {
        AssociationMatrix { system, serving: alloc::vec![None; num_clusters] }
    }

    pub fn served_count(&self) -> usize {
        self.serving.iter().filter(|s| s.is_some()).count()
    }

    /// True when no satellite serves more than one cluster.
    pub fn satellites_unique(&self) -> bool {
        let mut seen: Vec<usize> = self.serving.iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

/// Highest-elevation policy.
///
/// Every cluster first nominates its highest-elevation overhead satellite
/// (elevation taken at the cluster center; ties broken by satellite index).
/// Contested nominations go to the higher-priority cluster, and a second
/// greedy pass in priority order fills the remaining clusters from what is
/// left of their overhead sets.
pub fn associate_highest_elevation(
    system: SystemTag,
    states: &[SatelliteState],
    overhead: &[Vec<usize>],
    grid: &CellGrid,
) -> AssociationMatrix {
    let n = grid.num_clusters();
    debug_assert_eq!(overhead.len(), n);
    let elev = |cluster: usize, sat: usize| -> f64 {
        elevation_angle_deg(grid.clusters[cluster].center_ecef, states[sat].pos_m).unwrap_or(-90.0)
    };
    let best_of = |cluster: usize, exclude: &dyn Fn(usize) -> bool| -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for &s in &overhead[cluster] {
            if exclude(s) {
                continue;
            }
            let e = elev(cluster, s);
            let better = match best {
                None => true,
                Some((be, bs)) => e > be || (e == be && s < bs),
            };
            if better {
                best = Some((e, s));
            }
        }
        best.map(|(_, s)| s)
    };

    // Phase 1: independent nominations; contested satellites go to the
    // higher-priority cluster.
    let nominated: Vec<Option<usize>> = (0..n).map(|c| best_of(c, &|_| false)).collect();
    let mut serving: Vec<Option<usize>> = alloc::vec![None; n];
    for c in 0..n {
        if let Some(s) = nominated[c] {
            let wins = (0..n).all(|o| {
                o == c
                    || nominated[o] != Some(s)
                    || grid.clusters[o].priority > grid.clusters[c].priority
            });
            if wins {
                serving[c] = Some(s);
            }
        }
    }
    // Phase 2: losers pick greedily in priority order from what remains.
    let mut taken: Vec<usize> = serving.iter().flatten().copied().collect();
    for &c in &grid.priority_order() {
        if serving[c].is_some() {
            continue;
        }
        if let Some(s) = best_of(c, &|s| taken.contains(&s)) {
            serving[c] = Some(s);
            taken.push(s);
        }
    }
    AssociationMatrix { system, serving }
}

/// Environment needed by the max-contact-time policy to look ahead.
pub struct MctContext<'a> {
    pub constellation: &'a Constellation,
    pub grid: &'a CellGrid,
    pub eps_min_deg: f64,
    pub slot_s: f64,
    pub earth_rotation: bool,
}

/// Remaining visibility of a satellite over a cluster, counted in whole
/// slots starting at `slot`, capped at one orbital period.
pub fn remaining_visibility_slots(ctx: &MctContext<'_>, sat: usize, cluster: usize, slot: u64) -> u64 {
    let cap = libm::ceil(ctx.constellation.period_s(sat) / ctx.slot_s) as u64;
    let cl = &ctx.grid.clusters[cluster];
    let mut k = 0;
    while k < cap {
        let t = (slot + k) as f64 * ctx.slot_s;
        let st = ctx.constellation.state_at(sat, t, ctx.earth_rotation);
        if !is_overhead(st.pos_m, cl, ctx.eps_min_deg) {
            break;
        }
        k += 1;
    }
    k
}

/// Max-contact-time policy.
///
/// A cluster keeps its serving satellite until the slot at which that
/// satellite is no longer overhead; at that point (and initially) it takes
/// the overhead satellite with the longest remaining visibility. Clusters
/// are processed in priority order, so contested picks resolve to the
/// higher-priority cluster; ties on visibility break by satellite index.
pub fn associate_max_contact(
    prev: &AssociationMatrix,
    slot: u64,
    states: &[SatelliteState],
    overhead: &[Vec<usize>],
    ctx: &MctContext<'_>,
) -> AssociationMatrix {
    let n = ctx.grid.num_clusters();
    let mut serving: Vec<Option<usize>> = alloc::vec![None; n];
    let mut taken: Vec<usize> = Vec::new();
    // Keep serving satellites that are still overhead.
    for c in 0..n {
        if let Some(s) = prev.serving.get(c).copied().flatten() {
            if is_overhead(states[s].pos_m, &ctx.grid.clusters[c], ctx.eps_min_deg) {
                serving[c] = Some(s);
                taken.push(s);
            }
        }
    }
    for &c in &ctx.grid.priority_order() {
        if serving[c].is_some() {
            continue;
        }
        let mut best: Option<(u64, usize)> = None;
        for &s in &overhead[c] {
            if taken.contains(&s) {
                continue;
            }
            let vis = remaining_visibility_slots(ctx, s, c, slot);
            let better = match best {
                None => true,
                Some((bv, bs)) => vis > bv || (vis == bv && s < bs),
            };
            if better {
                best = Some((vis, s));
            }
        }
        if let Some((_, s)) = best {
            serving[c] = Some(s);
            taken.push(s);
        }
    }
    AssociationMatrix { system: prev.system, serving }
}

// ===== Beam schedule =====

/// Cells of a cluster illuminated at `slot` by a satellite with `n_beams`
/// beams: `{(slot * n_beams + j) mod 127 : j in 0..n_beams}`, returned in
/// ascending cell order. Every cell is revisited within
/// `ceil(127 / n_beams)` slots.
pub fn schedule_beams(slot: u64, n_beams: u32) -> Result<Vec<u16>, AssocError> {
    if n_beams == 0 || n_beams as usize > CELLS_PER_CLUSTER {
        return Err(AssocError::BadBeamCount { n_beams });
    }
    let base = (slot % CELLS_PER_CLUSTER as u64) * n_beams as u64;
    let mut cells: Vec<u16> = (0..n_beams as u64)
        .map(|j| ((base + j) % CELLS_PER_CLUSTER as u64) as u16)
        .collect();
    cells.sort_unstable();
    cells.dedup();
    Ok(cells)
}
