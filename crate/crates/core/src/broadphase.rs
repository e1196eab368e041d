//! Candidate-pair generation.
//!
//! Three layers live here:
//!
//! - a uniform linked-cell grid and its pair search, which visits each cell
//!   and only the cells of lower linear index in its 3x3x3 neighbourhood so
//!   every unordered cell pair is examined once;
//! - an exhaustive O(n²) search used as an oracle and for shadow audits;
//! - the local Verlet buffer: every particle's search radius is its cut-off
//!   plus a skin sized from its own speed, and the resulting list is reused
//!   until some particle has moved further than its skin since the build.
//!
//! The skin is `K * |v| * dt`, capped at `cell_size / 2 - cutoff` so that two
//! inflated radii never exceed one cell edge and the adjacent-cell stencil
//! stays sufficient.

use thiserror::Error;

use crate::config::SimConfig;
use crate::types::{norm, Particle, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BroadPhaseError {
    #[error("particle {id}: cut-off {cutoff} exceeds half the cell size {cell_size}")]
    CapNegative { id: usize, cutoff: f64, cell_size: f64 },
    #[error("particle {id}: search radius {radius} exceeds half the cell size {cell_size}")]
    SearchRadiusExceedsCell { id: usize, radius: f64, cell_size: f64 },
    #[error("expected {expected} entries, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
}

/// How per-particle skins are chosen at build time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkinRule {
    /// `K * |v| * dt`, capped by the cell geometry.
    #[default]
    Local,
    /// The same skin for every particle: its own radius, capped by the cell
    /// geometry. Independent of K and velocity.
    UniformRadius,
    /// No skin at all; the list is the plain cut-off broad-phase.
    Zero,
}

/// Largest skin a particle may carry: `cell_size / 2 - cutoff`.
pub fn skin_cap(p: &Particle, cell_size: f64) -> Result<f64, BroadPhaseError> {
    let cap = cell_size / 2.0 - p.cutoff;
    if cap < 0.0 {
        return Err(BroadPhaseError::CapNegative {
            id: p.id,
            cutoff: p.cutoff,
            cell_size,
        });
    }
    Ok(cap)
}

/// Velocity-based local skin, `min(K |v| dt, cell_size/2 - cutoff)`.
pub fn compute_skin(p: &Particle, k_factor: u32, dt: f64, cell_size: f64) -> Result<f64, BroadPhaseError> {
    let cap = skin_cap(p, cell_size)?;
    if p.is_static {
        return Ok(0.0);
    }
    let raw = f64::from(k_factor) * norm(p.velocity) * dt;
    Ok(raw.min(cap))
}

fn skin_for(p: &Particle, cfg: &SimConfig, rule: SkinRule) -> Result<f64, BroadPhaseError> {
    match rule {
        SkinRule::Local => compute_skin(p, cfg.k_factor, cfg.dt, cfg.cell_size),
        SkinRule::UniformRadius => {
            let cap = skin_cap(p, cfg.cell_size)?;
            Ok(if p.is_static { 0.0 } else { p.radius.min(cap) })
        }
        SkinRule::Zero => skin_cap(p, cfg.cell_size).map(|_| 0.0),
    }
}

/// Uniform spatial decomposition. Cells are stored in compressed form:
/// `ids[start[c]..start[c + 1]]` are the particles of linear cell `c`, in
/// ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    start: Vec<usize>,
    ids: Vec<usize>,
    cell_of: Vec<usize>,
}

impl CellGrid {
    pub fn new(origin: Vec3, extent: Vec3, cell_size: f64, particles: &[Particle]) -> Self {
        let dim = |len: f64| ((len / cell_size).ceil() as usize).max(1);
        let dims = [dim(extent.x), dim(extent.y), dim(extent.z)];
        let mut grid = Self {
            origin,
            cell_size,
            dims,
            start: Vec::new(),
            ids: Vec::new(),
            cell_of: Vec::with_capacity(particles.len()),
        };
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; n_cells + 1];
        for p in particles {
            let c = grid.linear(grid.coords_of(p.position));
            grid.cell_of.push(c);
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut cursor = counts.clone();
        let mut ids = vec![0usize; particles.len()];
        for (i, &c) in grid.cell_of.iter().enumerate() {
            ids[cursor[c]] = i;
            cursor[c] += 1;
        }
        grid.start = counts;
        grid.ids = ids;
        grid
    }

    /// Clamped integer cell coordinates of a position.
    pub fn coords_of(&self, p: Vec3) -> [usize; 3] {
        let rel = p - self.origin;
        let axis = |v: f64, d: usize| {
            let c = (v / self.cell_size).floor();
            if c <= 0.0 || c.is_nan() {
                0
            } else {
                (c as usize).min(d - 1)
            }
        };
        [
            axis(rel.x, self.dims[0]),
            axis(rel.y, self.dims[1]),
            axis(rel.z, self.dims[2]),
        ]
    }

    pub fn linear(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn n_cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Particle ids resident in linear cell `c`.
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.ids[self.start[c]..self.start[c + 1]]
    }

    /// Linear cell index particle `id` was binned into.
    pub fn cell_of(&self, id: usize) -> usize {
        self.cell_of[id]
    }

    pub fn n_particles(&self) -> usize {
        self.cell_of.len()
    }
}

/// Bins every particle into the configured domain grid. Particles outside
/// the domain land in the nearest boundary cell.
pub fn build_grid(particles: &[Particle], cfg: &SimConfig) -> CellGrid {
    CellGrid::new(
        cfg.domain_min,
        cfg.domain_max - cfg.domain_min,
        cfg.cell_size,
        particles,
    )
}

/// Canonically ordered candidate pairs: `a < b`, sorted, no duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairList {
    pairs: Vec<(usize, usize)>,
}

impl PairList {
    /// Canonicalizes arbitrary pairs. Self-pairs are dropped.
    pub fn from_unsorted(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pairs: Vec<_> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn is_subset_of(&self, other: &PairList) -> bool {
        self.pairs.iter().all(|&(a, b)| other.contains(a, b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

#[inline]
fn in_range(particles: &[Particle], radius: &[f64], a: usize, b: usize) -> bool {
    let (lo, hi) = (a.min(b), a.max(b));
    norm(particles[lo].position - particles[hi].position) <= radius[lo] + radius[hi]
}

fn check_sizes(expected: usize, actual: usize) -> Result<(), BroadPhaseError> {
    if expected != actual {
        return Err(BroadPhaseError::SizeMismatch { expected, actual });
    }
    Ok(())
}

// Rounding in cutoff + (cell/2 - cutoff) may land a few ulps above cell/2.
const HALF_CELL_SLACK: f64 = 1e-12;

/// Linked-cell pair search. Returns the list and the number of pair
/// distance tests performed.
pub fn linked_cell_pairs_counted(
    grid: &CellGrid,
    particles: &[Particle],
    search_radius: &[f64],
) -> Result<(PairList, u64), BroadPhaseError> {
    check_sizes(particles.len(), search_radius.len())?;
    check_sizes(particles.len(), grid.n_particles())?;
    let half = grid.cell_size / 2.0;
    for (id, &radius) in search_radius.iter().enumerate() {
        if !(radius <= half * (1.0 + HALF_CELL_SLACK)) {
            return Err(BroadPhaseError::SearchRadiusExceedsCell {
                id,
                radius,
                cell_size: grid.cell_size,
            });
        }
    }

    let mut pairs = Vec::new();
    let mut tests = 0u64;
    let [nx, ny, nz] = grid.dims;
    for cz in 0..nz {
        for cy in 0..ny {
            for cx in 0..nx {
                let a = grid.linear([cx, cy, cz]);
                let members_a = grid.cell(a);
                if members_a.is_empty() {
                    continue;
                }
                for (i, &pa) in members_a.iter().enumerate() {
                    for &pb in &members_a[i + 1..] {
                        tests += 1;
                        if in_range(particles, search_radius, pa, pb) {
                            pairs.push((pa, pb));
                        }
                    }
                }
                for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (bx, by, bz) = (cx as i64 + dx, cy as i64 + dy, cz as i64 + dz);
                            if bx < 0 || by < 0 || bz < 0 {
                                continue;
                            }
                            let (bx, by, bz) = (bx as usize, by as usize, bz as usize);
                            if bx >= nx || by >= ny || bz >= nz {
                                continue;
                            }
                            let b = grid.linear([bx, by, bz]);
                            // each pair of cells once
                            if b >= a {
                                continue;
                            }
                            for &pa in members_a {
                                for &pb in grid.cell(b) {
                                    tests += 1;
                                    if in_range(particles, search_radius, pa, pb) {
                                        pairs.push((pa.min(pb), pa.max(pb)));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    Ok((PairList { pairs }, tests))
}

/// Pairs `(a, b)` with `|X_a - X_b| <= r_a + r_b`, found through the grid.
pub fn linked_cell_pairs(
    grid: &CellGrid,
    particles: &[Particle],
    search_radius: &[f64],
) -> Result<PairList, BroadPhaseError> {
    linked_cell_pairs_counted(grid, particles, search_radius).map(|(list, _)| list)
}

/// Exhaustive O(n²) version of [`linked_cell_pairs`].
pub fn brute_force_pairs(particles: &[Particle], search_radius: &[f64]) -> Result<PairList, BroadPhaseError> {
    check_sizes(particles.len(), search_radius.len())?;
    let mut pairs = Vec::new();
    for a in 0..particles.len() {
        for b in a + 1..particles.len() {
            if in_range(particles, search_radius, a, b) {
                pairs.push((a, b));
            }
        }
    }
    Ok(PairList { pairs })
}

/// Cached candidate list plus the per-particle snapshot it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct VerletState {
    pub list: PairList,
    pub reference_positions: Vec<Vec3>,
    pub frozen_skins: Vec<f64>,
    pub build_step: u64,
    /// Distance tests the build performed.
    pub pairs_tested: u64,
}

/// Builds the Verlet list with local skins, or zero skins when the buffer
/// is disabled in `cfg`.
pub fn verlet_build(particles: &[Particle], cfg: &SimConfig, step: u64) -> Result<VerletState, BroadPhaseError> {
    let rule = if cfg.verlet_enabled {
        SkinRule::Local
    } else {
        SkinRule::Zero
    };
    verlet_build_with(particles, cfg, step, rule)
}

pub fn verlet_build_with(
    particles: &[Particle],
    cfg: &SimConfig,
    step: u64,
    rule: SkinRule,
) -> Result<VerletState, BroadPhaseError> {
    let frozen_skins = particles
        .iter()
        .map(|p| skin_for(p, cfg, rule))
        .collect::<Result<Vec<_>, _>>()?;
    let search_radius: Vec<f64> = particles
        .iter()
        .zip(&frozen_skins)
        .map(|(p, skin)| p.cutoff + skin)
        .collect();
    let grid = build_grid(particles, cfg);
    let (list, pairs_tested) = linked_cell_pairs_counted(&grid, particles, &search_radius)?;
    Ok(VerletState {
        list,
        reference_positions: particles.iter().map(|p| p.position).collect(),
        frozen_skins,
        build_step: step,
        pairs_tested,
    })
}

/// First particle whose straight-line displacement since the build exceeds
/// its frozen skin.
pub fn first_violation(state: &VerletState, particles: &[Particle]) -> Result<Option<usize>, BroadPhaseError> {
    check_sizes(state.reference_positions.len(), particles.len())?;
    Ok(particles
        .iter()
        .zip(state.reference_positions.iter().zip(&state.frozen_skins))
        .position(|(p, (&reference, &skin))| norm(p.position - reference) > skin))
}

/// True iff some particle moved strictly more than its frozen skin.
pub fn verlet_needs_rebuild(state: &VerletState, particles: &[Particle]) -> Result<bool, BroadPhaseError> {
    first_violation(state, particles).map(|v| v.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests::base_config;

    fn at(id: usize, x: f64, y: f64, z: f64, r: f64) -> Particle {
        Particle::sphere(id, Vec3::new(x, y, z), r, 1.0)
    }

    #[test]
    fn skin_cap_inactive() {
        let mut p = at(0, 0.0, 0.0, 0.0, 0.005);
        p.velocity = Vec3::new(1.0, 0.0, 0.0);
        let s = compute_skin(&p, 200, 1e-5, 0.05).unwrap();
        assert!((s - 0.002).abs() < 1e-15);
    }

    #[test]
    fn skin_cap_binds() {
        let mut p = at(0, 0.0, 0.0, 0.0, 0.005);
        p.velocity = Vec3::new(0.0, 1.0, 0.0);
        let s = compute_skin(&p, 5000, 1e-5, 0.02).unwrap();
        assert!((s - 0.005).abs() < 1e-15);
    }

    #[test]
    fn skin_zero_k() {
        let mut p = at(0, 0.0, 0.0, 0.0, 0.005);
        p.velocity = Vec3::new(3.0, -2.0, 7.0);
        assert_eq!(compute_skin(&p, 0, 1e-5, 0.02).unwrap(), 0.0);
    }

    #[test]
    fn skin_static_and_negative_cap() {
        let p = at(0, 0.0, 0.0, 0.0, 0.005).into_static();
        assert_eq!(compute_skin(&p, 1000, 1e-5, 0.02).unwrap(), 0.0);
        let q = at(1, 0.0, 0.0, 0.0, 0.011);
        assert!(matches!(
            compute_skin(&q, 1, 1e-5, 0.02),
            Err(BroadPhaseError::CapNegative { id: 1, .. })
        ));
    }

    #[test]
    fn single_particle_single_cell() {
        let grid = CellGrid::new(Vec3::ZERO, Vec3::new(4.0, 4.0, 4.0), 1.0, &[at(0, 2.0, 2.0, 2.0, 0.1)]);
        assert_eq!(grid.dims, [4, 4, 4]);
        let occupied = (0..grid.n_cells()).filter(|&c| !grid.cell(c).is_empty()).count();
        assert_eq!(occupied, 1);
    }

    #[test]
    fn coincident_particles_share_cell() {
        let ps = [at(0, 1.5, 0.5, 0.5, 0.1), at(1, 1.5, 0.5, 0.5, 0.1)];
        let grid = CellGrid::new(Vec3::ZERO, Vec3::new(4.0, 4.0, 4.0), 1.0, &ps);
        assert_eq!(grid.cell_of(0), grid.cell_of(1));
        assert_eq!(grid.cell(grid.cell_of(0)), &[0, 1]);
    }

    #[test]
    fn outside_particles_clamp_to_boundary() {
        let ps = [at(0, -3.0, 9.0, 2.5, 0.1)];
        let grid = CellGrid::new(Vec3::ZERO, Vec3::new(4.0, 4.0, 4.0), 1.0, &ps);
        assert_eq!(grid.coords_of(ps[0].position), [0, 3, 2]);
    }

    #[test]
    fn dims_round_up() {
        let cfg = SimConfig {
            domain_max: Vec3::new(0.105, 0.1, 0.02),
            ..base_config()
        };
        let grid = build_grid(&[], &cfg);
        assert_eq!(grid.dims, [6, 5, 1]);
    }

    #[test]
    fn inclusive_boundary() {
        let ps = [at(0, 0.0, 0.0, 0.0, 0.5), at(1, 1.0, 0.0, 0.0, 0.5)];
        let grid = CellGrid::new(Vec3::new(-2.0, -2.0, -2.0), Vec3::new(4.0, 4.0, 4.0), 1.0, &ps);
        let list = linked_cell_pairs(&grid, &ps, &[0.5, 0.5]).unwrap();
        assert_eq!(list.pairs(), &[(0, 1)]);

        let ps = [at(0, 0.0, 0.0, 0.0, 0.5), at(1, 1.000001, 0.0, 0.0, 0.5)];
        let grid = CellGrid::new(Vec3::new(-2.0, -2.0, -2.0), Vec3::new(4.0, 4.0, 4.0), 1.0, &ps);
        assert!(linked_cell_pairs(&grid, &ps, &[0.5, 0.5]).unwrap().is_empty());
    }

    #[test]
    fn radius_above_half_cell_rejected() {
        let ps = [at(0, 0.0, 0.0, 0.0, 0.5)];
        let grid = CellGrid::new(Vec3::ZERO, Vec3::new(4.0, 4.0, 4.0), 1.0, &ps);
        assert!(matches!(
            linked_cell_pairs(&grid, &ps, &[0.6]),
            Err(BroadPhaseError::SearchRadiusExceedsCell { id: 0, .. })
        ));
    }

    #[test]
    fn brute_force_examples() {
        assert!(brute_force_pairs(&[], &[]).unwrap().is_empty());
        let ps = [
            at(0, 0.0, 0.0, 0.0, 0.6),
            at(1, 1.0, 0.0, 0.0, 0.6),
            at(2, 2.0, 0.0, 0.0, 0.6),
        ];
        let list = brute_force_pairs(&ps, &[0.6; 3]).unwrap();
        assert_eq!(list.pairs(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn coincident_pair_is_candidate() {
        let ps = [at(0, 0.5, 0.5, 0.5, 0.1), at(1, 0.5, 0.5, 0.5, 0.1)];
        assert_eq!(brute_force_pairs(&ps, &[0.1, 0.1]).unwrap().pairs(), &[(0, 1)]);
    }

    #[test]
    fn pair_list_canonicalizes() {
        let list = PairList::from_unsorted([(3, 1), (1, 3), (0, 2), (2, 2)]);
        assert_eq!(list.pairs(), &[(0, 2), (1, 3)]);
        assert!(list.contains(3, 1));
        assert!(!list.contains(0, 1));
    }

    #[test]
    fn build_at_rest_equals_cutoff_list() {
        let cfg = SimConfig {
            domain_max: Vec3::new(0.1, 0.1, 0.1),
            ..base_config()
        };
        let ps: Vec<_> = (0..20)
            .map(|i| at(i, 0.005 + 0.0045 * i as f64, 0.05, 0.05, 0.005))
            .collect();
        let state = verlet_build(&ps, &cfg, 3).unwrap();
        assert!(state.frozen_skins.iter().all(|&s| s == 0.0));
        let cutoffs: Vec<f64> = ps.iter().map(|p| p.cutoff).collect();
        assert_eq!(state.list, brute_force_pairs(&ps, &cutoffs).unwrap());
        assert_eq!(state.build_step, 3);
        assert!(!verlet_needs_rebuild(&state, &ps).unwrap());
    }

    #[test]
    fn k_zero_matches_rest_case() {
        let cfg = SimConfig {
            k_factor: 0,
            domain_max: Vec3::new(0.1, 0.1, 0.1),
            ..base_config()
        };
        let moving: Vec<_> = (0..20)
            .map(|i| at(i, 0.005 + 0.0045 * i as f64, 0.05, 0.05, 0.005).with_velocity(Vec3::new(i as f64, 1.0, -2.0)))
            .collect();
        let resting: Vec<_> = moving.iter().cloned().map(|p| p.with_velocity(Vec3::ZERO)).collect();
        let a = verlet_build(&moving, &cfg, 0).unwrap();
        let b = verlet_build(&resting, &cfg, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rebuild_condition_is_strict() {
        let state = VerletState {
            list: PairList::default(),
            reference_positions: vec![Vec3::ZERO, Vec3::ZERO],
            frozen_skins: vec![0.25, 0.002],
            build_step: 0,
            pairs_tested: 0,
        };
        let mut ps = vec![at(0, 0.0, 0.0, 0.0, 0.1), at(1, 0.0, 0.0, 0.0, 0.1)];
        assert!(!verlet_needs_rebuild(&state, &ps).unwrap());
        ps[0].position = Vec3::new(0.25, 0.0, 0.0);
        assert!(!verlet_needs_rebuild(&state, &ps).unwrap());
        ps[1].position = Vec3::new(0.0, 0.003, 0.0);
        assert!(verlet_needs_rebuild(&state, &ps).unwrap());
        assert_eq!(first_violation(&state, &ps).unwrap(), Some(1));
        assert!(matches!(
            verlet_needs_rebuild(&state, &ps[..1]),
            Err(BroadPhaseError::SizeMismatch { expected: 2, actual: 1 })
        ));
    }
}
