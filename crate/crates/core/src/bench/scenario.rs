//! Seeded desk-scale scenarios.
//!
//! All three share one material: 5 mm glass-like spheres with a stiff,
//! moderately damped contact, a 2e-5 s step (about 40 steps per contact) and
//! cells of four radii, which leaves a skin cap of one radius.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::SimConfig;
use crate::physics::ContactParams;
use crate::types::{norm, Particle, Vec3, WallPlane};

pub const RADIUS: f64 = 0.005;
pub const DENSITY: f64 = 2500.0;
pub const DEFAULT_DT: f64 = 2e-5;
pub const DEFAULT_STEPS: u64 = 5000;
pub const DEFAULT_N: usize = 500;
pub const CELL_SIZE: f64 = 4.0 * RADIUS;
pub const GRAVITY: f64 = 9.81;
pub const INCLINE_DEG: f64 = 25.0;

const LATTICE_SPACING: f64 = 2.4 * RADIUS;
const PLACEMENT_RETRIES: usize = 64;

pub fn sphere_mass(radius: f64) -> f64 {
    DENSITY * 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3)
}

pub fn default_contact() -> ContactParams {
    ContactParams {
        k_n: 1e4,
        gamma_n: 1.1,
        mu_s: 0.5,
        k_t: 5e3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    SettlingBox,
    MiniHopper,
    InclinedFlow,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::SettlingBox, Self::MiniHopper, Self::InclinedFlow];

    pub fn name(self) -> &'static str {
        match self {
            Self::SettlingBox => "settling-box",
            Self::MiniHopper => "mini-hopper",
            Self::InclinedFlow => "inclined-flow",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ScenarioError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?} (expected settling-box, mini-hopper or inclined-flow)")]
    UnknownScenario(String),
    #[error("could not place particle {index} without overlap after {retries} attempts")]
    PlacementFailed { index: usize, retries: usize },
}

/// Initial particles plus the geometry and defaults they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub particles: Vec<Particle>,
    pub walls: Vec<WallPlane>,
    pub gravity: Vec3,
    pub contact: ContactParams,
    pub domain_min: Vec3,
    pub domain_max: Vec3,
    pub dt: f64,
    pub steps: u64,
    pub cell_size: f64,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Default configuration for this scenario at the given K.
    pub fn config(&self, k_factor: u32, verlet_enabled: bool) -> SimConfig {
        SimConfig {
            dt: self.dt,
            k_factor,
            gravity: self.gravity,
            cell_size: self.cell_size,
            domain_min: self.domain_min,
            domain_max: self.domain_max,
            walls: self.walls.clone(),
            contact: self.contact,
            seed: self.seed,
            steps: self.steps,
            verlet_enabled,
        }
    }

    pub fn n_static(&self) -> usize {
        self.particles.iter().filter(|p| p.is_static).count()
    }
}

/// Generates `name` with `n` particles. Pure function of `(name, n, seed)`.
pub fn make_scenario(name: &str, n: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    let kind: ScenarioKind = name.parse()?;
    match kind {
        ScenarioKind::SettlingBox => settling_box(n, seed),
        ScenarioKind::MiniHopper => mini_hopper(n, seed),
        ScenarioKind::InclinedFlow => inclined_flow(n, seed),
    }
}

/// Jittered lattice filling with rejection of overlapping placements.
struct Placer {
    rng: ChaCha8Rng,
    placed: Vec<Vec3>,
    jitter: f64,
}

impl Placer {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            placed: Vec::new(),
            // lattice clearance is 0.4 r; jitter beyond it so rejection matters
            jitter: 0.3 * RADIUS,
        }
    }

    fn place(&mut self, site: Vec3) -> Result<Vec3, ScenarioError> {
        let min_dist = 2.0 * RADIUS * 1.0001;
        for _ in 0..PLACEMENT_RETRIES {
            let offset = Vec3::new(
                self.rng.gen_range(-1.0..=1.0),
                self.rng.gen_range(-1.0..=1.0),
                self.rng.gen_range(-1.0..=1.0),
            ) * self.jitter;
            let p = site + offset;
            // only recent neighbours can be close on a lattice walk
            let clear = self.placed.iter().rev().take(512).all(|&q| norm(p - q) >= min_dist);
            if clear {
                self.placed.push(p);
                return Ok(p);
            }
        }
        Err(ScenarioError::PlacementFailed {
            index: self.placed.len(),
            retries: PLACEMENT_RETRIES,
        })
    }
}

fn box_walls(min: Vec3, max: Vec3) -> Vec<WallPlane> {
    vec![
        WallPlane::new(min, Vec3::new(0.0, 0.0, 1.0)),
        WallPlane::new(min, Vec3::new(1.0, 0.0, 0.0)),
        WallPlane::new(max, Vec3::new(-1.0, 0.0, 0.0)),
        WallPlane::new(min, Vec3::new(0.0, 1.0, 0.0)),
        WallPlane::new(max, Vec3::new(0.0, -1.0, 0.0)),
    ]
}

fn free_sphere(id: usize, position: Vec3) -> Particle {
    Particle::sphere(id, position, RADIUS, sphere_mass(RADIUS))
}

/// Spheres on a jittered lattice a short drop above the floor of a closed
/// box.
fn settling_box(n: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    let side = ((n as f64).cbrt().ceil() as usize).max(1);
    let layers = n.div_ceil(side * side).max(1);
    let width = side as f64 * LATTICE_SPACING + 2.0 * RADIUS;
    let z0 = 3.0 * RADIUS;
    let height = z0 + layers as f64 * LATTICE_SPACING + 2.0 * RADIUS;
    let domain_min = Vec3::ZERO;
    let domain_max = Vec3::new(width, width, height);

    let mut placer = Placer::new(seed);
    let mut particles = Vec::with_capacity(n);
    'fill: for layer in 0..layers {
        for j in 0..side {
            for i in 0..side {
                if particles.len() == n {
                    break 'fill;
                }
                let site = Vec3::new(
                    RADIUS + (i as f64 + 0.5) * LATTICE_SPACING,
                    RADIUS + (j as f64 + 0.5) * LATTICE_SPACING,
                    z0 + (layer as f64 + 0.5) * LATTICE_SPACING,
                );
                let p = placer.place(site)?;
                particles.push(free_sphere(particles.len(), p));
            }
        }
    }

    Ok(Scenario {
        kind: ScenarioKind::SettlingBox,
        seed,
        particles,
        walls: box_walls(domain_min, domain_max),
        gravity: Vec3::new(0.0, 0.0, -GRAVITY),
        contact: default_contact(),
        domain_min,
        domain_max,
        dt: DEFAULT_DT,
        steps: DEFAULT_STEPS,
        cell_size: CELL_SIZE,
    })
}

/// A 60° wedge with a bottom slot, extruded along y, over a catch floor.
/// Particles start on a lattice filling the wedge from just above the slot
/// and discharge through it.
fn mini_hopper(n: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    let angle = 60f64.to_radians();
    let (sin, cos) = angle.sin_cos();
    let cols_y = 6usize;
    let cols_x = 8usize;
    let depth = cols_y as f64 * LATTICE_SPACING + 2.0 * RADIUS;
    let width = cols_x as f64 * LATTICE_SPACING + 2.0 * RADIUS;
    let slot_half = 3.0 * RADIUS;
    let slot_z = 0.04;
    let center_x = width / 2.0;
    let wedge_top = slot_z + (center_x - slot_half) * angle.tan();
    let left = WallPlane::new(Vec3::new(center_x - slot_half, 0.0, slot_z), Vec3::new(sin, 0.0, cos));
    let right = WallPlane::new(Vec3::new(center_x + slot_half, 0.0, slot_z), Vec3::new(-sin, 0.0, cos));

    // sites clear of both wedge planes, bottom-up, until n are accepted
    let clearance = 1.6 * RADIUS;
    let mut sites = Vec::with_capacity(n);
    let mut layer = 0usize;
    while sites.len() < n {
        let z = slot_z + 2.0 * RADIUS + (layer as f64 + 0.5) * LATTICE_SPACING;
        for j in 0..cols_y {
            for i in 0..cols_x {
                let site = Vec3::new(
                    RADIUS + (i as f64 + 0.5) * LATTICE_SPACING,
                    RADIUS + (j as f64 + 0.5) * LATTICE_SPACING,
                    z,
                );
                if sites.len() < n
                    && left.signed_distance(site) >= clearance
                    && right.signed_distance(site) >= clearance
                {
                    sites.push(site);
                }
            }
        }
        layer += 1;
    }
    let top = sites.last().map_or(wedge_top, |s| s.z.max(wedge_top));
    let domain_min = Vec3::ZERO;
    let domain_max = Vec3::new(width, depth, top + 3.0 * RADIUS);

    let mut walls = box_walls(domain_min, domain_max);
    let extent_min = Vec3::new(domain_min.x - 1.0, domain_min.y - 1.0, slot_z);
    let extent_max = Vec3::new(domain_max.x + 1.0, domain_max.y + 1.0, wedge_top + 2.0 * RADIUS);
    walls.push(left.with_extent(extent_min, extent_max));
    walls.push(right.with_extent(extent_min, extent_max));

    let mut placer = Placer::new(seed);
    let mut particles = Vec::with_capacity(n);
    for site in sites {
        let p = placer.place(site)?;
        particles.push(free_sphere(particles.len(), p));
    }

    Ok(Scenario {
        kind: ScenarioKind::MiniHopper,
        seed,
        particles,
        walls,
        gravity: Vec3::new(0.0, 0.0, -GRAVITY),
        contact: default_contact(),
        domain_min,
        domain_max,
        dt: DEFAULT_DT,
        steps: DEFAULT_STEPS,
        cell_size: CELL_SIZE,
    })
}

/// Chute inclined by 25°, expressed in the chute frame: the floor is z = 0
/// and gravity is tilted. One fifth of the particles form a static
/// roughness layer resting on the floor; the rest start above the upstream
/// half and flow toward an end wall.
fn inclined_flow(n: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    let tilt = INCLINE_DEG.to_radians();
    let n_static = n / 5;
    let n_free = n - n_static;
    let cols_y = 5usize;
    let rough_spacing = 2.0 * RADIUS * 1.05;
    let rough_rows = n_static.div_ceil(cols_y).max(1);
    let length = (rough_rows as f64 * rough_spacing).max(16.0 * LATTICE_SPACING) + 2.0 * RADIUS;
    let depth = cols_y as f64 * LATTICE_SPACING + 2.0 * RADIUS;
    let free_cols_x = ((length / 2.0 / LATTICE_SPACING).floor() as usize).max(1);
    let free_layers = n_free.div_ceil(free_cols_x * cols_y).max(1);
    let free_z0 = 3.5 * RADIUS;
    let height = free_z0 + free_layers as f64 * LATTICE_SPACING + 4.0 * RADIUS;
    let domain_min = Vec3::ZERO;
    let domain_max = Vec3::new(length, depth, height);

    let mut particles = Vec::with_capacity(n);
    let mass = sphere_mass(RADIUS);
    for k in 0..n_static {
        let (row, col) = (k / cols_y, k % cols_y);
        let pos = Vec3::new(
            RADIUS + (row as f64 + 0.5) * rough_spacing,
            RADIUS + (col as f64 + 0.5) * (depth - 2.0 * RADIUS) / cols_y as f64,
            RADIUS,
        );
        particles.push(Particle::sphere(k, pos, RADIUS, mass).into_static());
    }

    let mut placer = Placer::new(seed);
    placer.placed = particles.iter().map(|p| p.position).collect();
    'fill: for layer in 0..free_layers {
        for j in 0..cols_y {
            for i in 0..free_cols_x {
                if particles.len() == n {
                    break 'fill;
                }
                let site = Vec3::new(
                    RADIUS + (i as f64 + 0.5) * LATTICE_SPACING,
                    RADIUS + (j as f64 + 0.5) * LATTICE_SPACING,
                    free_z0 + (layer as f64 + 0.5) * LATTICE_SPACING,
                );
                let p = placer.place(site)?;
                particles.push(free_sphere(particles.len(), p));
            }
        }
    }

    Ok(Scenario {
        kind: ScenarioKind::InclinedFlow,
        seed,
        particles,
        walls: box_walls(domain_min, domain_max),
        gravity: Vec3::new(GRAVITY * tilt.sin(), 0.0, -GRAVITY * tilt.cos()),
        contact: default_contact(),
        domain_min,
        domain_max,
        dt: DEFAULT_DT,
        steps: DEFAULT_STEPS,
        cell_size: CELL_SIZE,
    })
}
