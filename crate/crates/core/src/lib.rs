//! Discrete element core with a local Verlet-buffer broad-phase.
//!
//! Each particle's broad-phase radius is its cut-off plus a skin sized from
//! its own speed (`K * |v| * dt`, capped by the cell geometry). The candidate
//! list is reused until some particle has moved further than its skin since
//! the last build, which keeps every pair that can collide in the list while
//! skipping most broad-phase executions.
//!
//! Modules follow the pipeline order: [`broadphase`] builds candidate lists,
//! [`narrowphase`] resolves exact contacts, [`physics`] turns them into forces
//! and integrates, [`engine`] runs the loop and [`bench`] drives K-sweeps.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod broadphase;
pub mod config;
pub mod engine;
pub mod narrowphase;
pub mod physics;
pub mod types;

pub use broadphase::{
    brute_force_pairs, build_grid, compute_skin, linked_cell_pairs, verlet_build, verlet_needs_rebuild,
    BroadPhaseError, CellGrid, PairList, SkinRule, VerletState,
};
pub use config::{validate_config, ConfigError, SimConfig};
pub use engine::{run, PhaseMetrics, RunOptions, RunOutput, SimError, SimState, Simulation, TimingMode};
pub use narrowphase::{resolve_contacts, sphere_overlap, sphere_plane_overlap, Contact, Partner};
pub use physics::{spring_dashpot_force, velocity_verlet_step, ContactParams, ForceAccumulator};
pub use types::{norm, Particle, Vec3, WallPlane};
