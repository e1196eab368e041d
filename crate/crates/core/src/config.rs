//! Simulation configuration and its validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::ContactParams;
use crate::types::{norm, Particle, Vec3, WallPlane};

/// Run parameters. Loaded from JSON with exactly these field names; unknown
/// fields are rejected so typos in sweep configs fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Time step (s).
    pub dt: f64,
    /// Number of broad-phase executions the skin is sized to skip.
    pub k_factor: u32,
    pub gravity: Vec3,
    /// Uniform linked-cell edge length (m).
    pub cell_size: f64,
    pub domain_min: Vec3,
    pub domain_max: Vec3,
    pub walls: Vec<WallPlane>,
    pub contact: ContactParams,
    pub seed: u64,
    pub steps: u64,
    pub verlet_enabled: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cell size {cell_size} is smaller than twice the largest cut-off {max_cutoff}")]
    CellTooSmall { cell_size: f64, max_cutoff: f64 },
    #[error("domain is empty: min {min:?} is not below max {max:?} in every component")]
    EmptyDomain { min: Vec3, max: Vec3 },
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("step count must be positive")]
    ZeroSteps,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("wall {index} normal is not unit length (|n| = {length})")]
    WallNormal { index: usize, length: f64 },
    #[error("invalid contact parameters: {0}")]
    ContactParams(&'static str),
    #[error("particle {id}: {reason}")]
    InvalidParticle { id: usize, reason: &'static str },
    #[error("particle ids must be dense 0..n in order, found {found} at index {index}")]
    IdMismatch { index: usize, found: usize },
    #[error("reading config {path}: {message}")]
    Io { path: String, message: String },
    #[error("parsing config: {0}")]
    Parse(String),
}

const UNIT_NORMAL_TOL: f64 = 1e-12;

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Checks every configuration invariant against the particle set.
pub fn validate_config(cfg: &SimConfig, particles: &[Particle]) -> Result<(), ConfigError> {
    if !(cfg.dt.is_finite()) {
        return Err(ConfigError::NonFinite("dt"));
    }
    if cfg.dt <= 0.0 {
        return Err(ConfigError::NonPositiveDt(cfg.dt));
    }
    if cfg.steps == 0 {
        return Err(ConfigError::ZeroSteps);
    }
    if !cfg.gravity.is_finite() {
        return Err(ConfigError::NonFinite("gravity"));
    }
    if !cfg.domain_min.is_finite() || !cfg.domain_max.is_finite() {
        return Err(ConfigError::NonFinite("domain"));
    }
    let (lo, hi) = (cfg.domain_min, cfg.domain_max);
    if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
        return Err(ConfigError::EmptyDomain { min: lo, max: hi });
    }
    if !cfg.cell_size.is_finite() {
        return Err(ConfigError::NonFinite("cell_size"));
    }
    for (index, wall) in cfg.walls.iter().enumerate() {
        if !wall.point.is_finite() || !wall.outward_normal.is_finite() {
            return Err(ConfigError::NonFinite("wall"));
        }
        let length = norm(wall.outward_normal);
        if (length - 1.0).abs() > UNIT_NORMAL_TOL {
            return Err(ConfigError::WallNormal { index, length });
        }
    }
    cfg.contact.validate()?;

    let mut max_cutoff = 0.0f64;
    for (index, p) in particles.iter().enumerate() {
        if p.id != index {
            return Err(ConfigError::IdMismatch { index, found: p.id });
        }
        validate_particle(p)?;
        max_cutoff = max_cutoff.max(p.cutoff);
    }
    // also catches cell_size <= 0 for an empty particle set
    if cfg.cell_size <= 0.0 || cfg.cell_size < 2.0 * max_cutoff {
        return Err(ConfigError::CellTooSmall {
            cell_size: cfg.cell_size,
            max_cutoff,
        });
    }
    Ok(())
}

fn validate_particle(p: &Particle) -> Result<(), ConfigError> {
    let bad = |reason| Err(ConfigError::InvalidParticle { id: p.id, reason });
    if !p.position.is_finite() || !p.velocity.is_finite() {
        return bad("non-finite state");
    }
    if !(p.radius > 0.0) || !p.radius.is_finite() {
        return bad("radius must be positive");
    }
    if !(p.mass > 0.0) || !p.mass.is_finite() {
        return bad("mass must be positive");
    }
    if !(p.cutoff >= p.radius) || !p.cutoff.is_finite() {
        return bad("cut-off must enclose the sphere");
    }
    if p.is_static && p.velocity != Vec3::ZERO {
        return bad("static particle with non-zero velocity");
    }
    Ok(())
}
