//! Exact sphere–sphere and sphere–plane contact resolution.

use thiserror::Error;

use crate::broadphase::PairList;
use crate::types::{norm, Particle, Vec3, WallPlane};

/// Centers closer than this have no usable contact normal.
pub const COINCIDENT_TOL: f64 = 1e-12;

/// The other body in a contact. Particles order before walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partner {
    Particle(usize),
    Wall(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub id_a: usize,
    pub id_b: Partner,
    /// Penetration depth, always > 0.
    pub overlap: f64,
    /// Unit normal pointing from `a` toward `b`.
    pub normal: Vec3,
    /// Midpoint of the overlap segment along the normal.
    pub point: Vec3,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NarrowPhaseError {
    #[error("particles {a} and {b} have coincident centers")]
    CoincidentCenters { a: usize, b: usize },
    #[error("particle {id} is behind wall {wall} (signed distance {distance})")]
    ParticleBehindWall { id: usize, wall: usize, distance: f64 },
}

/// Sphere–sphere contact, `δ = r_a + r_b - |X_a - X_b|`, reported only for
/// strictly positive overlap.
pub fn sphere_overlap(a: &Particle, b: &Particle) -> Result<Option<Contact>, NarrowPhaseError> {
    let d = b.position - a.position;
    let dist = norm(d);
    if dist < COINCIDENT_TOL {
        return Err(NarrowPhaseError::CoincidentCenters { a: a.id, b: b.id });
    }
    let overlap = a.radius + b.radius - dist;
    if !(overlap > 0.0) {
        return Ok(None);
    }
    let normal = d / dist;
    Ok(Some(Contact {
        id_a: a.id,
        id_b: Partner::Particle(b.id),
        overlap,
        normal,
        point: a.position + normal * (a.radius - overlap / 2.0),
    }))
}

/// Sphere–plane contact against wall number `wall_index`.
pub fn sphere_plane_overlap(
    a: &Particle,
    w: &WallPlane,
    wall_index: usize,
) -> Result<Option<Contact>, NarrowPhaseError> {
    if !w.acts_on(a.position) {
        return Ok(None);
    }
    let d = w.signed_distance(a.position);
    if d < 0.0 {
        return Err(NarrowPhaseError::ParticleBehindWall {
            id: a.id,
            wall: wall_index,
            distance: d,
        });
    }
    let overlap = a.radius - d;
    if !(overlap > 0.0) {
        return Ok(None);
    }
    let normal = -w.outward_normal;
    Ok(Some(Contact {
        id_a: a.id,
        id_b: Partner::Wall(wall_index),
        overlap,
        normal,
        point: a.position + normal * ((a.radius + d) / 2.0),
    }))
}

/// Contacts of one evaluation plus non-fatal tunneling reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSet {
    pub contacts: Vec<Contact>,
    pub behind_wall: Vec<NarrowPhaseError>,
}

/// Runs the exact test over every candidate pair and every particle–wall
/// combination. Output is ordered by `(id_a, id_b)`.
pub fn resolve_contacts(
    candidates: &PairList,
    particles: &[Particle],
    walls: &[WallPlane],
) -> Result<ContactSet, NarrowPhaseError> {
    let mut set = ContactSet::default();
    for (a, b) in candidates.iter() {
        if let Some(c) = sphere_overlap(&particles[a], &particles[b])? {
            set.contacts.push(c);
        }
    }
    for p in particles {
        for (wi, w) in walls.iter().enumerate() {
            match sphere_plane_overlap(p, w, wi) {
                Ok(Some(c)) => set.contacts.push(c),
                Ok(None) => {}
                Err(e) => set.behind_wall.push(e),
            }
        }
    }
    // pairs are already canonical; a stable sort merges wall contacts in
    set.contacts.sort_by_key(|c| (c.id_a, c.id_b));
    Ok(set)
}
