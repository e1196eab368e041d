//! Value types shared by every stage of the pipeline: 3-vectors, particles
//! and static wall planes.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Cartesian 3-vector. Meters, m/s or newtons depending on context.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        norm(self)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(self, other: Vec3) -> bool {
        self.x.to_bits() == other.x.to_bits()
            && self.y.to_bits() == other.y.to_bits()
            && self.z.to_bits() == other.z.to_bits()
    }
}

/// Euclidean length.
#[inline]
pub fn norm(v: Vec3) -> f64 {
    // hypot-free on purpose: the pair test in the broad-phase and the
    // narrow-phase overlap must round identically
    (v.x * v.x + v.y * v.y + v.z * v.z).sqrt()
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

/// A spherical particle.
///
/// `cutoff` is the interaction cut-off radius used by the broad-phase; it
/// must enclose the physical sphere (`cutoff >= radius`). Static particles
/// never move but still take part in contact detection and exert forces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
    pub cutoff: f64,
    pub mass: f64,
    pub is_static: bool,
}

impl Particle {
    /// Free sphere whose cut-off equals its radius.
    pub fn sphere(id: usize, position: Vec3, radius: f64, mass: f64) -> Self {
        Self {
            id,
            position,
            velocity: Vec3::ZERO,
            radius,
            cutoff: radius,
            mass,
            is_static: false,
        }
    }

    pub fn with_velocity(mut self, velocity: Vec3) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn into_static(mut self) -> Self {
        self.is_static = true;
        self.velocity = Vec3::ZERO;
        self
    }

    /// Bitwise comparison of the dynamic state (position and velocity).
    pub fn state_bit_eq(&self, other: &Particle) -> bool {
        self.id == other.id && self.position.bit_eq(other.position) && self.velocity.bit_eq(other.velocity)
    }
}

/// Axis-aligned box limiting where a wall acts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extent {
    pub min: Vec3,
    pub max: Vec3,
}

impl Extent {
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }
}

/// Static plane boundary. Particles live on the side `outward_normal`
/// points to.
///
/// An optional `extent` turns the infinite plane into a patch: the wall only
/// acts on particles whose center lies inside the box. Hopper wedges use this
/// to leave a discharge slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallPlane {
    pub point: Vec3,
    pub outward_normal: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Extent>,
}

impl WallPlane {
    /// Plane through `point`; the normal is normalized here.
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        Self {
            point,
            outward_normal: normal / norm(normal),
            extent: None,
        }
    }

    pub fn with_extent(mut self, min: Vec3, max: Vec3) -> Self {
        self.extent = Some(Extent { min, max });
        self
    }

    /// Signed distance of `p` from the plane, positive on the outward side.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.point).dot(self.outward_normal)
    }

    pub fn acts_on(&self, p: Vec3) -> bool {
        self.extent.is_none_or(|e| e.contains(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norm_examples() {
        assert_eq!(norm(Vec3::ZERO), 0.0);
        assert_eq!(norm(Vec3::new(3.0, 4.0, 0.0)), 5.0);
        assert!((norm(Vec3::new(1.0, 1.0, 1.0)) - 1.732_050_807_568_877_2).abs() < 1e-15);
    }

    #[test]
    fn wall_normal_is_normalized() {
        let w = WallPlane::new(Vec3::ZERO, Vec3::new(1.0, 2.0, -2.0));
        assert!((norm(w.outward_normal) - 1.0).abs() < 1e-12);
        assert!((w.signed_distance(Vec3::new(1.0, 2.0, -2.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn static_particle_has_zero_velocity() {
        let p = Particle::sphere(0, Vec3::ZERO, 0.1, 1.0)
            .with_velocity(Vec3::new(1.0, 0.0, 0.0))
            .into_static();
        assert_eq!(p.velocity, Vec3::ZERO);
    }

    proptest! {
        #[test]
        fn norm_is_absolutely_homogeneous(
            x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3, s in -1e3f64..1e3
        ) {
            let v = Vec3::new(x, y, z);
            let lhs = norm(v * s);
            let rhs = s.abs() * norm(v);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
        }
    }
}
