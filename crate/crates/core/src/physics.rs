//! Contact forces and time integration.
//!
//! Normal force is a linear spring-dashpot acting only while the spheres
//! overlap. Tangential force is memoryless: it opposes the instantaneous
//! sliding direction with magnitude `min(k_t δ, μ_s |F_n|)`.

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::narrowphase::{Contact, Partner};
use crate::types::{norm, Particle, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    /// Normal stiffness (N/m).
    pub k_n: f64,
    /// Normal damping (N s/m).
    pub gamma_n: f64,
    /// Static friction coefficient.
    pub mu_s: f64,
    /// Tangential stiffness (N/m).
    pub k_t: f64,
}

impl ContactParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let all_finite = [self.k_n, self.gamma_n, self.mu_s, self.k_t]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ConfigError::NonFinite("contact"));
        }
        if !(self.k_n > 0.0) {
            return Err(ConfigError::ContactParams("k_n must be positive"));
        }
        if self.gamma_n < 0.0 || self.mu_s < 0.0 || self.k_t < 0.0 {
            return Err(ConfigError::ContactParams("gamma_n, mu_s and k_t must be non-negative"));
        }
        Ok(())
    }

    /// Half-period of an undamped contact between two bodies with reduced
    /// mass `reduced_mass`.
    pub fn contact_duration(&self, reduced_mass: f64) -> f64 {
        std::f64::consts::PI * (reduced_mass / self.k_n).sqrt()
    }
}

// sliding speeds below this fraction of the relative speed are rounding noise
const SLIP_EPS: f64 = 1e-9;

/// Force on body `a` for a contact with overlap `overlap`, unit normal
/// `normal` (a toward b) and relative velocity `v_rel = v_a - v_b`.
pub fn contact_force(overlap: f64, normal: Vec3, v_rel: Vec3, params: &ContactParams) -> Vec3 {
    // approach speed, positive while closing
    let v_n = v_rel.dot(normal);
    let f_n = (params.k_n * overlap + params.gamma_n * v_n).max(0.0);
    let mut force = normal * (-f_n);

    let v_t = v_rel - normal * v_n;
    let slip = norm(v_t);
    if slip > SLIP_EPS * norm(v_rel) && slip > 0.0 {
        let f_t = (params.k_t * overlap).min(params.mu_s * f_n);
        force -= v_t * (f_t / slip);
    }
    force
}

/// Equal and opposite contact forces for a particle pair.
pub fn spring_dashpot_force(c: &Contact, a: &Particle, b: &Particle, params: &ContactParams) -> (Vec3, Vec3) {
    let on_a = contact_force(c.overlap, c.normal, a.velocity - b.velocity, params);
    (on_a, -on_a)
}

/// Per-particle force slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceAccumulator {
    pub forces: Vec<Vec3>,
}

impl ForceAccumulator {
    pub fn zeros(n: usize) -> Self {
        Self {
            forces: vec![Vec3::ZERO; n],
        }
    }

    /// Gravity only.
    pub fn gravity(particles: &[Particle], gravity: Vec3) -> Self {
        Self {
            forces: particles.iter().map(|p| gravity * p.mass).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.forces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty()
    }
}

/// Gravity plus every contact force, summed in contact order.
pub fn accumulate_forces(
    contacts: &[Contact],
    particles: &[Particle],
    gravity: Vec3,
    params: &ContactParams,
) -> ForceAccumulator {
    let mut acc = ForceAccumulator::gravity(particles, gravity);
    for c in contacts {
        let a = &particles[c.id_a];
        match c.id_b {
            Partner::Particle(b) => {
                let (fa, fb) = spring_dashpot_force(c, a, &particles[b], params);
                acc.forces[c.id_a] += fa;
                acc.forces[b] += fb;
            }
            Partner::Wall(_) => {
                acc.forces[c.id_a] += contact_force(c.overlap, c.normal, a.velocity, params);
            }
        }
    }
    acc
}

/// One velocity-Verlet step.
///
/// Positions advance with `F(t)`; `force_eval` is then called once at the
/// new positions, with velocities holding the half-step kick, and its result
/// completes the velocity update. On return `forces` holds `F(t + dt)`.
/// Static particles are left untouched.
pub fn velocity_verlet_step<E>(
    particles: &mut [Particle],
    forces: &mut ForceAccumulator,
    dt: f64,
    mut force_eval: impl FnMut(&[Particle]) -> Result<ForceAccumulator, E>,
) -> Result<(), E> {
    let half_dt = 0.5 * dt;
    for (p, &f) in particles.iter_mut().zip(&forces.forces) {
        if p.is_static {
            continue;
        }
        let acc = f / p.mass;
        p.position += p.velocity * dt + acc * (half_dt * dt);
        p.velocity += acc * half_dt;
    }
    let next = force_eval(particles)?;
    for (p, &f) in particles.iter_mut().zip(&next.forces) {
        if p.is_static {
            continue;
        }
        p.velocity += f / p.mass * half_dt;
    }
    *forces = next;
    Ok(())
}

pub fn kinetic_energy(particles: &[Particle]) -> f64 {
    particles.iter().map(|p| 0.5 * p.mass * p.velocity.norm_squared()).sum()
}

pub fn total_momentum(particles: &[Particle]) -> Vec3 {
    particles.iter().fold(Vec3::ZERO, |acc, p| acc + p.velocity * p.mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narrowphase::sphere_overlap;
    use proptest::prelude::*;
    use std::convert::Infallible;

    fn params(k_n: f64, gamma_n: f64, mu_s: f64, k_t: f64) -> ContactParams {
        ContactParams {
            k_n,
            gamma_n,
            mu_s,
            k_t,
        }
    }

    #[test]
    fn pure_spring_magnitude() {
        let f = contact_force(
            0.01,
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::ZERO,
            &params(1000.0, 5.0, 0.0, 0.0),
        );
        assert!((f - Vec3::new(0.0, 0.0, -10.0)).norm() < 1e-12);
    }

    #[test]
    fn damping_resists_approach() {
        let n = Vec3::new(1.0, 0.0, 0.0);
        let p = params(1000.0, 2.0, 0.0, 0.0);
        let closing = contact_force(0.01, n, Vec3::new(1.0, 0.0, 0.0), &p);
        let opening = contact_force(0.01, n, Vec3::new(-1.0, 0.0, 0.0), &p);
        assert!((closing.x - (-12.0)).abs() < 1e-12);
        assert!((opening.x - (-8.0)).abs() < 1e-12);
        // fast separation never pulls
        let fast = contact_force(0.01, n, Vec3::new(-100.0, 0.0, 0.0), &p);
        assert_eq!(fast.norm(), 0.0);
    }

    #[test]
    fn friction_is_capped() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let sliding = Vec3::new(2.0, 0.0, 0.0);
        // k_t δ = 50 > μ F_n = 0.5 * 10
        let f = contact_force(0.01, n, sliding, &params(1000.0, 0.0, 0.5, 5000.0));
        assert!((f.x - (-5.0)).abs() < 1e-12);
        // k_t δ = 1 < μ F_n
        let f = contact_force(0.01, n, sliding, &params(1000.0, 0.0, 0.5, 100.0));
        assert!((f.x - (-1.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn newton_third_law(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, vx in -3.0f64..3.0, vy in -3.0f64..3.0,
            vz in -3.0f64..3.0, gamma in 0.0f64..5.0, mu in 0.0f64..1.0,
        ) {
            let a = Particle::sphere(0, Vec3::new(ax * 0.1, ay * 0.1, 0.0), 0.1, 1.0)
                .with_velocity(Vec3::new(vx, vy, vz));
            let b = Particle::sphere(1, Vec3::new(0.05, 0.02, 0.01), 0.1, 2.0);
            prop_assume!(norm(a.position - b.position) > 1e-6);
            if let Some(c) = sphere_overlap(&a, &b).unwrap() {
                let (fa, fb) = spring_dashpot_force(&c, &a, &b, &params(1e4, gamma, mu, 5e3));
                prop_assert_eq!(fa + fb, Vec3::ZERO);
            }
        }
    }

    /// Head-on elastic collision of equal masses: velocities swap. The
    /// contact lasts half an oscillation period of the reduced-mass spring.
    #[test]
    fn head_on_collision_swaps_speeds() {
        let p = params(1e4, 0.0, 0.0, 0.0);
        let m = 1e-3;
        let v0 = 0.5;
        let mut ps = vec![
            Particle::sphere(0, Vec3::new(-0.0051, 0.0, 0.0), 0.005, m).with_velocity(Vec3::new(v0, 0.0, 0.0)),
            Particle::sphere(1, Vec3::new(0.0051, 0.0, 0.0), 0.005, m),
        ];
        let t_contact = p.contact_duration(m / 2.0);
        let dt = t_contact / 200.0;
        let eval = |ps: &[Particle]| -> Result<ForceAccumulator, Infallible> {
            let contacts: Vec<_> = sphere_overlap(&ps[0], &ps[1]).unwrap().into_iter().collect();
            Ok(accumulate_forces(&contacts, ps, Vec3::ZERO, &p))
        };
        let mut forces = eval(&ps).unwrap();
        let mut in_contact_steps = 0;
        for _ in 0..2000 {
            velocity_verlet_step(&mut ps, &mut forces, dt, eval).unwrap();
            if forces.forces[0] != Vec3::ZERO {
                in_contact_steps += 1;
            }
        }
        assert!((ps[0].velocity.x / v0).abs() < 1e-3);
        assert!((ps[1].velocity.x / v0 - 1.0).abs() < 1e-3);
        let measured = in_contact_steps as f64 * dt;
        assert!((measured - t_contact).abs() <= 2.0 * dt, "{measured} vs {t_contact}");
    }

    #[test]
    fn constant_force_is_exact() {
        let g = Vec3::new(0.0, 0.0, -9.81);
        let x0 = Vec3::new(0.1, 0.2, 1.0);
        let v0 = Vec3::new(0.5, -0.25, 2.0);
        let mut ps = vec![Particle::sphere(0, x0, 0.01, 0.3).with_velocity(v0)];
        let eval = |ps: &[Particle]| -> Result<_, Infallible> { Ok(ForceAccumulator::gravity(ps, g)) };
        let mut forces = eval(&ps).unwrap();
        let dt = 1e-3;
        for n in 1..=1000 {
            velocity_verlet_step(&mut ps, &mut forces, dt, eval).unwrap();
            let t = n as f64 * dt;
            let exact = x0 + v0 * t + g * (0.5 * t * t);
            assert!((ps[0].position - exact).norm() <= 1e-12 * exact.norm(), "step {n}");
            assert!((ps[0].velocity - (v0 + g * t)).norm() <= 1e-12 * (v0 + g * t).norm());
        }
    }

    #[test]
    fn uniform_motion() {
        let mut ps = vec![Particle::sphere(0, Vec3::ZERO, 0.01, 1.0).with_velocity(Vec3::new(1.0, 0.0, 0.0))];
        let mut forces = ForceAccumulator::zeros(1);
        for _ in 0..10 {
            velocity_verlet_step(&mut ps, &mut forces, 0.1, |ps| {
                Ok::<_, Infallible>(ForceAccumulator::zeros(ps.len()))
            })
            .unwrap();
        }
        assert!((ps[0].position - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn static_particles_do_not_move() {
        let mut ps = vec![Particle::sphere(0, Vec3::new(1.0, 1.0, 1.0), 0.01, 1.0).into_static()];
        let g = Vec3::new(0.0, 0.0, -9.81);
        let mut forces = ForceAccumulator::gravity(&ps, g);
        velocity_verlet_step(&mut ps, &mut forces, 0.1, |ps| {
            Ok::<_, Infallible>(ForceAccumulator::gravity(ps, g))
        })
        .unwrap();
        assert_eq!(ps[0].position, Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(ps[0].velocity, Vec3::ZERO);
    }
}
