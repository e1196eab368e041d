//! The time loop.
//!
//! Every force evaluation runs the same pipeline: decide whether the cached
//! Verlet list is still valid (rebuild if not), resolve exact contacts on the
//! list, apply the contact model, and hand the forces back to the
//! integrator. The validity check runs before *every* evaluation, including
//! the one in the middle of a velocity-Verlet step.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::broadphase::{
    brute_force_pairs, first_violation, verlet_build_with, BroadPhaseError, SkinRule, VerletState,
};
use crate::config::{validate_config, ConfigError, SimConfig};
use crate::narrowphase::{resolve_contacts, Contact, NarrowPhaseError};
use crate::physics::{accumulate_forces, velocity_verlet_step, ForceAccumulator};
use crate::types::Particle;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("broad-phase at step {step}: {source}")]
    BroadPhase {
        step: u64,
        #[source]
        source: BroadPhaseError,
    },
    #[error("narrow-phase at step {step}: {source}")]
    NarrowPhase {
        step: u64,
        #[source]
        source: NarrowPhaseError,
    },
    #[error("non-finite state for particle {id} at step {step}; time step too large?")]
    Instability { step: u64, id: usize },
}

/// What the phase timers record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimingMode {
    /// Monotonic wall-clock seconds per phase.
    WallTime,
    /// No clock reads; only the deterministic operation counters move.
    #[default]
    OpCount,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Skin rule used while the buffer is enabled.
    pub skin_rule: SkinRule,
    pub timing: TimingMode,
    /// Audit every evaluation with an O(n²) scan for pairs missing from the
    /// live list.
    pub shadow_scan: bool,
    /// Keep one digest of the contact set per force evaluation.
    pub record_contacts: bool,
    /// Keep a particle snapshot every this many steps (and at step 0).
    pub sample_every: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseMetrics {
    pub broad_time: f64,
    pub narrow_time: f64,
    pub model_time: f64,
    pub integrate_time: f64,
    pub broad_executions: u64,
    pub total_steps: u64,
    pub force_evaluations: u64,
    pub pair_list_length_sum: u64,
    /// Pair distance tests performed by broad-phase builds.
    pub broad_ops: u64,
    /// Candidate pairs handed to the narrow-phase.
    pub narrow_ops: u64,
    /// Contacts fed to the force model.
    pub model_ops: u64,
}

impl PhaseMetrics {
    pub fn skipped_evaluations(&self) -> u64 {
        self.force_evaluations - self.broad_executions
    }

    pub fn broad_executed_pct(&self) -> f64 {
        if self.force_evaluations == 0 {
            return 0.0;
        }
        100.0 * self.broad_executions as f64 / self.force_evaluations as f64
    }

    pub fn mean_pair_list_length(&self) -> f64 {
        if self.force_evaluations == 0 {
            return 0.0;
        }
        self.pair_list_length_sum as f64 / self.force_evaluations as f64
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            #[serde(flatten)]
            metrics: &'a PhaseMetrics,
            skipped_evaluations: u64,
            broad_executed_pct: f64,
            mean_pair_list_length: f64,
        }
        let report = Report {
            metrics: self,
            skipped_evaluations: self.skipped_evaluations(),
            broad_executed_pct: self.broad_executed_pct(),
            mean_pair_list_length: self.mean_pair_list_length(),
        };
        serde_json::to_string_pretty(&report).expect("metrics serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub particles: Vec<Particle>,
    pub verlet: Option<VerletState>,
    pub step: u64,
    /// Simulated time (s).
    pub clock: f64,
    /// Forces at the current positions, once evaluated.
    pub forces: Option<ForceAccumulator>,
}

impl SimState {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self {
            particles,
            verlet: None,
            step: 0,
            clock: 0.0,
            forces: None,
        }
    }
}

/// Why a broad-phase ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RebuildReason {
    NoList,
    BufferDisabled,
    /// This particle moved further than its frozen skin.
    Displacement {
        particle: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BroadPhaseOutcome {
    pub executed: bool,
    pub reason: Option<RebuildReason>,
    pub pairs_tested: u64,
}

/// Keeps the cached list if every particle is within its frozen skin,
/// otherwise runs a new build. With the buffer disabled every call builds
/// with zero skins.
pub fn maybe_broadphase(
    particles: &[Particle],
    verlet: &mut Option<VerletState>,
    cfg: &SimConfig,
    rule: SkinRule,
    step: u64,
) -> Result<BroadPhaseOutcome, BroadPhaseError> {
    let reason = match verlet.as_ref() {
        None => Some(RebuildReason::NoList),
        Some(_) if !cfg.verlet_enabled => Some(RebuildReason::BufferDisabled),
        Some(state) => first_violation(state, particles)?.map(|particle| RebuildReason::Displacement { particle }),
    };
    let Some(reason) = reason else {
        return Ok(BroadPhaseOutcome {
            executed: false,
            reason: None,
            pairs_tested: 0,
        });
    };
    let rule = if cfg.verlet_enabled { rule } else { SkinRule::Zero };
    let built = verlet_build_with(particles, cfg, step, rule)?;
    let pairs_tested = built.pairs_tested;
    *verlet = Some(built);
    Ok(BroadPhaseOutcome {
        executed: true,
        reason: Some(reason),
        pairs_tested,
    })
}

/// A cut-off-overlapping pair absent from the live list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissedPair {
    pub step: u64,
    pub a: usize,
    pub b: usize,
}

/// Audit trail filled in according to [`RunOptions`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationLog {
    pub missed_pairs: Vec<MissedPair>,
    pub contact_digests: Vec<u64>,
    pub rebuilds: Vec<(u64, RebuildReason)>,
    pub behind_wall_reports: u64,
}

fn contact_digest(contacts: &[Contact]) -> u64 {
    let mut h = DefaultHasher::new();
    contacts.len().hash(&mut h);
    for c in contacts {
        c.id_a.hash(&mut h);
        c.id_b.hash(&mut h);
        c.overlap.to_bits().hash(&mut h);
        c.normal.as_array().map(f64::to_bits).hash(&mut h);
    }
    h.finish()
}

struct Stopwatch(Option<Instant>);

impl Stopwatch {
    fn start(mode: TimingMode) -> Self {
        Self((mode == TimingMode::WallTime).then(Instant::now))
    }

    fn elapsed(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}

struct Pipeline<'a> {
    cfg: &'a SimConfig,
    opts: &'a RunOptions,
    metrics: &'a mut PhaseMetrics,
    log: &'a mut ValidationLog,
}

impl Pipeline<'_> {
    fn evaluate(
        &mut self,
        particles: &[Particle],
        verlet: &mut Option<VerletState>,
        step: u64,
    ) -> Result<ForceAccumulator, SimError> {
        let timing = self.opts.timing;
        self.metrics.force_evaluations += 1;

        let clock = Stopwatch::start(timing);
        let outcome = maybe_broadphase(particles, verlet, self.cfg, self.opts.skin_rule, step)
            .map_err(|source| SimError::BroadPhase { step, source })?;
        self.metrics.broad_time += clock.elapsed();
        if let Some(reason) = outcome.reason {
            self.metrics.broad_executions += 1;
            self.metrics.broad_ops += outcome.pairs_tested;
            self.log.rebuilds.push((step, reason));
        }
        let list = &verlet.as_ref().expect("list exists after broad-phase").list;
        self.metrics.pair_list_length_sum += list.len() as u64;

        if self.opts.shadow_scan {
            let cutoffs: Vec<f64> = particles.iter().map(|p| p.cutoff).collect();
            let truth =
                brute_force_pairs(particles, &cutoffs).map_err(|source| SimError::BroadPhase { step, source })?;
            for (a, b) in truth.iter() {
                if !list.contains(a, b) {
                    self.log.missed_pairs.push(MissedPair { step, a, b });
                }
            }
        }

        let clock = Stopwatch::start(timing);
        let set = resolve_contacts(list, particles, &self.cfg.walls)
            .map_err(|source| SimError::NarrowPhase { step, source })?;
        self.metrics.narrow_time += clock.elapsed();
        self.metrics.narrow_ops += list.len() as u64;
        for report in &set.behind_wall {
            log::warn!("step {step}: {report}");
        }
        self.log.behind_wall_reports += set.behind_wall.len() as u64;
        if self.opts.record_contacts {
            self.log.contact_digests.push(contact_digest(&set.contacts));
        }

        let clock = Stopwatch::start(timing);
        let forces = accumulate_forces(&set.contacts, particles, self.cfg.gravity, &self.cfg.contact);
        self.metrics.model_time += clock.elapsed();
        self.metrics.model_ops += set.contacts.len() as u64;
        Ok(forces)
    }
}

/// A particle snapshot taken during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub step: u64,
    pub particles: Vec<Particle>,
}

/// One simulation instance. Single writer: only `step` mutates the state.
pub struct Simulation {
    cfg: SimConfig,
    opts: RunOptions,
    state: SimState,
    metrics: PhaseMetrics,
    log: ValidationLog,
}

impl Simulation {
    pub fn new(cfg: SimConfig, particles: Vec<Particle>, opts: RunOptions) -> Result<Self, SimError> {
        validate_config(&cfg, &particles)?;
        Ok(Self {
            cfg,
            opts,
            state: SimState::new(particles),
            metrics: PhaseMetrics::default(),
            log: ValidationLog::default(),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn metrics(&self) -> &PhaseMetrics {
        &self.metrics
    }

    pub fn log(&self) -> &ValidationLog {
        &self.log
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Advances one time step: broad-phase (or skip), narrow-phase, contact
    /// model, integration.
    pub fn step(&mut self) -> Result<(), SimError> {
        let SimState {
            particles,
            verlet,
            step,
            clock,
            forces,
        } = &mut self.state;
        let mut pipeline = Pipeline {
            cfg: &self.cfg,
            opts: &self.opts,
            metrics: &mut self.metrics,
            log: &mut self.log,
        };

        if !particles.is_empty() {
            let forces = match forces {
                Some(f) => f,
                None => forces.insert(pipeline.evaluate(particles, verlet, *step)?),
            };
            let next_step = *step + 1;
            let timer = Stopwatch::start(self.opts.timing);
            let mut eval_time = 0.0;
            velocity_verlet_step(particles, forces, self.cfg.dt, |ps| {
                let inner = Stopwatch::start(self.opts.timing);
                let out = pipeline.evaluate(ps, verlet, next_step);
                eval_time += inner.elapsed();
                out
            })?;
            pipeline.metrics.integrate_time += (timer.elapsed() - eval_time).max(0.0);

            if let Some(bad) = particles
                .iter()
                .find(|p| !(p.position.is_finite() && p.velocity.is_finite()))
            {
                return Err(SimError::Instability {
                    step: next_step,
                    id: bad.id,
                });
            }
        }

        *step += 1;
        *clock = *step as f64 * self.cfg.dt;
        self.metrics.total_steps += 1;
        Ok(())
    }

    pub fn into_parts(self) -> (SimState, PhaseMetrics, ValidationLog) {
        (self.state, self.metrics, self.log)
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: SimState,
    pub metrics: PhaseMetrics,
    pub log: ValidationLog,
    pub trajectory: Vec<TrajectorySample>,
}

/// Runs `cfg.steps` steps from the given initial particles.
pub fn run(cfg: &SimConfig, particles: Vec<Particle>, opts: &RunOptions) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(cfg.clone(), particles, opts.clone())?;
    let mut trajectory = Vec::new();
    let sample = |sim: &Simulation, trajectory: &mut Vec<TrajectorySample>| {
        if let Some(every) = opts.sample_every.filter(|&e| e > 0) {
            if sim.state.step.is_multiple_of(every) {
                trajectory.push(TrajectorySample {
                    step: sim.state.step,
                    particles: sim.state.particles.clone(),
                });
            }
        }
    };
    sample(&sim, &mut trajectory);
    for _ in 0..cfg.steps {
        sim.step()?;
        sample(&sim, &mut trajectory);
    }
    let (state, metrics, log) = sim.into_parts();
    Ok(RunOutput {
        state,
        metrics,
        log,
        trajectory,
    })
}

/// Writes samples as `step,id,x,y,z,vx,vy,vz` rows.
pub fn write_trajectory_csv(samples: &[TrajectorySample], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "id", "x", "y", "z", "vx", "vy", "vz"])?;
    for s in samples {
        for p in &s.particles {
            w.serialize((
                s.step,
                p.id,
                p.position.x,
                p.position.y,
                p.position.z,
                p.velocity.x,
                p.velocity.y,
                p.velocity.z,
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}
