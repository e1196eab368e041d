//! Dual-run equivalence check: the same scenario with the buffer enabled
//! (audited by the shadow scan) and disabled must produce the same contacts
//! at every force evaluation and the same final state, bit for bit.

use std::fmt;

use super::scenario::Scenario;
use super::sweep::BenchError;
use crate::engine::{run, MissedPair, PhaseMetrics, RunOptions, RunOutput};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub scenario: &'static str,
    pub k_factor: u32,
    pub steps: u64,
    pub missed_pairs: Vec<MissedPair>,
    /// Index of the first force evaluation whose contact set differs.
    pub first_contact_divergence: Option<usize>,
    pub final_states_equal: bool,
    pub verlet_metrics: PhaseMetrics,
    pub baseline_metrics: PhaseMetrics,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.missed_pairs.is_empty() && self.first_contact_divergence.is_none() && self.final_states_equal
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} K={} steps={}: {}",
            self.scenario,
            self.k_factor,
            self.steps,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        writeln!(f, "  missed pairs (shadow scan): {}", self.missed_pairs.len())?;
        if let Some(m) = self.missed_pairs.first() {
            writeln!(f, "    first: step {} pair ({}, {})", m.step, m.a, m.b)?;
        }
        match self.first_contact_divergence {
            None => writeln!(f, "  contact histories: identical")?,
            Some(i) => writeln!(f, "  contact histories: diverge at evaluation {i}")?,
        }
        writeln!(
            f,
            "  final states: {}",
            if self.final_states_equal {
                "bit-identical"
            } else {
                "DIFFERENT"
            }
        )?;
        write!(
            f,
            "  broad-phase executions: {} of {} evaluations (baseline {})",
            self.verlet_metrics.broad_executions,
            self.verlet_metrics.force_evaluations,
            self.baseline_metrics.broad_executions
        )
    }
}

fn first_divergence(a: &[u64], b: &[u64]) -> Option<usize> {
    a.iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .or_else(|| (a.len() != b.len()).then(|| a.len().min(b.len())))
}

/// Runs the buffered and baseline simulations of `scenario` for `steps`
/// steps. With `parallel` the two runs execute on separate threads.
pub fn validate_scenario(
    scenario: &Scenario,
    k_factor: u32,
    steps: u64,
    parallel: bool,
) -> Result<ValidationReport, BenchError> {
    let run_one = |verlet: bool| -> Result<RunOutput, BenchError> {
        let mut cfg = scenario.config(k_factor, verlet);
        cfg.steps = steps;
        let opts = RunOptions {
            shadow_scan: verlet,
            record_contacts: true,
            ..RunOptions::default()
        };
        let k = if verlet { i64::from(k_factor) } else { super::BASELINE_K };
        run(&cfg, scenario.particles.clone(), &opts).map_err(|source| BenchError::Run { k, source })
    };

    let (buffered, baseline) = if parallel {
        std::thread::scope(|s| {
            let handle = s.spawn(|| run_one(false));
            let buffered = run_one(true);
            (buffered, handle.join().expect("baseline thread"))
        })
    } else {
        (run_one(true), run_one(false))
    };
    let (buffered, baseline) = (buffered?, baseline?);

    let final_states_equal = buffered.state.particles.len() == baseline.state.particles.len()
        && buffered
            .state
            .particles
            .iter()
            .zip(&baseline.state.particles)
            .all(|(a, b)| a.state_bit_eq(b));

    Ok(ValidationReport {
        scenario: scenario.name(),
        k_factor,
        steps,
        missed_pairs: buffered.log.missed_pairs,
        first_contact_divergence: first_divergence(&buffered.log.contact_digests, &baseline.log.contact_digests),
        final_states_equal,
        verlet_metrics: buffered.metrics,
        baseline_metrics: baseline.metrics,
    })
}
