//! Shared fixtures for the benchmarks.

use prpca_core::{generate_instance, Instance, SimulationSpec};

/// Synthetic `n x n` instance with the usual desk-scale settings.
pub fn instance(n: usize, seed: u64) -> Instance {
    let mut spec = SimulationSpec::new(n, n, (n / 10).max(1), 0.6, 0.1);
    spec.seed = seed;
    generate_instance(&spec, 0).expect("valid spec")
}
