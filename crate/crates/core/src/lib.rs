//! Wang-Landau and Metropolis sampling driven by quantum phase estimation on a
//! classically simulated quantum computer.
//!
//! The model is the periodic transverse-field Ising chain
//!
//! ```text
//! H = J Σ_i σᶻ_i σᶻ_{i+1} + h Σ_i σˣ_i,    σᶻ|0⟩ = +|0⟩,  σᶻ_{N+1} ≡ σᶻ_1
//! ```
//!
//! Energies are never read off the Hamiltonian directly by the samplers: every
//! proposal is a phase-estimation measurement on an eigenstate drawn uniformly
//! from the spectrum (the marginal of the maximally entangled pair state), so the
//! density of states recovered by Wang-Landau is the one a fault-tolerant device
//! would observe.
//!
//! Module map:
//! - [`spin_hamiltonian`]: Hamiltonian construction, exact diagonalization, exact thermodynamics.
//! - [`statevector`]: the multi-register simulator used for phase estimation.
//! - [`qpe`]: phase estimation as an energy sampler with three fidelity tiers.
//! - [`wl_core`]: Wang-Landau bookkeeping and the quantum and classical drivers.
//! - [`metropolis`]: the Metropolis baseline over measured energies.
//! - [`thermo`]: observables from a density of states, entropy from heat capacity, error curves.
//! - [`experiment`]: configuration, multi-run orchestration, CSV/SVG output and the CLI plumbing.

pub mod error;
pub mod experiment;
pub mod metropolis;
pub mod qpe;
pub mod spin_hamiltonian;
pub mod stats;
pub mod statevector;
pub mod thermo;
pub mod validate;
pub mod wl_core;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used throughout. ChaCha output is platform independent, which
/// keeps exported files byte-identical across machines for a given seed.
pub type SimRng = ChaCha8Rng;

/// Builds the random stream for `seed` on sub-stream `stream`.
///
/// Chains are seeded `base_seed + run_index`; independent chains that share a
/// run index (Metropolis temperatures) are separated by stream number.
pub fn seeded_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
