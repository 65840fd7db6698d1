//! Signed-particle Monte Carlo engine for time-dependent quantum dynamics
//! in phase space.
//!
//! Quantum states are carried by ensembles of classical point particles with
//! a sign. Particles drift force-free; the potential acts only through
//! stochastic creation of (+, -) pairs at a rate set by the transform of the
//! potential difference, and opposite-sign particles meeting in a phase-space
//! cell annihilate. Marginals and quasi-distributions are reconstructed as
//! signed histograms. A split-operator wavefunction solver provides an
//! independent reference for single-body scenarios.

pub mod constants;
pub mod engine;
pub mod export;
pub mod kernel;
pub mod observables;
pub mod oracle;
pub mod phase_space;
pub mod potentials;
pub mod stream;

pub use engine::{
    annihilate, drift, run, sample_creation, EngineError, EvolutionConfig, PacketSpec,
    RelativePairSource, RunOutcome, RunOutput, SingleBodySource,
};
pub use kernel::{
    classical_limit_scan, creation_table, gamma_properties_check, gamma_series_partial,
    kernel_gaussian_analytic, kernel_numeric, kernel_two_body, KernelError, KernelSpace,
    WignerKernelTable,
};
pub use observables::{
    ensemble_average, marginal_density, pair_separation_stats, quasi_distribution,
    relative_difference, EnsembleSnapshot, QuasiDistribution, SpatialDensity,
};
pub use oracle::{
    compare, split_step_evolve, split_step_evolve_2d, wigner_transform, CompareReport,
    WaveFunction, WaveFunction2d,
};
pub use phase_space::{
    cell_index, momentum_lattice, CellId, Ensemble, PhaseSpaceGrid, Sign, SignedParticle, Species,
};
pub use potentials::{PotentialModel, ReducedPotential};
pub use stream::RandomStream;
