//! Shared fixtures for the criterion benchmarks.

use sigmc_core::engine::{sample_initial, PacketSpec};
use sigmc_core::kernel::{kernel_numeric, WignerKernelTable};
use sigmc_core::phase_space::{Ensemble, PhaseSpaceGrid, Species};
use sigmc_core::potentials::PotentialModel;
use sigmc_core::stream::RandomStream;

/// The tunnelling geometry used across benchmarks.
pub fn tunnelling_grid() -> PhaseSpaceGrid {
    PhaseSpaceGrid::symmetric(60.0, 256, 128).unwrap()
}

pub fn barrier() -> PotentialModel {
    PotentialModel::abrupt_barrier(0.10, -1.5, 1.5).unwrap()
}

pub fn barrier_table(grid: &PhaseSpaceGrid) -> WignerKernelTable {
    kernel_numeric(&barrier(), grid).unwrap()
}

/// A mid-run-sized single-body ensemble around the barrier.
pub fn packet_ensemble(grid: &PhaseSpaceGrid, n: usize, seed: u64) -> Ensemble<1> {
    let stream = RandomStream::new(seed);
    let packets = [PacketSpec::minimum_uncertainty(-2.0, 3.0, 1.5)];
    sample_initial(grid, &packets, [Species::Electron], n, &stream).unwrap()
}
