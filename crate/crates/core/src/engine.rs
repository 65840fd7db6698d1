//! Time-stepped stochastic evolution: field-less drift, Poisson-clocked pair
//! creation with kernel-distributed momentum offsets, and periodic cell-wise
//! annihilation.
//!
//! One step is: drift every particle (absorbing domain exits), sample
//! creations into a pending buffer, merge the buffer, then annihilate and
//! snapshot on their configured cadences. Created pairs inherit the parent
//! position; the parent itself continues unchanged, which keeps the signed
//! sum exactly conserved.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::constants::{ELECTRON_MASS, HBAR};
use crate::kernel::{KernelSpace, WignerKernelTable};
use crate::observables::{build_snapshot, EnsembleSnapshot};
use crate::phase_space::{cell_index, CellId, Ensemble, PhaseSpaceGrid, Sign, SignedParticle};
use crate::stream::{RandomStream, BLOCK};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("time.dt: {message}")]
    InvalidStep { message: String },
    #[error("time.{field}: must be at least 1")]
    InvalidPeriod { field: &'static str },
    #[error(
        "time.dt: creation probability gamma_max*dt = {probability:.3} exceeds the safety bound {bound}"
    )]
    CreationProbabilityTooHigh { probability: f64, bound: f64 },
    #[error(
        "time.dt: max drift per step {drift:.3e} nm exceeds one spatial cell {cell:.3e} nm (coordinate {coord})"
    )]
    DriftTooLarge { drift: f64, cell: f64, coord: usize },
    #[error("kernel table does not cover position {x}")]
    MissingNode { x: f64 },
    #[error("kernel table space {space:?} does not fit a {dims}-dimensional ensemble")]
    WrongTableSpace { space: KernelSpace, dims: usize },
    #[error("packet.{coord}: rejected {attempts} consecutive draws outside the domain")]
    PacketOutsideDomain { coord: usize, attempts: usize },
}

/// Numerical run parameters.
#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    /// Time step (fs).
    pub dt: f64,
    /// Total simulated time (fs).
    pub t_final: f64,
    /// Annihilate every this many steps.
    pub annihilation_period: usize,
    /// Record a snapshot every this many steps (plus t = 0 and the end).
    pub snapshot_period: usize,
    /// Hard ensemble-size cap; exceeding it aborts the run.
    pub particle_cap: usize,
    /// Safety bound on gamma_max * dt.
    pub max_creation_probability: f64,
    /// Copy the particle list into every snapshot.
    pub record_particles: bool,
    /// Emit key=value progress records to stderr.
    pub progress: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            t_final: 10.0,
            annihilation_period: 20,
            snapshot_period: 100,
            particle_cap: 50_000_000,
            max_creation_probability: 0.1,
            record_particles: false,
            progress: false,
        }
    }
}

/// Initial Gaussian packet of one coordinate. Minimum-uncertainty packets
/// have non-negative phase-space distributions, so sampling with all-plus
/// signs is exact; the momentum spread defaults to 1/(2 sigma_x).
#[derive(Clone, Copy, Debug)]
pub struct PacketSpec {
    pub center: f64,
    pub sigma_x: f64,
    pub k_center: f64,
    pub sigma_k: Option<f64>,
}

impl PacketSpec {
    pub fn minimum_uncertainty(center: f64, sigma_x: f64, k_center: f64) -> Self {
        Self {
            center,
            sigma_x,
            k_center,
            sigma_k: None,
        }
    }

    pub fn momentum_spread(&self) -> f64 {
        self.sigma_k.unwrap_or(0.5 / self.sigma_x)
    }
}

/// Draws the initial all-positive ensemble; out-of-domain positions are
/// rejected and redrawn.
pub fn sample_initial<const D: usize>(
    grid: &PhaseSpaceGrid,
    packets: &[PacketSpec; D],
    species: [crate::phase_space::Species; D],
    n0: usize,
    stream: &RandomStream,
) -> Result<Ensemble<D>, EngineError> {
    let n_blocks = n0.div_ceil(BLOCK);
    let blocks: Result<Vec<Vec<SignedParticle<D>>>, EngineError> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.init_rng(b as u64);
            let count = BLOCK.min(n0 - b * BLOCK);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut position = [0.0; D];
                let mut momentum = [0.0; D];
                for d in 0..D {
                    let x_dist = Normal::new(packets[d].center, packets[d].sigma_x)
                        .expect("positive packet width");
                    let k_dist = Normal::new(packets[d].k_center, packets[d].momentum_spread())
                        .expect("positive momentum spread");
                    let mut attempts = 0;
                    position[d] = loop {
                        let x = x_dist.sample(&mut rng);
                        if grid.contains(x) {
                            break x;
                        }
                        attempts += 1;
                        if attempts >= 10_000 {
                            return Err(EngineError::PacketOutsideDomain { coord: d, attempts });
                        }
                    };
                    momentum[d] = k_dist.sample(&mut rng);
                }
                out.push(SignedParticle {
                    position,
                    momentum,
                    sign: Sign::Plus,
                });
            }
            Ok(out)
        })
        .collect();
    let particles = blocks?.concat();
    Ok(Ensemble::new(particles, species))
}

/// Field-less drift: `x += (hbar k / m) dt` per coordinate; momentum and
/// sign unchanged. Pure; the caller decides what to do with positions that
/// leave the domain.
pub fn drift<const D: usize>(
    particle: &SignedParticle<D>,
    masses: &[f64; D],
    dt: f64,
) -> SignedParticle<D> {
    let mut out = *particle;
    for ((x, &k), &mass) in out.position.iter_mut().zip(&particle.momentum).zip(masses) {
        *x += HBAR * k / (mass * ELECTRON_MASS) * dt;
    }
    out
}

/// Where creation rates and momentum offsets come from. Offsets are returned
/// per coordinate so the two-body constraint (opposite offsets) stays inside
/// the source.
pub trait CreationSource<const D: usize>: Sync {
    fn gamma(&self, position: &[f64; D]) -> Result<f64, EngineError>;
    /// Offset for a uniform variate `u` in [0, 1).
    fn offset(&self, position: &[f64; D], u: f64) -> Result<[f64; D], EngineError>;
    fn gamma_max(&self) -> f64;
}

/// Single-body creation from a kernel table keyed by position.
pub struct SingleBodySource<'a> {
    table: &'a WignerKernelTable,
}

impl<'a> SingleBodySource<'a> {
    pub fn new(table: &'a WignerKernelTable) -> Self {
        assert_eq!(
            table.space(),
            KernelSpace::SingleBody,
            "single-body source needs a single-body table"
        );
        Self { table }
    }
}

impl CreationSource<1> for SingleBodySource<'_> {
    fn gamma(&self, position: &[f64; 1]) -> Result<f64, EngineError> {
        self.table
            .gamma_at(position[0])
            .ok_or(EngineError::MissingNode { x: position[0] })
    }

    fn offset(&self, position: &[f64; 1], u: f64) -> Result<[f64; 1], EngineError> {
        let node = self
            .table
            .node_index(position[0])
            .ok_or(EngineError::MissingNode { x: position[0] })?;
        Ok([self.table.sample_offset(node, u)])
    }

    fn gamma_max(&self) -> f64 {
        self.table.gamma_max()
    }
}

/// Two-body creation from a reduced kernel table keyed by r = x_0 - x_1;
/// one offset magnitude applied with opposite signs to the two coordinates.
pub struct RelativePairSource<'a> {
    table: &'a WignerKernelTable,
}

impl<'a> RelativePairSource<'a> {
    pub fn new(table: &'a WignerKernelTable) -> Self {
        assert_eq!(
            table.space(),
            KernelSpace::TwoBodyRelative,
            "pair source needs a relative-coordinate table"
        );
        Self { table }
    }
}

impl CreationSource<2> for RelativePairSource<'_> {
    fn gamma(&self, position: &[f64; 2]) -> Result<f64, EngineError> {
        let r = position[0] - position[1];
        self.table
            .gamma_at(r)
            .ok_or(EngineError::MissingNode { x: r })
    }

    fn offset(&self, position: &[f64; 2], u: f64) -> Result<[f64; 2], EngineError> {
        let r = position[0] - position[1];
        let node = self
            .table
            .node_index(r)
            .ok_or(EngineError::MissingNode { x: r })?;
        let q = self.table.sample_offset(node, u);
        Ok([q, -q])
    }

    fn gamma_max(&self) -> f64 {
        self.table.gamma_max()
    }
}

/// With probability `gamma(x) dt`, creates the offspring pair at the parent
/// position: signs (+s, -s), momenta (k + q, k - q), q drawn from the
/// node's normalized positive kernel part. The parent is left unchanged.
pub fn sample_creation<const D: usize, S: CreationSource<D>, R: Rng>(
    particle: &SignedParticle<D>,
    source: &S,
    dt: f64,
    rng: &mut R,
) -> Result<Option<[SignedParticle<D>; 2]>, EngineError> {
    let gamma = source.gamma(&particle.position)?;
    if gamma <= 0.0 {
        return Ok(None);
    }
    if rng.random::<f64>() >= gamma * dt {
        return Ok(None);
    }
    let offset = source.offset(&particle.position, rng.random::<f64>())?;
    let mut plus = *particle;
    let mut minus = *particle;
    minus.sign = particle.sign.flipped();
    for ((kp, km), &dq) in plus
        .momentum
        .iter_mut()
        .zip(minus.momentum.iter_mut())
        .zip(&offset)
    {
        *kp += dq;
        *km -= dq;
    }
    Ok(Some([plus, minus]))
}

/// Pairwise cancellation counts from one annihilation pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnnihilationStats {
    pub removed: usize,
}

/// Removes opposite-sign pairs within each phase-space cell until only one
/// sign remains per cell. Survivors are the first-encountered particles of
/// the majority sign, so the per-cell signed count is preserved exactly and
/// the pass is idempotent.
pub fn annihilate<const D: usize>(
    ensemble: &mut Ensemble<D>,
    grid: &PhaseSpaceGrid,
) -> AnnihilationStats {
    let mut net: HashMap<CellId<D>, i64> = HashMap::with_capacity(ensemble.len() / 4 + 16);
    for p in &ensemble.particles {
        let cell = cell_index(p, grid).expect("evolved particles stay in the domain");
        *net.entry(cell).or_insert(0) += p.sign.value();
    }
    let before = ensemble.len();
    let mut budget = net;
    ensemble.particles.retain(|p| {
        let cell = cell_index(p, grid).expect("evolved particles stay in the domain");
        let b = budget.get_mut(&cell).expect("cell seen in first pass");
        if *b != 0 && b.signum() == p.sign.value().signum() {
            *b -= p.sign.value();
            true
        } else {
            false
        }
    });
    AnnihilationStats {
        removed: before - ensemble.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Completed,
    /// The particle cap was exceeded; snapshots up to the abort are kept.
    CapAborted {
        step: usize,
    },
}

#[derive(Debug)]
pub struct RunOutput<const D: usize> {
    pub snapshots: Vec<EnsembleSnapshot<D>>,
    pub ensemble: Ensemble<D>,
    pub outcome: RunOutcome,
    pub creation_events: u64,
    pub annihilation_removed: u64,
}

fn validate<const D: usize, S: CreationSource<D>>(
    config: &EvolutionConfig,
    grid: &PhaseSpaceGrid,
    source: &S,
    ensemble: &Ensemble<D>,
) -> Result<(), EngineError> {
    if !config.dt.is_finite() || config.dt <= 0.0 {
        return Err(EngineError::InvalidStep {
            message: format!("dt must be positive, got {}", config.dt),
        });
    }
    if config.annihilation_period < 1 {
        return Err(EngineError::InvalidPeriod {
            field: "annihilation_period",
        });
    }
    if config.snapshot_period < 1 {
        return Err(EngineError::InvalidPeriod {
            field: "snapshot_period",
        });
    }
    let probability = source.gamma_max() * config.dt;
    if probability > config.max_creation_probability {
        return Err(EngineError::CreationProbabilityTooHigh {
            probability,
            bound: config.max_creation_probability,
        });
    }
    // drift bound from the initial momentum spread plus one creation offset
    let masses = ensemble.masses();
    let m_reach = grid.m_max() as f64 * grid.dk();
    for (d, &mass) in masses.iter().enumerate() {
        let k_ref = ensemble
            .particles
            .iter()
            .map(|p| p.momentum[d].abs())
            .fold(0.0, f64::max)
            + m_reach;
        let step = HBAR * k_ref / (mass * ELECTRON_MASS) * config.dt;
        if step > grid.cell_width() {
            return Err(EngineError::DriftTooLarge {
                drift: step,
                cell: grid.cell_width(),
                coord: d,
            });
        }
    }
    Ok(())
}

/// Runs the full loop from an initial ensemble to `t_final` or a cap abort.
pub fn run<const D: usize, S: CreationSource<D>>(
    mut ensemble: Ensemble<D>,
    grid: &PhaseSpaceGrid,
    source: &S,
    config: &EvolutionConfig,
    stream: &RandomStream,
) -> Result<RunOutput<D>, EngineError> {
    validate(config, grid, source, &ensemble)?;
    let n_steps = (config.t_final / config.dt).round().max(1.0) as usize;
    let masses = ensemble.masses();

    let mut snapshots = Vec::new();
    let mut creation_events = 0u64;
    let mut annihilation_removed = 0u64;
    let mut outcome = RunOutcome::Completed;

    let record = |snapshots: &mut Vec<EnsembleSnapshot<D>>,
                  ensemble: &Ensemble<D>,
                  step: usize,
                  created: u64,
                  config: &EvolutionConfig| {
        let snap = build_snapshot(
            ensemble,
            grid,
            step as f64 * config.dt,
            step,
            created,
            config.record_particles,
        );
        if config.progress {
            eprintln!(
                "step={} t={:.6} n={} signed_sum={} leaked={} created={}",
                step, snap.time, snap.particle_count, snap.signed_sum, snap.leaked_sum, created
            );
        }
        snapshots.push(snap);
    };

    record(&mut snapshots, &ensemble, 0, 0, config);

    for step in 1..=n_steps {
        // drift, absorbing boundary exits
        ensemble.particles.par_chunks_mut(BLOCK).for_each(|chunk| {
            for p in chunk.iter_mut() {
                *p = drift(p, &masses, config.dt);
            }
        });
        let mut leaked = 0i64;
        ensemble.particles.retain(|p| {
            if p.position.iter().all(|&x| grid.contains(x)) {
                true
            } else {
                leaked += p.sign.value();
                false
            }
        });
        ensemble.leaked_sum += leaked;

        // creation into per-block buffers, merged in block order
        let buffers: Result<Vec<Vec<SignedParticle<D>>>, EngineError> = ensemble
            .particles
            .par_chunks(BLOCK)
            .enumerate()
            .map(|(b, chunk)| {
                let mut rng = stream.creation_rng(step as u64, b as u64);
                let mut buf = Vec::new();
                for p in chunk {
                    if let Some([plus, minus]) = sample_creation(p, source, config.dt, &mut rng)? {
                        buf.push(plus);
                        buf.push(minus);
                    }
                }
                Ok(buf)
            })
            .collect();
        for buf in buffers? {
            creation_events += (buf.len() / 2) as u64;
            ensemble.particles.extend_from_slice(&buf);
        }

        if ensemble.len() > config.particle_cap {
            record(&mut snapshots, &ensemble, step, creation_events, config);
            eprintln!(
                "abort=particle_cap step={} n={} cap={}",
                step,
                ensemble.len(),
                config.particle_cap
            );
            outcome = RunOutcome::CapAborted { step };
            break;
        }

        if step % config.annihilation_period == 0 {
            annihilation_removed += annihilate(&mut ensemble, grid).removed as u64;
        }

        if step % config.snapshot_period == 0 || step == n_steps {
            record(&mut snapshots, &ensemble, step, creation_events, config);
        }
    }

    Ok(RunOutput {
        snapshots,
        ensemble,
        outcome,
        creation_events,
        annihilation_removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_numeric, kernel_two_body};
    use crate::phase_space::Species;
    use crate::potentials::{PotentialModel, ReducedPotential};

    fn particle(x: f64, k: f64, sign: Sign) -> SignedParticle<1> {
        SignedParticle {
            position: [x],
            momentum: [k],
            sign,
        }
    }

    #[test]
    fn drift_zero_dt_is_identity() {
        let p = particle(1.2, -3.4, Sign::Plus);
        assert_eq!(drift(&p, &[1.0], 0.0), p);
    }

    #[test]
    fn drift_zero_momentum_stays_put() {
        let p = particle(1.2, 0.0, Sign::Minus);
        for dt in [0.1, 1.0, 123.0] {
            assert_eq!(drift(&p, &[1.0], dt).position[0], 1.2);
        }
    }

    #[test]
    fn drift_halves_compose_exactly_at_origin() {
        // at x = 0 the two half-steps hit (0 + a) + a = 2a, which is exact
        let p = particle(0.0, 1.7, Sign::Plus);
        let dt = 0.25;
        let two_half = drift(&drift(&p, &[1.0], 0.5 * dt), &[1.0], 0.5 * dt);
        let full = drift(&p, &[1.0], dt);
        assert_eq!(two_half, full);
    }

    #[test]
    fn drift_halves_compose_to_an_ulp() {
        let masses = [1.0];
        for i in 0..200 {
            let p = particle(-7.0 + 0.07 * i as f64, 0.3 * i as f64 - 20.0, Sign::Plus);
            let dt = 0.2;
            let a = drift(&drift(&p, &masses, 0.5 * dt), &masses, 0.5 * dt).position[0];
            let b = drift(&p, &masses, dt).position[0];
            let ulp = (b.abs()).max(1e-300) * f64::EPSILON;
            assert!((a - b).abs() <= ulp, "{} vs {}", a, b);
        }
    }

    fn barrier_table(grid: &PhaseSpaceGrid) -> WignerKernelTable {
        let pot = PotentialModel::abrupt_barrier(0.1, -3.0, 3.0).unwrap();
        kernel_numeric(&pot, grid).unwrap()
    }

    #[test]
    fn zero_gamma_never_creates() {
        let grid = PhaseSpaceGrid::symmetric(40.0, 64, 32).unwrap();
        let table = kernel_numeric(&PotentialModel::Zero, &grid).unwrap();
        let source = SingleBodySource::new(&table);
        let mut rng = RandomStream::new(7).creation_rng(1, 0);
        let p = particle(0.0, 1.0, Sign::Plus);
        for _ in 0..1_000_000 {
            assert!(sample_creation(&p, &source, 0.5, &mut rng)
                .unwrap()
                .is_none());
        }
    }

    #[test]
    fn created_pair_cancels_and_parent_survives() {
        let grid = PhaseSpaceGrid::symmetric(40.0, 128, 64).unwrap();
        let table = barrier_table(&grid);
        let source = SingleBodySource::new(&table);
        let mut rng = RandomStream::new(11).creation_rng(1, 0);
        // zero parent momentum makes the mirrored offsets exact in fp
        let p = particle(2.0, 0.0, Sign::Minus);
        let dt = 0.1 / table.gamma_max();
        let mut seen = 0;
        for _ in 0..200_000 {
            if let Some([plus, minus]) = sample_creation(&p, &source, dt, &mut rng).unwrap() {
                seen += 1;
                assert_eq!(plus.sign.value() + minus.sign.value(), 0);
                assert_eq!(plus.sign, p.sign);
                assert_eq!(plus.position, p.position);
                assert_eq!(minus.position, p.position);
                assert_eq!(plus.momentum[0], -minus.momentum[0]);
                assert!(plus.momentum[0] != 0.0);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn creation_frequency_matches_rate() {
        let grid = PhaseSpaceGrid::symmetric(40.0, 128, 64).unwrap();
        let table = barrier_table(&grid);
        let source = SingleBodySource::new(&table);
        let x = 2.0;
        let gamma = table.gamma_at(x).unwrap();
        assert!(gamma > 0.0);
        let dt = 0.05 / gamma;
        let p = particle(x, 1.0, Sign::Plus);
        let trials = 100_000u64;
        let mut rng = RandomStream::new(5).creation_rng(1, 0);
        let mut events = 0u64;
        for _ in 0..trials {
            if sample_creation(&p, &source, dt, &mut rng)
                .unwrap()
                .is_some()
            {
                events += 1;
            }
        }
        let expect = gamma * dt;
        let sd = (expect * (1.0 - expect) / trials as f64).sqrt();
        let freq = events as f64 / trials as f64;
        assert!(
            (freq - expect).abs() < 4.0 * sd,
            "freq {freq} vs {expect} (sd {sd})"
        );
    }

    #[test]
    fn two_body_offsets_are_opposite() {
        let grid = PhaseSpaceGrid::symmetric(2.0, 64, 48).unwrap();
        let red = ReducedPotential::SoftCoulomb {
            coupling: 1.43996,
            softening: 0.05,
        };
        let table = kernel_two_body(&red, &grid).unwrap();
        let source = RelativePairSource::new(&table);
        let p = SignedParticle::<2> {
            position: [0.05, -0.02],
            momentum: [0.0, 0.0],
            sign: Sign::Plus,
        };
        let dt = 0.05 / table.gamma_max();
        let mut rng = RandomStream::new(3).creation_rng(1, 0);
        let mut seen = 0;
        for _ in 0..100_000 {
            if let Some([plus, minus]) = sample_creation(&p, &source, dt, &mut rng).unwrap() {
                seen += 1;
                // the pair constraint: opposite offsets on the two coordinates
                assert_eq!(plus.momentum[0], -plus.momentum[1]);
                assert_eq!(minus.momentum[0], -minus.momentum[1]);
                assert_eq!(plus.momentum[0], -minus.momentum[0]);
                assert!(plus.momentum[0] != 0.0);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn annihilation_examples() {
        let grid = PhaseSpaceGrid::symmetric(10.0, 10, 4).unwrap();
        // one +1 and one -1 in the same cell -> empty
        let mut e = Ensemble::new(
            vec![
                particle(0.1, 0.0, Sign::Plus),
                particle(0.12, 0.0, Sign::Minus),
            ],
            [Species::Electron],
        );
        annihilate(&mut e, &grid);
        assert!(e.is_empty());

        // two +1 -> both retained
        let mut e = Ensemble::new(
            vec![
                particle(0.1, 0.0, Sign::Plus),
                particle(0.12, 0.0, Sign::Plus),
            ],
            [Species::Electron],
        );
        annihilate(&mut e, &grid);
        assert_eq!(e.len(), 2);

        // five +1 and three -1 -> the first two +1 remain
        let mut particles = Vec::new();
        for i in 0..5 {
            particles.push(particle(0.1 + 1e-4 * i as f64, 0.0, Sign::Plus));
        }
        for i in 0..3 {
            particles.push(particle(0.2 + 1e-4 * i as f64, 0.0, Sign::Minus));
        }
        let expected: Vec<_> = particles[0..2].to_vec();
        let mut e = Ensemble::new(particles, [Species::Electron]);
        annihilate(&mut e, &grid);
        assert_eq!(e.particles, expected);
    }

    fn random_mixed_ensemble(seed: u64, n: usize) -> Ensemble<1> {
        let mut rng = RandomStream::new(seed).init_rng(0);
        let particles: Vec<_> = (0..n)
            .map(|_| {
                particle(
                    rng.random::<f64>() * 8.0 - 4.0,
                    rng.random::<f64>() * 6.0 - 3.0,
                    if rng.random::<f64>() < 0.5 {
                        Sign::Plus
                    } else {
                        Sign::Minus
                    },
                )
            })
            .collect();
        Ensemble::new(particles, [Species::Electron])
    }

    #[test]
    fn annihilation_is_idempotent_and_preserves_cells() {
        let grid = PhaseSpaceGrid::symmetric(10.0, 16, 4).unwrap();
        let mut e = random_mixed_ensemble(17, 5000);
        let signed_before = e.signed_sum();
        let mut cells_before: HashMap<CellId<1>, i64> = HashMap::new();
        for p in &e.particles {
            *cells_before
                .entry(cell_index(p, &grid).unwrap())
                .or_insert(0) += p.sign.value();
        }

        annihilate(&mut e, &grid);
        let once = e.particles.clone();
        assert_eq!(e.signed_sum(), signed_before);
        let mut cells_after: HashMap<CellId<1>, i64> = HashMap::new();
        for p in &e.particles {
            *cells_after
                .entry(cell_index(p, &grid).unwrap())
                .or_insert(0) += p.sign.value();
        }
        cells_before.retain(|_, v| *v != 0);
        assert_eq!(cells_before, cells_after);

        let stats = annihilate(&mut e, &grid);
        assert_eq!(stats.removed, 0);
        assert_eq!(e.particles, once);
    }

    #[test]
    fn run_conserves_signed_sum_with_interleaving() {
        let grid = PhaseSpaceGrid::symmetric(40.0, 128, 64).unwrap();
        let table = barrier_table(&grid);
        let source = SingleBodySource::new(&table);
        let stream = RandomStream::new(23);
        let packets = [PacketSpec::minimum_uncertainty(-6.0, 1.5, 1.5)];
        let ensemble =
            sample_initial(&grid, &packets, [Species::Electron], 5_000, &stream).unwrap();
        let n0 = ensemble.initial_count as i64;
        let config = EvolutionConfig {
            dt: 0.1,
            t_final: 6.0,
            annihilation_period: 7,
            snapshot_period: 13,
            ..Default::default()
        };
        let out = run(ensemble, &grid, &source, &config, &stream).unwrap();
        assert_eq!(out.outcome, RunOutcome::Completed);
        assert!(out.creation_events > 0);
        for snap in &out.snapshots {
            assert_eq!(snap.signed_sum + snap.leaked_sum, n0);
        }
    }

    #[test]
    fn equal_seeds_reproduce_particle_lists() {
        let grid = PhaseSpaceGrid::symmetric(40.0, 128, 64).unwrap();
        let table = barrier_table(&grid);
        let source = SingleBodySource::new(&table);
        let config = EvolutionConfig {
            dt: 0.1,
            t_final: 3.0,
            annihilation_period: 5,
            snapshot_period: 10,
            record_particles: true,
            ..Default::default()
        };
        let packets = [PacketSpec::minimum_uncertainty(-6.0, 1.5, 1.5)];
        let mut lists = Vec::new();
        for _ in 0..2 {
            let stream = RandomStream::new(99);
            let ensemble =
                sample_initial(&grid, &packets, [Species::Electron], 3_000, &stream).unwrap();
            let out = run(ensemble, &grid, &source, &config, &stream).unwrap();
            lists.push(
                out.snapshots
                    .iter()
                    .map(|s| s.particles.clone().unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        assert_eq!(lists[0], lists[1]);
    }

    #[test]
    fn particle_cap_aborts_with_partial_snapshots() {
        let grid = PhaseSpaceGrid::symmetric(40.0, 128, 64).unwrap();
        let table = barrier_table(&grid);
        let source = SingleBodySource::new(&table);
        let stream = RandomStream::new(31);
        let packets = [PacketSpec::minimum_uncertainty(-4.0, 1.0, 1.5)];
        let ensemble =
            sample_initial(&grid, &packets, [Species::Electron], 2_000, &stream).unwrap();
        let config = EvolutionConfig {
            dt: 0.1,
            t_final: 20.0,
            annihilation_period: 1_000_000, // never annihilate
            snapshot_period: 1_000_000,
            particle_cap: 2_200,
            ..Default::default()
        };
        let out = run(ensemble, &grid, &source, &config, &stream).unwrap();
        assert!(matches!(out.outcome, RunOutcome::CapAborted { .. }));
        assert!(out.snapshots.len() >= 2); // t = 0 plus the abort snapshot
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let grid = PhaseSpaceGrid::symmetric(40.0, 128, 64).unwrap();
        let table = barrier_table(&grid);
        let source = SingleBodySource::new(&table);
        let stream = RandomStream::new(1);
        let packets = [PacketSpec::minimum_uncertainty(0.0, 1.0, 0.0)];
        let ensemble = sample_initial(&grid, &packets, [Species::Electron], 10, &stream).unwrap();

        let bad_dt = EvolutionConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(run(ensemble.clone(), &grid, &source, &bad_dt, &stream).is_err());

        let too_fast = EvolutionConfig {
            dt: 100.0, // violates both the creation and the drift bound
            ..Default::default()
        };
        assert!(run(ensemble, &grid, &source, &too_fast, &stream).is_err());
    }

    #[test]
    fn free_streaming_occupancy_is_stationary() {
        use rand::Rng as _;
        use statrs::distribution::{ChiSquared, ContinuousCDF};

        // uniform phase-space ensemble, drift only; interior spatial cells
        // stay uniform (chi-square at 1% significance)
        let grid = PhaseSpaceGrid::symmetric(32.0, 64, 16).unwrap();
        let mut rng = RandomStream::new(2718).init_rng(5);
        let n = 200_000;
        let k_max = 2.0;
        let particles: Vec<_> = (0..n)
            .map(|_| {
                particle(
                    rng.random::<f64>() * 32.0 - 16.0,
                    rng.random::<f64>() * 2.0 * k_max - k_max,
                    Sign::Plus,
                )
            })
            .collect();
        let mut e = Ensemble::new(particles, [Species::Electron]);
        let dt = 0.5;
        let steps = 20;
        let masses = [1.0];
        for _ in 0..steps {
            for p in e.particles.iter_mut() {
                *p = drift(p, &masses, dt);
            }
        }
        let reach = crate::constants::velocity(k_max, 1.0) * dt * steps as f64;
        let margin = (reach / grid.cell_width()).ceil() as usize + 1;
        let mut counts = vec![0u64; grid.nx()];
        for p in &e.particles {
            if let Some(i) = grid.spatial_cell(p.position[0]) {
                counts[i as usize] += 1;
            }
        }
        let interior = &counts[margin..grid.nx() - margin];
        let total: u64 = interior.iter().sum();
        let expected = total as f64 / interior.len() as f64;
        let chi2: f64 = interior
            .iter()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        let dof = (interior.len() - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} vs critical {critical}");
    }
}
