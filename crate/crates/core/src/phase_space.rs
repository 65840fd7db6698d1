//! Core phase-space types: signed particles, the semi-discrete grid and
//! annihilation-cell indexing.
//!
//! Positions are continuous; momenta are continuous on particles but the
//! grid quantizes them in steps of `dk = pi / L_C` for annihilation cells,
//! kernel lattices and reconstructed quasi-distributions. A phase-space
//! cell is one spatial cell of width `L/nx` crossed with one `dk` step.

use thiserror::Error;

use crate::constants::PROTON_MASS_RATIO;

/// Particle sign. Never zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Sign {
    Plus = 1,
    Minus = -1,
}

impl Sign {
    pub fn value(self) -> i64 {
        self as i8 as i64
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Species label carrying a mass in electron masses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Species {
    Electron,
    Proton,
    /// Custom mass (electron masses).
    Generic(f64),
}

impl Species {
    pub fn mass(self) -> f64 {
        match self {
            Species::Electron => 1.0,
            Species::Proton => PROTON_MASS_RATIO,
            Species::Generic(m) => m,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Species::Electron => "electron",
            Species::Proton => "proton",
            Species::Generic(_) => "generic",
        }
    }
}

/// A classical point particle with a sign. `D` is the configuration-space
/// dimension (1 for single-body runs, 2 for the two-body scenario).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedParticle<const D: usize> {
    /// Position per dimension (nm).
    pub position: [f64; D],
    /// Wave-number per dimension (1/nm); momentum is `hbar k`.
    pub momentum: [f64; D],
    pub sign: Sign,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid.{field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

/// Semi-discrete phase-space lattice. The same spatial extent and momentum
/// quantum apply to every configuration-space dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceGrid {
    x_min: f64,
    x_max: f64,
    nx: usize,
    coherence_length: f64,
    m_max: usize,
}

impl PhaseSpaceGrid {
    /// A grid over `[x_min, x_max]` with `nx` spatial cells, momentum quantum
    /// `pi / coherence_length` and kernel lattice indices `-m_max ..= m_max`.
    pub fn new(
        x_min: f64,
        x_max: f64,
        nx: usize,
        coherence_length: f64,
        m_max: usize,
    ) -> Result<Self, GridError> {
        if !(x_max - x_min).is_finite() || x_max <= x_min {
            return Err(GridError::Invalid {
                field: "extent",
                message: format!("domain [{x_min}, {x_max}] must have positive length"),
            });
        }
        if nx < 2 {
            return Err(GridError::Invalid {
                field: "nx",
                message: format!("need at least 2 spatial cells, got {nx}"),
            });
        }
        if !coherence_length.is_finite() || coherence_length <= 0.0 {
            return Err(GridError::Invalid {
                field: "coherence_length",
                message: format!("must be positive, got {coherence_length}"),
            });
        }
        if m_max < 1 {
            return Err(GridError::Invalid {
                field: "m_max",
                message: "need at least 1 momentum index".to_owned(),
            });
        }
        Ok(Self {
            x_min,
            x_max,
            nx,
            coherence_length,
            m_max,
        })
    }

    /// Symmetric grid `[-length/2, +length/2]` with the coherence length
    /// defaulting to the domain length.
    pub fn symmetric(length: f64, nx: usize, m_max: usize) -> Result<Self, GridError> {
        Self::new(-0.5 * length, 0.5 * length, nx, length, m_max)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn cell_width(&self) -> f64 {
        self.extent() / self.nx as f64
    }

    pub fn coherence_length(&self) -> f64 {
        self.coherence_length
    }

    /// Momentum quantum dk = pi / L_C (1/nm).
    pub fn dk(&self) -> f64 {
        std::f64::consts::PI / self.coherence_length
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn n_momenta(&self) -> usize {
        2 * self.m_max + 1
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Spatial cell of an in-domain coordinate (the right domain edge folds
    /// into the last cell).
    pub fn spatial_cell(&self, x: f64) -> Option<u32> {
        if !self.contains(x) {
            return None;
        }
        let i = ((x - self.x_min) / self.cell_width()) as usize;
        Some(i.min(self.nx - 1) as u32)
    }

    /// Momentum cell index: nearest multiple of dk. Not bounded by `m_max`;
    /// the kernel lattice bound only truncates creation offsets.
    pub fn momentum_cell(&self, k: f64) -> i32 {
        let m = (k / self.dk()).round();
        if m >= i32::MAX as f64 {
            i32::MAX
        } else if m <= i32::MIN as f64 {
            i32::MIN
        } else {
            m as i32
        }
    }

    /// Same-length grid over the relative coordinate `r = x_0 - x_1`, which
    /// spans `[-L, +L]` with the same cell width and momentum quantum.
    pub fn relative(&self) -> PhaseSpaceGrid {
        PhaseSpaceGrid {
            x_min: -self.extent(),
            x_max: self.extent(),
            nx: 2 * self.nx,
            coherence_length: self.coherence_length,
            m_max: self.m_max,
        }
    }
}

/// Annihilation cell identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellId<const D: usize> {
    pub spatial: [u32; D],
    pub momentum: [i32; D],
}

/// Signals that a particle position left the simulation domain. The caller
/// removes the particle and logs its sign as leaked norm.
#[derive(Debug, Error)]
#[error("position left the simulation domain")]
pub struct OutOfDomain;

/// The unique phase-space cell containing a particle.
pub fn cell_index<const D: usize>(
    particle: &SignedParticle<D>,
    grid: &PhaseSpaceGrid,
) -> Result<CellId<D>, OutOfDomain> {
    let mut spatial = [0u32; D];
    let mut momentum = [0i32; D];
    for d in 0..D {
        spatial[d] = grid.spatial_cell(particle.position[d]).ok_or(OutOfDomain)?;
        momentum[d] = grid.momentum_cell(particle.momentum[d]);
    }
    Ok(CellId { spatial, momentum })
}

/// The kernel momentum lattice `{ M dk : M = -m_max ..= +m_max }`.
pub fn momentum_lattice(grid: &PhaseSpaceGrid) -> Vec<f64> {
    let m = grid.m_max() as i64;
    (-m..=m).map(|i| i as f64 * grid.dk()).collect()
}

/// A signed-particle ensemble. All particles share the per-dimension
/// species array; `initial_count` is the normalization constant for every
/// reconstructed observable and stays fixed for the run.
#[derive(Clone, Debug)]
pub struct Ensemble<const D: usize> {
    pub particles: Vec<SignedParticle<D>>,
    pub initial_count: usize,
    pub species: [Species; D],
    /// Sum of signs of particles absorbed at the domain boundary.
    pub leaked_sum: i64,
}

impl<const D: usize> Ensemble<D> {
    pub fn new(particles: Vec<SignedParticle<D>>, species: [Species; D]) -> Self {
        let initial_count = particles.len();
        Self {
            particles,
            initial_count,
            species,
            leaked_sum: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn signed_sum(&self) -> i64 {
        self.particles.iter().map(|p| p.sign.value()).sum()
    }

    pub fn masses(&self) -> [f64; D] {
        std::array::from_fn(|d| self.species[d].mass())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PhaseSpaceGrid {
        PhaseSpaceGrid::symmetric(40.0, 256, 64).unwrap()
    }

    #[test]
    fn lattice_is_symmetric_and_counted() {
        let g = PhaseSpaceGrid::symmetric(2.0 * std::f64::consts::PI, 4, 3).unwrap();
        let lat = momentum_lattice(&g);
        assert_eq!(lat.len(), 7);
        for (a, b) in lat.iter().zip(lat.iter().rev()) {
            assert_eq!(*a, -*b);
        }
        let dk = g.dk();
        for w in lat.windows(2) {
            assert!((w[1] - w[0] - dk).abs() < 1e-15);
        }
    }

    #[test]
    fn lattice_m_max_one_unit_spacing() {
        // dk = 1/nm when L_C = pi
        let g = PhaseSpaceGrid::new(0.0, 1.0, 2, std::f64::consts::PI, 1).unwrap();
        let lat = momentum_lattice(&g);
        assert_eq!(lat.len(), 3);
        assert!((lat[0] + 1.0).abs() < 1e-15);
        assert_eq!(lat[1], 0.0);
        assert!((lat[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn central_particle_maps_to_central_cell() {
        let g = grid();
        let p = SignedParticle::<1> {
            position: [0.0],
            momentum: [0.0],
            sign: Sign::Plus,
        };
        let c = cell_index(&p, &g).unwrap();
        assert_eq!(c.spatial[0], 128); // domain center falls on the upper half
        assert_eq!(c.momentum[0], 0);
    }

    #[test]
    fn identical_coordinates_share_a_cell() {
        let g = grid();
        let p = SignedParticle::<1> {
            position: [3.21],
            momentum: [-1.7],
            sign: Sign::Plus,
        };
        let q = SignedParticle::<1> {
            sign: Sign::Minus,
            ..p
        };
        assert_eq!(cell_index(&p, &g).unwrap(), cell_index(&q, &g).unwrap());
    }

    #[test]
    fn outside_domain_is_an_exit() {
        let g = grid();
        let p = SignedParticle::<1> {
            position: [20.0 + 1e-9],
            momentum: [0.0],
            sign: Sign::Plus,
        };
        assert!(cell_index(&p, &g).is_err());
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(PhaseSpaceGrid::new(0.0, 0.0, 4, 1.0, 1).is_err());
        assert!(PhaseSpaceGrid::new(0.0, 1.0, 1, 1.0, 1).is_err());
        assert!(PhaseSpaceGrid::new(0.0, 1.0, 4, 0.0, 1).is_err());
        assert!(PhaseSpaceGrid::new(0.0, 1.0, 4, 1.0, 0).is_err());
    }

    #[test]
    fn cells_partition_phase_space() {
        use rand::Rng;
        use rand::SeedableRng;

        // 10^4 random in-domain particles: each maps to exactly one cell,
        // deterministically, and the cell contains the particle's coordinates
        let g = grid();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(314);
        for _ in 0..10_000 {
            let p = SignedParticle::<1> {
                position: [rng.random::<f64>() * 40.0 - 20.0],
                momentum: [rng.random::<f64>() * 30.0 - 15.0],
                sign: Sign::Plus,
            };
            let a = cell_index(&p, &g).unwrap();
            let b = cell_index(&p, &g).unwrap();
            assert_eq!(a, b);
            let x_lo = g.x_min() + a.spatial[0] as f64 * g.cell_width();
            assert!(p.position[0] >= x_lo - 1e-12);
            assert!(p.position[0] <= x_lo + g.cell_width() + 1e-12);
            assert!((p.momentum[0] - a.momentum[0] as f64 * g.dk()).abs() <= 0.5 * g.dk() + 1e-12);
        }
    }

    #[test]
    fn signed_sum_counts_signs() {
        let mk = |sign| SignedParticle::<1> {
            position: [0.0],
            momentum: [0.0],
            sign,
        };
        let e = Ensemble::new(
            vec![mk(Sign::Plus), mk(Sign::Plus), mk(Sign::Minus)],
            [Species::Electron],
        );
        assert_eq!(e.signed_sum(), 1);
        assert_eq!(e.initial_count, 3);
    }
}
