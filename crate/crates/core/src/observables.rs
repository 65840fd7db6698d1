//! Reconstruction of macroscopic quantities from signed ensembles.
//!
//! Everything is plain signed histogram counting normalized by the initial
//! particle count N0: created pairs cancel and annihilation removes exact
//! cancellations, so N0 is the one constant that keeps <1> = 1 in time.
//! Histograms are integer until the final division, which makes momentum
//! marginalization commute with density reconstruction bit-exactly.

use thiserror::Error;

use crate::phase_space::{Ensemble, PhaseSpaceGrid, SignedParticle, Species};

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error("reference density is identically zero; relative difference undefined")]
    ZeroReference,
    #[error("densities live on different grids ({a} vs {b} nodes)")]
    GridMismatch { a: usize, b: usize },
}

/// Normalized marginal density of one coordinate (1/nm per spatial cell).
#[derive(Clone, Debug)]
pub struct SpatialDensity {
    pub species: Species,
    pub x_min: f64,
    pub cell_width: f64,
    pub values: Vec<f64>,
}

impl SpatialDensity {
    /// Spatial integral (dimensionless; 1 before boundary leakage).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_width
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Signed phase-space quasi-distribution on grid cells (1/(nm * 1/nm)).
///
/// Rows are spatial cells, columns the momentum window `-m_max ..= m_max`;
/// entries beyond the window are folded into the edge columns so that the
/// momentum sum always recovers the spatial histogram.
#[derive(Clone, Debug)]
pub struct QuasiDistribution {
    pub x_min: f64,
    pub cell_width: f64,
    pub dk: f64,
    pub m_max: usize,
    pub nx: usize,
    pub values: Vec<f64>,
}

impl QuasiDistribution {
    pub fn n_momenta(&self) -> usize {
        2 * self.m_max + 1
    }

    pub fn value(&self, ix: usize, m: i32) -> f64 {
        self.values[ix * self.n_momenta() + (m + self.m_max as i32) as usize]
    }

    /// Phase-space integral (1 before leakage).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_width * self.dk
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Momentum-integrated marginal (a density per spatial cell).
    pub fn x_marginal(&self) -> Vec<f64> {
        let nm = self.n_momenta();
        (0..self.nx)
            .map(|i| self.values[i * nm..(i + 1) * nm].iter().sum::<f64>() * self.dk)
            .collect()
    }

    /// Space-integrated marginal (a density per momentum cell).
    pub fn k_marginal(&self) -> Vec<f64> {
        let nm = self.n_momenta();
        (0..nm)
            .map(|l| (0..self.nx).map(|i| self.values[i * nm + l]).sum::<f64>() * self.cell_width)
            .collect()
    }
}

/// Integer counting pass shared by the density and quasi-distribution
/// reconstructions of one coordinate.
#[derive(Clone, Debug)]
pub struct PhaseSpaceHistogram {
    pub nx: usize,
    pub m_max: usize,
    /// Signed counts per (spatial, momentum) cell.
    pub counts: Vec<i64>,
    /// Unsigned entry totals per cell, for sampling-noise estimates.
    pub entries: Vec<i64>,
}

impl PhaseSpaceHistogram {
    pub fn accumulate<const D: usize>(
        ensemble: &Ensemble<D>,
        grid: &PhaseSpaceGrid,
        coord: usize,
    ) -> Self {
        let nx = grid.nx();
        let m_max = grid.m_max();
        let nm = 2 * m_max + 1;
        let mut counts = vec![0i64; nx * nm];
        let mut entries = vec![0i64; nx * nm];
        for p in &ensemble.particles {
            let Some(ix) = grid.spatial_cell(p.position[coord]) else {
                continue;
            };
            let m = grid
                .momentum_cell(p.momentum[coord])
                .clamp(-(m_max as i32), m_max as i32);
            let idx = ix as usize * nm + (m + m_max as i32) as usize;
            counts[idx] += p.sign.value();
            entries[idx] += 1;
        }
        Self {
            nx,
            m_max,
            counts,
            entries,
        }
    }

    /// Signed counts summed over momentum, one per spatial cell.
    pub fn spatial_counts(&self) -> Vec<i64> {
        let nm = 2 * self.m_max + 1;
        (0..self.nx)
            .map(|i| self.counts[i * nm..(i + 1) * nm].iter().sum::<i64>())
            .collect()
    }

    pub fn density(&self, grid: &PhaseSpaceGrid, n0: usize, species: Species) -> SpatialDensity {
        let norm = 1.0 / (n0 as f64 * grid.cell_width());
        SpatialDensity {
            species,
            x_min: grid.x_min(),
            cell_width: grid.cell_width(),
            values: self
                .spatial_counts()
                .iter()
                .map(|&c| c as f64 * norm)
                .collect(),
        }
    }

    pub fn quasi(&self, grid: &PhaseSpaceGrid, n0: usize) -> QuasiDistribution {
        let norm = 1.0 / (n0 as f64 * grid.cell_width() * grid.dk());
        QuasiDistribution {
            x_min: grid.x_min(),
            cell_width: grid.cell_width(),
            dk: grid.dk(),
            m_max: self.m_max,
            nx: self.nx,
            values: self.counts.iter().map(|&c| c as f64 * norm).collect(),
        }
    }

    /// The most negative cell value together with its entry total.
    pub fn min_cell(&self, grid: &PhaseSpaceGrid, n0: usize) -> (f64, i64) {
        let norm = 1.0 / (n0 as f64 * grid.cell_width() * grid.dk());
        let mut min_v = f64::INFINITY;
        let mut min_entries = 0i64;
        for (i, &c) in self.counts.iter().enumerate() {
            let v = c as f64 * norm;
            if v < min_v {
                min_v = v;
                min_entries = self.entries[i];
            }
        }
        (min_v, min_entries)
    }
}

/// Ensemble average `(1/N0) sum_i s_i A(x_i, k_i)`.
pub fn ensemble_average<const D: usize, F>(ensemble: &Ensemble<D>, observable: F) -> f64
where
    F: Fn(&[f64; D], &[f64; D]) -> f64,
{
    let sum: f64 = ensemble
        .particles
        .iter()
        .map(|p| p.sign.value() as f64 * observable(&p.position, &p.momentum))
        .sum();
    sum / ensemble.initial_count as f64
}

/// Normalized marginal density of one coordinate, marginalizing the others.
pub fn marginal_density<const D: usize>(
    ensemble: &Ensemble<D>,
    grid: &PhaseSpaceGrid,
    coord: usize,
) -> SpatialDensity {
    PhaseSpaceHistogram::accumulate(ensemble, grid, coord).density(
        grid,
        ensemble.initial_count,
        ensemble.species[coord],
    )
}

/// Signed quasi-distribution of one coordinate pair (x_c, k_c).
pub fn quasi_distribution<const D: usize>(
    ensemble: &Ensemble<D>,
    grid: &PhaseSpaceGrid,
    coord: usize,
) -> QuasiDistribution {
    PhaseSpaceHistogram::accumulate(ensemble, grid, coord).quasi(grid, ensemble.initial_count)
}

/// Pointwise relative difference `(rho_t - rho_0) / max rho_0`.
pub fn relative_difference(
    rho_0: &SpatialDensity,
    rho_t: &SpatialDensity,
) -> Result<Vec<f64>, ObservableError> {
    if rho_0.values.len() != rho_t.values.len() {
        return Err(ObservableError::GridMismatch {
            a: rho_0.values.len(),
            b: rho_t.values.len(),
        });
    }
    let peak = rho_0.max_value();
    if peak.is_nan() || peak <= 0.0 {
        return Err(ObservableError::ZeroReference);
    }
    Ok(rho_0
        .values
        .iter()
        .zip(&rho_t.values)
        .map(|(&a, &b)| (b - a) / peak)
        .collect())
}

/// Signed-weighted statistics of the pair separation |x_0 - x_1|.
#[derive(Clone, Copy, Debug)]
pub struct SeparationStats {
    /// `(1/N0) sum_i s_i |dx_i|` (nm).
    pub mean: f64,
    /// Radius containing 50% of the signed weight.
    pub median_radius: f64,
    /// Radius containing 68% of the signed weight.
    pub q68_radius: f64,
}

/// Separation statistics of a two-body ensemble, histogrammed at `bin_width`.
pub fn pair_separation_stats(ensemble: &Ensemble<2>, bin_width: f64) -> SeparationStats {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut max_r = 0.0f64;
    for p in &ensemble.particles {
        max_r = max_r.max((p.position[0] - p.position[1]).abs());
    }
    let n_bins = ((max_r / bin_width).ceil() as usize + 1).max(1);
    let mut hist = vec![0i64; n_bins];
    let mut mean = 0.0;
    let mut total = 0i64;
    for p in &ensemble.particles {
        let r = (p.position[0] - p.position[1]).abs();
        let s = p.sign.value();
        mean += s as f64 * r;
        hist[((r / bin_width) as usize).min(n_bins - 1)] += s;
        total += s;
    }
    mean /= ensemble.initial_count as f64;

    let quantile = |q: f64| -> f64 {
        let target = q * total as f64;
        let mut cum = 0i64;
        for (b, &c) in hist.iter().enumerate() {
            cum += c;
            if cum as f64 >= target {
                return (b + 1) as f64 * bin_width;
            }
        }
        n_bins as f64 * bin_width
    };

    SeparationStats {
        mean,
        median_radius: quantile(0.5),
        q68_radius: quantile(0.68),
    }
}

/// Time-stamped reconstruction of an ensemble's observables.
#[derive(Clone, Debug)]
pub struct EnsembleSnapshot<const D: usize> {
    pub time: f64,
    pub step: usize,
    pub particle_count: usize,
    pub signed_sum: i64,
    pub leaked_sum: i64,
    /// Cumulative pair-creation events up to this snapshot.
    pub creation_events: u64,
    /// Marginal density per coordinate.
    pub densities: Vec<SpatialDensity>,
    /// Quasi-distribution of coordinate 0 with its counting pass.
    pub quasi: QuasiDistribution,
    pub histogram: PhaseSpaceHistogram,
    pub min_cell_value: f64,
    /// Unsigned entry count of the most negative cell.
    pub min_cell_entries: i64,
    /// Particle list copy when the run records particles.
    pub particles: Option<Vec<SignedParticle<D>>>,
}

/// Builds the standard snapshot for an ensemble state.
pub fn build_snapshot<const D: usize>(
    ensemble: &Ensemble<D>,
    grid: &PhaseSpaceGrid,
    time: f64,
    step: usize,
    creation_events: u64,
    record_particles: bool,
) -> EnsembleSnapshot<D> {
    let histogram = PhaseSpaceHistogram::accumulate(ensemble, grid, 0);
    let densities = (0..D)
        .map(|c| marginal_density(ensemble, grid, c))
        .collect();
    let quasi = histogram.quasi(grid, ensemble.initial_count);
    let (min_cell_value, min_cell_entries) = histogram.min_cell(grid, ensemble.initial_count);
    EnsembleSnapshot {
        time,
        step,
        particle_count: ensemble.len(),
        signed_sum: ensemble.signed_sum(),
        leaked_sum: ensemble.leaked_sum,
        creation_events,
        densities,
        quasi,
        histogram,
        min_cell_value,
        min_cell_entries,
        particles: record_particles.then(|| ensemble.particles.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::Sign;

    fn one_particle(sign: Sign) -> Ensemble<1> {
        Ensemble::new(
            vec![SignedParticle {
                position: [0.3],
                momentum: [0.0],
                sign,
            }],
            [Species::Electron],
        )
    }

    #[test]
    fn average_of_unity_single_particle() {
        let e = one_particle(Sign::Plus);
        assert_eq!(ensemble_average(&e, |_, _| 1.0), 1.0);
    }

    #[test]
    fn coincident_pair_cancels() {
        let p = SignedParticle::<1> {
            position: [0.3],
            momentum: [1.0],
            sign: Sign::Plus,
        };
        let q = SignedParticle {
            sign: Sign::Minus,
            ..p
        };
        let mut e = Ensemble::new(vec![p, q], [Species::Electron]);
        e.initial_count = 2;
        assert_eq!(ensemble_average(&e, |x, _| 7.0 * x[0]), 0.0);
    }

    #[test]
    fn density_integral_counts_particles() {
        let grid = PhaseSpaceGrid::symmetric(10.0, 32, 8).unwrap();
        let particles: Vec<_> = (0..100)
            .map(|i| SignedParticle::<1> {
                position: [-4.0 + 0.08 * i as f64],
                momentum: [0.0],
                sign: Sign::Plus,
            })
            .collect();
        let e = Ensemble::new(particles, [Species::Electron]);
        let d = marginal_density(&e, &grid, 0);
        assert!((d.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_positive_ensemble_has_nonnegative_quasi() {
        // a minimum-uncertainty sample carries only +1 signs, so every
        // reconstructed cell is a plain count
        let grid = PhaseSpaceGrid::symmetric(20.0, 64, 32).unwrap();
        let particles: Vec<_> = (0..5000)
            .map(|i| SignedParticle::<1> {
                position: [-8.0 + 0.003 * i as f64],
                momentum: [(i % 17) as f64 * 0.1 - 0.8],
                sign: Sign::Plus,
            })
            .collect();
        let e = Ensemble::new(particles, [Species::Electron]);
        let q = quasi_distribution(&e, &grid, 0);
        assert!(q.min_value() >= 0.0);
    }

    #[test]
    fn sampled_gaussian_matches_its_density() {
        use crate::engine::{sample_initial, PacketSpec};
        use crate::stream::RandomStream;
        use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

        // histogram of 1e5 packet samples against the true cell masses:
        // chi-square goodness of fit must not reject at the 1% level
        let grid = PhaseSpaceGrid::symmetric(40.0, 128, 16).unwrap();
        let n0 = 100_000usize;
        let (center, sigma) = (-3.0, 2.5);
        let packets = [PacketSpec::minimum_uncertainty(center, sigma, 0.0)];
        let stream = RandomStream::new(909);
        let e = sample_initial(&grid, &packets, [Species::Electron], n0, &stream).unwrap();
        let hist = PhaseSpaceHistogram::accumulate(&e, &grid, 0);
        let counts = hist.spatial_counts();
        let normal = Normal::new(center, sigma).unwrap();
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for (i, &count) in counts.iter().enumerate() {
            let lo = grid.x_min() + i as f64 * grid.cell_width();
            let hi = lo + grid.cell_width();
            let expected = n0 as f64 * (normal.cdf(hi) - normal.cdf(lo));
            if expected < 5.0 {
                continue; // standard validity cut for the statistic
            }
            let d = count as f64 - expected;
            chi2 += d * d / expected;
            dof += 1;
        }
        assert!(dof > 20);
        let critical = ChiSquared::new((dof - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(
            chi2 < critical,
            "chi2 {chi2} vs critical {critical} (dof {dof})"
        );
    }

    #[test]
    fn quasi_marginal_matches_density_bit_exactly() {
        let grid = PhaseSpaceGrid::symmetric(10.0, 32, 8).unwrap();
        let particles: Vec<_> = (0..257)
            .map(|i| SignedParticle::<1> {
                position: [-4.9 + 0.038 * i as f64],
                momentum: [-12.0 + 0.09 * i as f64], // some beyond the window
                sign: if i % 3 == 0 { Sign::Minus } else { Sign::Plus },
            })
            .collect();
        let e = Ensemble::new(particles, [Species::Electron]);
        let hist = PhaseSpaceHistogram::accumulate(&e, &grid, 0);
        let spatial = hist.spatial_counts();
        let d = marginal_density(&e, &grid, 0);
        let norm = 1.0 / (e.initial_count as f64 * grid.cell_width());
        for (c, v) in spatial.iter().zip(&d.values) {
            assert_eq!(*c as f64 * norm, *v);
        }
    }

    #[test]
    fn relative_difference_examples() {
        let base = SpatialDensity {
            species: Species::Proton,
            x_min: 0.0,
            cell_width: 1.0,
            values: vec![0.1, 0.4, 0.2],
        };
        let same = relative_difference(&base, &base).unwrap();
        assert!(same.iter().all(|&e| e == 0.0));

        let mut doubled = base.clone();
        doubled.values = vec![0.2, 0.8, 0.4];
        let eps = relative_difference(&base, &doubled).unwrap();
        assert!((eps[1] - 1.0).abs() < 1e-15);

        let zero = SpatialDensity {
            values: vec![0.0; 3],
            ..base.clone()
        };
        assert!(relative_difference(&zero, &base).is_err());
    }

    #[test]
    fn epsilon_invariant_under_common_rescale() {
        let mk = |vals: Vec<f64>| SpatialDensity {
            species: Species::Proton,
            x_min: 0.0,
            cell_width: 1.0,
            values: vals,
        };
        let a = mk(vec![0.1, 0.5, 0.3]);
        let b = mk(vec![0.2, 0.45, 0.31]);
        let eps = relative_difference(&a, &b).unwrap();
        let sa = mk(a.values.iter().map(|v| v * 3.7).collect());
        let sb = mk(b.values.iter().map(|v| v * 3.7).collect());
        let eps_scaled = relative_difference(&sa, &sb).unwrap();
        for (x, y) in eps.iter().zip(&eps_scaled) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn separation_stats_coincident_and_sorted() {
        let coincident: Vec<_> = (0..10)
            .map(|i| SignedParticle::<2> {
                position: [0.1 * i as f64, 0.1 * i as f64],
                momentum: [0.0, 0.0],
                sign: Sign::Plus,
            })
            .collect();
        let e = Ensemble::new(coincident, [Species::Electron, Species::Proton]);
        let stats = pair_separation_stats(&e, 0.01);
        assert_eq!(stats.mean, 0.0);

        // all-positive ensemble: quantiles agree with a direct sort up to a bin
        let seps = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
        let spread: Vec<_> = seps
            .iter()
            .map(|&r| SignedParticle::<2> {
                position: [r, 0.0],
                momentum: [0.0, 0.0],
                sign: Sign::Plus,
            })
            .collect();
        let e = Ensemble::new(spread, [Species::Electron, Species::Proton]);
        let bin = 0.01;
        let stats = pair_separation_stats(&e, bin);
        let direct_median = 0.25; // 5th of 10 sorted values
        assert!((stats.median_radius - direct_median).abs() <= bin + 1e-12);
        let direct_q68 = 0.35; // ceil(0.68 * 10) = 7th value
        assert!((stats.q68_radius - direct_q68).abs() <= bin + 1e-12);
        let mean_direct = seps.iter().sum::<f64>() / seps.len() as f64;
        assert!((stats.mean - mean_direct).abs() < 1e-12);
    }
}
