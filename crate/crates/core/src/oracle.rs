//! Independent wavefunction reference for single-body scenarios: unitary
//! split-operator evolution on a uniform grid and a cell-aligned transform
//! into the engine's phase-space lattice.
//!
//! Nothing here touches the particle machinery; agreement between the two
//! paths is what the acceptance suite checks.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::constants::{ELECTRON_MASS, HBAR};
use crate::observables::QuasiDistribution;
use crate::phase_space::PhaseSpaceGrid;
use crate::potentials::{PotentialError, PotentialModel};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "oracle.dt: dt * E_max/hbar = {phase:.3} but the splitting needs < 0.5 \
         (grid Nyquist energy {e_max:.3e} eV)"
    )]
    StabilityViolated { phase: f64, e_max: f64 },
    #[error("wavefunction grid is incompatible with the phase-space grid: {reason}")]
    IncompatibleGrids { reason: String },
    #[error("quasi-distribution grids differ: {reason}")]
    GridMismatch { reason: String },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Complex amplitudes on a uniform spatial grid (cell-center nodes).
#[derive(Clone, Debug)]
pub struct WaveFunction {
    pub x_min: f64,
    pub dx: f64,
    /// Mass in electron masses.
    pub mass: f64,
    /// Time stamp (fs).
    pub time: f64,
    pub amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    /// Normalized Gaussian packet `exp(-(x-x0)^2/(4 sigma^2) + i k0 x)` on
    /// `n` cell-center nodes across `[x_min, x_max]`.
    pub fn gaussian(
        x_min: f64,
        x_max: f64,
        n: usize,
        mass: f64,
        center: f64,
        sigma_x: f64,
        k0: f64,
    ) -> Self {
        let dx = (x_max - x_min) / n as f64;
        let mut amplitudes: Vec<Complex64> = (0..n)
            .map(|g| {
                let x = x_min + (g as f64 + 0.5) * dx;
                let envelope = (-(x - center) * (x - center) / (4.0 * sigma_x * sigma_x)).exp();
                Complex64::from_polar(envelope, k0 * x)
            })
            .collect();
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx;
        let scale = 1.0 / norm.sqrt();
        amplitudes.iter_mut().for_each(|a| *a *= scale);
        Self {
            x_min,
            dx,
            mass,
            time: 0.0,
            amplitudes,
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn node(&self, g: usize) -> f64 {
        self.x_min + (g as f64 + 0.5) * self.dx
    }

    /// L2 norm (should stay 1 under unitary evolution).
    pub fn norm(&self) -> f64 {
        (self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx).sqrt()
    }

    /// |psi|^2 per node (1/nm).
    pub fn probability_density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Position spread sqrt(<x^2> - <x>^2).
    pub fn position_spread(&self) -> f64 {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (g, a) in self.amplitudes.iter().enumerate() {
            let x = self.node(g);
            let w = a.norm_sqr();
            m0 += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let mean = m1 / m0;
        (m2 / m0 - mean * mean).sqrt()
    }

    /// |psi~(k)|^2 on the grid's own momentum lattice k_n = 2 pi n / (N dx)
    /// (FFT ordering folded to -N/2..N/2-1), returned as (k, density) pairs.
    pub fn momentum_density(&self) -> Vec<(f64, f64)> {
        let n = self.len();
        let mut buf = self.amplitudes.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        // psi~(k_m) = dx/sqrt(2 pi) sum_g psi_g e^{-i k_m x_g}
        let scale = self.dx / (2.0 * std::f64::consts::PI).sqrt();
        let dk_fft = 2.0 * std::f64::consts::PI / (n as f64 * self.dx);
        (0..n)
            .map(|idx| {
                let m = if idx <= n / 2 {
                    idx as i64
                } else {
                    idx as i64 - n as i64
                };
                let k = m as f64 * dk_fft;
                // the FFT sums over indices; restore the x_g phase reference
                let phase = Complex64::from_polar(1.0, -k * (self.x_min + 0.5 * self.dx));
                let amp = buf[idx] * phase * scale;
                (k, amp.norm_sqr())
            })
            .collect()
    }
}

/// Two-body wavefunction on a square (x_0, x_1) grid, row-major in the
/// first coordinate. Coarse-resolution reference for pair scenarios.
#[derive(Clone, Debug)]
pub struct WaveFunction2d {
    pub x_min: f64,
    pub dx: f64,
    /// Nodes per coordinate.
    pub n: usize,
    /// Masses in electron masses.
    pub masses: [f64; 2],
    pub time: f64,
    pub amplitudes: Vec<Complex64>,
}

impl WaveFunction2d {
    /// Normalized product of two Gaussian packets.
    pub fn gaussian_product(
        x_min: f64,
        x_max: f64,
        n: usize,
        masses: [f64; 2],
        centers: [f64; 2],
        sigmas: [f64; 2],
        k0s: [f64; 2],
    ) -> Self {
        let dx = (x_max - x_min) / n as f64;
        let node = |g: usize| x_min + (g as f64 + 0.5) * dx;
        let one = |x: f64, c: f64, s: f64, k: f64| {
            Complex64::from_polar((-(x - c) * (x - c) / (4.0 * s * s)).exp(), k * x)
        };
        let mut amplitudes = Vec::with_capacity(n * n);
        for i in 0..n {
            let a = one(node(i), centers[0], sigmas[0], k0s[0]);
            for j in 0..n {
                amplitudes.push(a * one(node(j), centers[1], sigmas[1], k0s[1]));
            }
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx * dx;
        let scale = 1.0 / norm.sqrt();
        amplitudes.iter_mut().for_each(|a| *a *= scale);
        Self {
            x_min,
            dx,
            n,
            masses,
            time: 0.0,
            amplitudes,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx * self.dx).sqrt()
    }

    /// Marginal probability density of one coordinate (1/nm per node).
    pub fn marginal(&self, coord: usize) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let w = self.amplitudes[i * n + j].norm_sqr();
                out[if coord == 0 { i } else { j }] += w * self.dx;
            }
        }
        out
    }
}

/// Two-body split-operator step, same splitting and stability rule as the
/// single-body solver. The potential takes the two coordinates.
pub fn split_step_evolve_2d(
    psi: &WaveFunction2d,
    potential: &PotentialModel,
    dt: f64,
    steps: usize,
) -> Result<WaveFunction2d, OracleError> {
    let n = psi.n;
    let k_nyquist = std::f64::consts::PI / psi.dx;
    let inv_mass = 1.0 / (psi.masses[0] * ELECTRON_MASS) + 1.0 / (psi.masses[1] * ELECTRON_MASS);
    let e_max = 0.5 * HBAR * HBAR * k_nyquist * k_nyquist * inv_mass;
    let phase = dt * e_max / HBAR;
    if phase.is_nan() || phase >= 0.5 {
        return Err(OracleError::StabilityViolated { phase, e_max });
    }

    let wave_numbers: Vec<f64> = (0..n)
        .map(|idx| {
            let m = if idx <= n / 2 {
                idx as f64
            } else {
                idx as f64 - n as f64
            };
            2.0 * std::f64::consts::PI * m / (n as f64 * psi.dx)
        })
        .collect();
    let kinetic_half: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let ke = wave_numbers[idx / n];
            let kp = wave_numbers[idx % n];
            let energy = 0.5
                * HBAR
                * HBAR
                * (ke * ke / (psi.masses[0] * ELECTRON_MASS)
                    + kp * kp / (psi.masses[1] * ELECTRON_MASS));
            Complex64::from_polar(1.0, -energy * dt / (2.0 * HBAR))
        })
        .collect();
    let node = |g: usize| psi.x_min + (g as f64 + 0.5) * psi.dx;
    let potential_full: Result<Vec<Complex64>, PotentialError> = (0..n * n)
        .map(|idx| {
            let v = potential.evaluate(&[node(idx / n), node(idx % n)])?;
            Ok(Complex64::from_polar(1.0, -v * dt / HBAR))
        })
        .collect();
    let potential_full = potential_full?;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let transpose = |a: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>| {
        for i in 0..n {
            for j in 0..n {
                scratch[j * n + i] = a[i * n + j];
            }
        }
        std::mem::swap(a, scratch);
    };
    let fft2 = |a: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>, inverse: bool| {
        let plan = if inverse { &ifft } else { &fft };
        for row in a.chunks_mut(n) {
            plan.process(row);
        }
        transpose(a, scratch);
        for row in a.chunks_mut(n) {
            plan.process(row);
        }
        transpose(a, scratch);
        if inverse {
            let inv = 1.0 / (n * n) as f64;
            a.iter_mut().for_each(|c| *c *= inv);
        }
    };

    let mut amp = psi.amplitudes.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n * n];
    for _ in 0..steps {
        fft2(&mut amp, &mut scratch, false);
        for (a, k) in amp.iter_mut().zip(&kinetic_half) {
            *a *= k;
        }
        fft2(&mut amp, &mut scratch, true);
        for (a, v) in amp.iter_mut().zip(&potential_full) {
            *a *= v;
        }
        fft2(&mut amp, &mut scratch, false);
        for (a, k) in amp.iter_mut().zip(&kinetic_half) {
            *a *= k;
        }
        fft2(&mut amp, &mut scratch, true);
    }

    Ok(WaveFunction2d {
        x_min: psi.x_min,
        dx: psi.dx,
        n,
        masses: psi.masses,
        time: psi.time + dt * steps as f64,
        amplitudes: amp,
    })
}

/// Second-order symmetric splitting: half kinetic, full potential, half
/// kinetic per step. Errors out when the grid's Nyquist kinetic phase per
/// step reaches 0.5 rad.
pub fn split_step_evolve(
    psi: &WaveFunction,
    potential: &PotentialModel,
    dt: f64,
    steps: usize,
) -> Result<WaveFunction, OracleError> {
    let n = psi.len();
    let mass = psi.mass * ELECTRON_MASS;
    let k_nyquist = std::f64::consts::PI / psi.dx;
    let e_max = HBAR * HBAR * k_nyquist * k_nyquist / (2.0 * mass);
    let phase = dt * e_max / HBAR;
    if phase.is_nan() || phase >= 0.5 {
        return Err(OracleError::StabilityViolated { phase, e_max });
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    // e^{-i E_k dt / (2 hbar)} on the FFT lattice
    let kinetic_half: Vec<Complex64> = (0..n)
        .map(|idx| {
            let m = if idx <= n / 2 {
                idx as f64
            } else {
                idx as f64 - n as f64
            };
            let k = 2.0 * std::f64::consts::PI * m / (n as f64 * psi.dx);
            Complex64::from_polar(1.0, -HBAR * k * k * dt / (4.0 * mass))
        })
        .collect();
    let potential_full: Result<Vec<Complex64>, PotentialError> = (0..n)
        .map(|g| {
            let v = potential.evaluate(&[psi.node(g)])?;
            Ok(Complex64::from_polar(1.0, -v * dt / HBAR))
        })
        .collect();
    let potential_full = potential_full?;

    let mut amp = psi.amplitudes.clone();
    let inv_n = 1.0 / n as f64;
    for _ in 0..steps {
        fft.process(&mut amp);
        for (a, k) in amp.iter_mut().zip(&kinetic_half) {
            *a *= k;
        }
        ifft.process(&mut amp);
        for (a, v) in amp.iter_mut().zip(&potential_full) {
            *a *= v * inv_n;
        }
        fft.process(&mut amp);
        for (a, k) in amp.iter_mut().zip(&kinetic_half) {
            *a *= k;
        }
        ifft.process(&mut amp);
        amp.iter_mut().for_each(|a| *a *= inv_n);
    }

    Ok(WaveFunction {
        x_min: psi.x_min,
        dx: psi.dx,
        mass: psi.mass,
        time: psi.time + dt * steps as f64,
        amplitudes: amp,
    })
}

/// Phase-space transform of a pure state onto the engine's cells.
///
/// The wavefunction grid must span the phase-space domain with a node count
/// divisible by `nx`, and the grid's coherence length must equal the domain
/// length so the momentum lattice coincides with the transform's own
/// conjugate lattice; values are averaged over each spatial cell, so
/// comparisons against particle histograms are cell-aligned with no
/// interpolation.
pub fn wigner_transform(
    psi: &WaveFunction,
    grid: &PhaseSpaceGrid,
) -> Result<QuasiDistribution, OracleError> {
    let g_count = psi.len();
    let nx = grid.nx();
    let span = g_count as f64 * psi.dx;
    let tol = 1e-9 * grid.extent().abs().max(1.0);
    if (span - grid.extent()).abs() > tol || (psi.x_min - grid.x_min()).abs() > tol {
        return Err(OracleError::IncompatibleGrids {
            reason: format!(
                "wavefunction covers [{:.6}, {:.6}], grid needs [{:.6}, {:.6}]",
                psi.x_min,
                psi.x_min + span,
                grid.x_min(),
                grid.x_max()
            ),
        });
    }
    if !g_count.is_multiple_of(nx) {
        return Err(OracleError::IncompatibleGrids {
            reason: format!("{g_count} wavefunction nodes are not a multiple of nx = {nx}"),
        });
    }
    if (grid.coherence_length() - grid.extent()).abs() > tol {
        return Err(OracleError::IncompatibleGrids {
            reason: format!(
                "coherence length {} must equal the domain length {} for cell-aligned transforms",
                grid.coherence_length(),
                grid.extent()
            ),
        });
    }
    if grid.m_max() >= g_count / 2 {
        return Err(OracleError::IncompatibleGrids {
            reason: format!(
                "momentum window m_max = {} exceeds the transform lattice ({} modes)",
                grid.m_max(),
                g_count
            ),
        });
    }

    let r = g_count / nx;
    let m_max = grid.m_max();
    let nm = 2 * m_max + 1;
    let fft = FftPlanner::new().plan_fft_forward(g_count);
    let scale = psi.dx / std::f64::consts::PI;

    let mut values = vec![0.0; nx * nm];
    let mut row = vec![Complex64::new(0.0, 0.0); g_count];
    for g in 0..g_count {
        for (idx, slot) in row.iter_mut().enumerate() {
            let j = if idx <= g_count / 2 {
                idx as i64
            } else {
                idx as i64 - g_count as i64
            };
            let a = g as i64 + j;
            let b = g as i64 - j;
            *slot = if a >= 0 && (a as usize) < g_count && b >= 0 && (b as usize) < g_count {
                psi.amplitudes[a as usize] * psi.amplitudes[b as usize].conj()
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft.process(&mut row);
        let cell = g / r;
        for m in -(m_max as i64)..=(m_max as i64) {
            let idx = m.rem_euclid(g_count as i64) as usize;
            values[cell * nm + (m + m_max as i64) as usize] += scale * row[idx].re;
        }
    }
    let inv_r = 1.0 / r as f64;
    values.iter_mut().for_each(|v| *v *= inv_r);

    Ok(QuasiDistribution {
        x_min: grid.x_min(),
        cell_width: grid.cell_width(),
        dk: grid.dk(),
        m_max,
        nx,
        values,
    })
}

/// Normalized error norms between two cell-aligned quasi-distributions.
#[derive(Clone, Copy, Debug)]
pub struct CompareReport {
    /// Integrated absolute difference (2 for disjoint unit masses).
    pub l1: f64,
    /// Peak absolute difference over the peak magnitude of the reference.
    pub linf: f64,
    /// L1 distance of the spatial marginals.
    pub marginal_l1_x: f64,
    /// L1 distance of the momentum marginals.
    pub marginal_l1_k: f64,
}

/// Compares a reconstructed quasi-distribution against a reference on the
/// identical grid; the reference (second argument) normalizes `linf`.
pub fn compare(a: &QuasiDistribution, b: &QuasiDistribution) -> Result<CompareReport, OracleError> {
    let same = a.nx == b.nx
        && a.m_max == b.m_max
        && (a.x_min - b.x_min).abs() <= 1e-9 * a.cell_width
        && (a.cell_width - b.cell_width).abs() <= 1e-12 * a.cell_width
        && (a.dk - b.dk).abs() <= 1e-12 * a.dk;
    if !same {
        return Err(OracleError::GridMismatch {
            reason: format!(
                "({} x {}, w {:.3e}, dk {:.3e}) vs ({} x {}, w {:.3e}, dk {:.3e})",
                a.nx,
                a.n_momenta(),
                a.cell_width,
                a.dk,
                b.nx,
                b.n_momenta(),
                b.cell_width,
                b.dk
            ),
        });
    }
    let area = a.cell_width * a.dk;
    let mut l1 = 0.0;
    let mut peak_diff = 0.0f64;
    let mut peak_ref = 0.0f64;
    for (x, y) in a.values.iter().zip(&b.values) {
        l1 += (x - y).abs() * area;
        peak_diff = peak_diff.max((x - y).abs());
        peak_ref = peak_ref.max(y.abs());
    }
    let ax = a.x_marginal();
    let bx = b.x_marginal();
    let marginal_l1_x: f64 = ax
        .iter()
        .zip(&bx)
        .map(|(x, y)| (x - y).abs() * a.cell_width)
        .sum();
    let ak = a.k_marginal();
    let bk = b.k_marginal();
    let marginal_l1_k: f64 = ak.iter().zip(&bk).map(|(x, y)| (x - y).abs() * a.dk).sum();
    Ok(CompareReport {
        l1,
        linf: if peak_ref > 0.0 {
            peak_diff / peak_ref
        } else {
            peak_diff
        },
        marginal_l1_x,
        marginal_l1_k,
    })
}
