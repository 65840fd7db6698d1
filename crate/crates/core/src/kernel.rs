//! The creation kernel: discrete transforms of the potential difference,
//! creation rates, per-node sampling distributions and the related
//! diagnostics (partial sums, symmetry checks, the classical-limit scan).
//!
//! The kernel value stored here is the rate density per unit wave-number,
//!
//! ```text
//! W(x; q) = -1/(pi hbar) * integral ds sin(2 q s) [V(x+s) - V(x-s)]
//! ```
//!
//! in nm/fs, so that the creation rate is the lattice sum
//! `gamma(x) = dk * sum_M W^+(x; M dk)` in 1/fs. This normalization makes the
//! free-streaming term and the creation term consistent with wavefunction
//! dynamics (it reduces to the Liouville force term for slowly varying
//! potentials); literature forms that differ by a constant factor only
//! rescale the same shape. The integral window is the coherence length,
//! `s in [-L_C/2, +L_C/2]`, the conjugate lattice of the momentum quantum
//! `dk = pi / L_C`.

use rayon::prelude::*;
use thiserror::Error;

use crate::constants::HBAR;
use crate::phase_space::PhaseSpaceGrid;
use crate::potentials::{PotentialModel, ReducedPotential};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("potential is not finite at x = {x} (node {node})")]
    NonFinitePotential { x: f64, node: usize },
    #[error("kernel transform left a cosine residue of {residual:e} (limit {limit:e})")]
    ResidueTooLarge { residual: f64, limit: f64 },
    #[error("potential has {dims} coordinates; expected a single-coordinate model")]
    NotSingleBody { dims: usize },
    #[error("potential does not reduce to a relative coordinate")]
    NotReducible,
}

/// Which configuration space a kernel table lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSpace {
    /// Nodes are laboratory positions of a single particle.
    SingleBody,
    /// Nodes are relative coordinates r = x_0 - x_1 of a pair; sampled
    /// offsets apply with opposite signs to the two momentum coordinates.
    TwoBodyRelative,
}

/// Precomputed kernel table: values W(x_i; M dk), creation rates gamma(x_i)
/// and per-node cumulative sampling distributions over the momentum lattice.
///
/// Nodes are the `nx + 1` cell-edge positions of the grid, so symmetric
/// domains carry a node exactly at the center.
#[derive(Clone, Debug)]
pub struct WignerKernelTable {
    space: KernelSpace,
    x0: f64,
    dx: f64,
    n_nodes: usize,
    dk: f64,
    m_max: usize,
    /// Node-major values over the lattice index l = M + m_max.
    values: Vec<f64>,
    /// Creation rate per node (1/fs).
    gamma: Vec<f64>,
    /// Node-major cumulative distribution over the lattice; all zero where
    /// gamma vanishes.
    cdf: Vec<f64>,
    max_abs: f64,
    max_residual: f64,
}

impl WignerKernelTable {
    pub fn space(&self) -> KernelSpace {
        self.space
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn n_momenta(&self) -> usize {
        2 * self.m_max + 1
    }

    pub fn node_position(&self, node: usize) -> f64 {
        self.x0 + node as f64 * self.dx
    }

    /// Nearest node of an in-range coordinate.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let t = (x - self.x0) / self.dx;
        let i = t.round();
        if i < 0.0 || i > (self.n_nodes - 1) as f64 {
            return None;
        }
        Some(i as usize)
    }

    pub fn value(&self, node: usize, m: i32) -> f64 {
        self.values[node * self.n_momenta() + (m + self.m_max as i32) as usize]
    }

    pub fn gamma(&self, node: usize) -> f64 {
        self.gamma[node]
    }

    /// Creation rate at a coordinate, through the nearest node.
    pub fn gamma_at(&self, x: f64) -> Option<f64> {
        self.node_index(x).map(|i| self.gamma[i])
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// Largest cosine residue of the transform relative to the table's
    /// maximum magnitude. The integrand's even part must vanish.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Momentum offset (1/nm) drawn from the node's normalized positive-part
    /// distribution; `u` is a uniform variate in [0, 1).
    pub fn sample_offset(&self, node: usize, u: f64) -> f64 {
        let nm = self.n_momenta();
        let cdf = &self.cdf[node * nm..(node + 1) * nm];
        let l = cdf.partition_point(|&c| c <= u).min(nm - 1);
        (l as i32 - self.m_max as i32) as f64 * self.dk
    }

    pub fn cdf_slice(&self, node: usize) -> &[f64] {
        let nm = self.n_momenta();
        &self.cdf[node * nm..(node + 1) * nm]
    }

    pub fn node_positions(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node_position(i)).collect()
    }

    pub fn momentum_lattice(&self) -> Vec<f64> {
        let m = self.m_max as i64;
        (-m..=m).map(|i| i as f64 * self.dk).collect()
    }
}

/// Gaussian-barrier kernel in closed form:
/// `2 sqrt(2 pi) H sigma / (pi hbar) * exp(-2 (sigma k)^2) * sin(2 x k)`,
/// odd in both x and k. `k` is the offset wave-number (1/nm).
pub fn kernel_gaussian_analytic(x: f64, k: f64, height: f64, sigma: f64) -> f64 {
    let prefactor =
        2.0 * (2.0 * std::f64::consts::PI).sqrt() * height * sigma / (std::f64::consts::PI * HBAR);
    prefactor * (-2.0 * sigma * sigma * k * k).exp() * (2.0 * x * k).sin()
}

/// Partial sum of the Gaussian-barrier creation-rate series in the
/// literature normalization `4 sqrt(2 pi) H sigma`, with the momentum step
/// expressed as a wave-number `eps_k` (1/nm):
///
/// ```text
/// S_M(x) = 4 sqrt(2 pi) H sigma * sum_{m=1..M} exp(-2 sigma^2 (m eps_k)^2) |sin(2 x m eps_k)|
/// ```
///
/// The m = 0 term vanishes. Non-decreasing in `m_terms`; `eps_k * S_M`
/// approaches the half-line quadrature of the positive kernel part.
pub fn gamma_series_partial(x: f64, height: f64, sigma: f64, eps_k: f64, m_terms: usize) -> f64 {
    let prefactor = 4.0 * (2.0 * std::f64::consts::PI).sqrt() * height * sigma;
    let mut sum = 0.0;
    for m in 1..=m_terms {
        let k = m as f64 * eps_k;
        sum += (-2.0 * sigma * sigma * k * k).exp() * (2.0 * x * k).sin().abs();
    }
    prefactor * sum
}

/// Upper bound on a normalized series term, `exp(-2 m^2 eps_k^2 sigma^2)`.
pub fn gamma_series_term_bound(sigma: f64, eps_k: f64, m: usize) -> f64 {
    let k = m as f64 * eps_k;
    (-2.0 * sigma * sigma * k * k).exp()
}

// ---------------------------------------------------------------------------
// numeric transform
// ---------------------------------------------------------------------------

/// Default quadrature resolution: at least this many sample points per
/// oscillation period of the fastest lattice mode, and never fewer than
/// `MIN_QUAD_POINTS` over the window.
const POINTS_PER_PERIOD: usize = 16;
const MIN_QUAD_POINTS: usize = 4096;
const RESIDUE_LIMIT: f64 = 1e-10;

fn default_quad_points(m_max: usize) -> usize {
    (POINTS_PER_PERIOD * m_max).max(MIN_QUAD_POINTS)
}

/// Bitwise-symmetric midpoint nodes of `[-w, +w]`; `n` is even.
fn symmetric_midpoints(w: f64, n: usize) -> Vec<f64> {
    let half = n / 2;
    let h = w / half as f64;
    let mut s = vec![0.0; n];
    for i in 0..half {
        let v = (i as f64 + 0.5) * h;
        s[half + i] = v;
        s[half - 1 - i] = -v;
    }
    s
}

struct NodeRow {
    values: Vec<f64>,
    gamma: f64,
    cdf: Vec<f64>,
    max_abs: f64,
    max_cos: f64,
}

/// Transform one node: fills the lattice row, the rate and the sampling CDF.
#[allow(clippy::too_many_arguments)]
fn transform_node<F: Fn(f64) -> f64>(
    v: &F,
    x: f64,
    node: usize,
    s: &[f64],
    h: f64,
    sin_t: &[Vec<f64>],
    cos_t: &[Vec<f64>],
    dk: f64,
    m_max: usize,
) -> Result<NodeRow, KernelError> {
    let n_momenta = 2 * m_max + 1;
    let mut d = vec![0.0; s.len()];
    for (j, &sj) in s.iter().enumerate() {
        let plus = v(x + sj);
        let minus = v(x - sj);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(KernelError::NonFinitePotential {
                x: if plus.is_finite() { x - sj } else { x + sj },
                node,
            });
        }
        d[j] = plus - minus;
    }

    let scale = -h / (std::f64::consts::PI * HBAR);
    let mut values = vec![0.0; n_momenta];
    let mut max_abs = 0.0f64;
    let mut max_cos = 0.0f64;
    for m in 1..=m_max {
        let (st, ct) = (&sin_t[m], &cos_t[m]);
        let mut sin_sum = 0.0;
        let mut cos_sum = 0.0;
        for j in 0..d.len() {
            sin_sum += st[j] * d[j];
            cos_sum += ct[j] * d[j];
        }
        let w = scale * sin_sum;
        values[m_max + m] = w;
        values[m_max - m] = -w;
        max_abs = max_abs.max(w.abs());
        max_cos = max_cos.max((scale * cos_sum).abs());
    }

    let mut gamma = 0.0;
    let mut cdf = vec![0.0; n_momenta];
    let mut running = 0.0;
    for l in 0..n_momenta {
        running += values[l].max(0.0);
        cdf[l] = running;
    }
    if running > 0.0 {
        gamma = dk * running;
        for c in cdf.iter_mut() {
            *c /= running;
        }
    } else {
        cdf.iter_mut().for_each(|c| *c = 0.0);
    }

    Ok(NodeRow {
        values,
        gamma,
        cdf,
        max_abs,
        max_cos,
    })
}

fn build_tables(dk: f64, m_max: usize, s: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    // Mirrored halves keep sin odd and cos even bitwise, which makes the
    // cosine residue cancel exactly for symmetric windows.
    let half = s.len() / 2;
    let mut sin_t = vec![vec![0.0; s.len()]; m_max + 1];
    let mut cos_t = vec![vec![0.0; s.len()]; m_max + 1];
    for m in 1..=m_max {
        let q = m as f64 * dk;
        for i in 0..half {
            let arg = 2.0 * q * s[half + i];
            let (sv, cv) = arg.sin_cos();
            sin_t[m][half + i] = sv;
            sin_t[m][half - 1 - i] = -sv;
            cos_t[m][half + i] = cv;
            cos_t[m][half - 1 - i] = cv;
        }
    }
    (sin_t, cos_t)
}

#[allow(clippy::too_many_arguments)]
fn build_table<F: Fn(f64) -> f64 + Sync>(
    v: &F,
    x0: f64,
    dx: f64,
    n_nodes: usize,
    dk: f64,
    m_max: usize,
    coherence_length: f64,
    quad_points: usize,
    space: KernelSpace,
) -> Result<WignerKernelTable, KernelError> {
    let n = quad_points + quad_points % 2;
    let s = symmetric_midpoints(0.5 * coherence_length, n);
    let h = coherence_length / n as f64;
    let (sin_t, cos_t) = build_tables(dk, m_max, &s);

    let rows: Result<Vec<NodeRow>, KernelError> = (0..n_nodes)
        .into_par_iter()
        .map(|i| {
            let x = x0 + i as f64 * dx;
            transform_node(v, x, i, &s, h, &sin_t, &cos_t, dk, m_max)
        })
        .collect();
    let rows = rows?;

    let n_momenta = 2 * m_max + 1;
    let mut values = Vec::with_capacity(n_nodes * n_momenta);
    let mut gamma = Vec::with_capacity(n_nodes);
    let mut cdf = Vec::with_capacity(n_nodes * n_momenta);
    let mut max_abs = 0.0f64;
    let mut max_cos = 0.0f64;
    for row in rows {
        values.extend_from_slice(&row.values);
        cdf.extend_from_slice(&row.cdf);
        gamma.push(row.gamma);
        max_abs = max_abs.max(row.max_abs);
        max_cos = max_cos.max(row.max_cos);
    }
    let max_residual = if max_abs > 0.0 {
        max_cos / max_abs
    } else {
        0.0
    };
    if max_residual > RESIDUE_LIMIT {
        return Err(KernelError::ResidueTooLarge {
            residual: max_residual,
            limit: RESIDUE_LIMIT,
        });
    }

    Ok(WignerKernelTable {
        space,
        x0,
        dx,
        n_nodes,
        dk,
        m_max,
        values,
        gamma,
        cdf,
        max_abs,
        max_residual,
    })
}

/// Numeric single-body kernel table over the grid's node lattice.
pub fn kernel_numeric(
    potential: &PotentialModel,
    grid: &PhaseSpaceGrid,
) -> Result<WignerKernelTable, KernelError> {
    kernel_numeric_with(potential, grid, default_quad_points(grid.m_max()))
}

/// Like [`kernel_numeric`] with an explicit quadrature resolution.
pub fn kernel_numeric_with(
    potential: &PotentialModel,
    grid: &PhaseSpaceGrid,
    quad_points: usize,
) -> Result<WignerKernelTable, KernelError> {
    if potential.dimensions() != 1 {
        return Err(KernelError::NotSingleBody {
            dims: potential.dimensions(),
        });
    }
    let v = |x: f64| potential.evaluate_1d(x);
    build_table(
        &v,
        grid.x_min(),
        grid.cell_width(),
        grid.nx() + 1,
        grid.dk(),
        grid.m_max(),
        grid.coherence_length(),
        quad_points,
        KernelSpace::SingleBody,
    )
}

/// Two-body kernel for a pair potential that depends only on the relative
/// coordinate. The center-of-mass transform constrains created offsets to
/// opposite pairs (q, -q), so the table is one-dimensional in r = x_0 - x_1
/// and shares the per-coordinate momentum lattice.
pub fn kernel_two_body(
    reduced: &ReducedPotential,
    grid: &PhaseSpaceGrid,
) -> Result<WignerKernelTable, KernelError> {
    kernel_two_body_with(reduced, grid, default_quad_points(grid.m_max()))
}

/// Like [`kernel_two_body`] with an explicit quadrature resolution.
pub fn kernel_two_body_with(
    reduced: &ReducedPotential,
    grid: &PhaseSpaceGrid,
    quad_points: usize,
) -> Result<WignerKernelTable, KernelError> {
    let rel = grid.relative();
    let v = |r: f64| reduced.evaluate(r);
    build_table(
        &v,
        rel.x_min(),
        rel.cell_width(),
        rel.nx() + 1,
        rel.dk(),
        rel.m_max(),
        rel.coherence_length(),
        quad_points,
        KernelSpace::TwoBodyRelative,
    )
}

/// Convenience: the creation table for a potential, choosing the single-body
/// transform or the relative-coordinate reduction by dimensionality.
pub fn creation_table(
    potential: &PotentialModel,
    grid: &PhaseSpaceGrid,
) -> Result<WignerKernelTable, KernelError> {
    if potential.dimensions() == 1 {
        kernel_numeric(potential, grid)
    } else {
        let reduced = potential
            .relative_coordinate_form()
            .ok_or(KernelError::NotReducible)?;
        kernel_two_body(&reduced, grid)
    }
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

/// Residuals of the rate-function symmetries for a symmetric potential
/// centered at the domain midpoint: gamma(x) = gamma(-x) and gamma(0) = 0.
#[derive(Clone, Copy, Debug)]
pub struct GammaPropertyReport {
    /// |gamma(center node)| / max gamma.
    pub center_residual: f64,
    /// max |gamma(x) - gamma(-x)| / max gamma over node pairs.
    pub symmetry_residual: f64,
    pub max_gamma: f64,
}

/// Checks the center and mirror symmetries of a table's rate profile. Exact
/// center residuals need an odd node count (a node at the midpoint), which
/// every even-`nx` grid provides.
pub fn gamma_properties_check(table: &WignerKernelTable) -> GammaPropertyReport {
    let n = table.n_nodes();
    let max_gamma = table.gamma_max();
    if max_gamma == 0.0 {
        return GammaPropertyReport {
            center_residual: 0.0,
            symmetry_residual: 0.0,
            max_gamma,
        };
    }
    let center = table
        .node_index(0.5 * (table.node_position(0) + table.node_position(n - 1)))
        .expect("midpoint is inside the node range");
    let center_residual = table.gamma(center).abs() / max_gamma;
    let mut symmetry = 0.0f64;
    for i in 0..n {
        symmetry = symmetry.max((table.gamma(i) - table.gamma(n - 1 - i)).abs());
    }
    GammaPropertyReport {
        center_residual,
        symmetry_residual: symmetry / max_gamma,
        max_gamma,
    }
}

/// Maximum creation rate per scale factor when hbar is replaced by
/// `lambda * hbar` at a fixed momentum lattice `{M * momentum_step}`.
///
/// Holding the momentum quantum fixed while shrinking hbar pushes every
/// lattice mode to the wave-number `M * momentum_step / lambda`, where a
/// smooth potential has no spectral content left, so every M >= 1 term dies
/// and the rate collapses: creation is forbidden in the classical limit.
///
/// The lattice step is passed separately from the grid: the scan transform
/// must integrate over a window that contains the potential as seen from
/// every node (`grid.coherence_length()` sets that window), while the step
/// controls where the scaled lattice samples the spectrum. The quadrature
/// resolution follows the scaled wave-numbers.
pub fn classical_limit_scan(
    potential: &PotentialModel,
    grid: &PhaseSpaceGrid,
    momentum_step: f64,
    scales: &[f64],
) -> Result<Vec<f64>, KernelError> {
    if potential.dimensions() != 1 {
        return Err(KernelError::NotSingleBody {
            dims: potential.dimensions(),
        });
    }
    assert!(momentum_step > 0.0, "momentum step must be positive");
    let v = |x: f64| potential.evaluate_1d(x);
    let m_max = grid.m_max();
    let n_nodes = grid.nx() + 1;
    let window = 0.5 * grid.coherence_length();

    let mut out = Vec::with_capacity(scales.len());
    for &lambda in scales {
        assert!(
            lambda > 0.0 && lambda <= 1.0,
            "scale factors must lie in (0, 1]"
        );
        // resolve the fastest scaled mode over the window
        let q_max = m_max as f64 * momentum_step / lambda;
        let periods = 2.0 * window * q_max / std::f64::consts::PI;
        let n = ((periods * POINTS_PER_PERIOD as f64).ceil() as usize).max(MIN_QUAD_POINTS);
        let n = n + n % 2;
        let s = symmetric_midpoints(window, n);
        let h = 2.0 * window / n as f64;
        // lattice wave-numbers M dk / lambda; one 1/lambda from the kernel
        // prefactor and one from the lattice weight dp/(lambda hbar)
        let (sin_t, _cos_t) = build_tables(momentum_step / lambda, m_max, &s);
        let scale = h / (std::f64::consts::PI * lambda * HBAR);
        let weight = momentum_step / lambda;

        let max_gamma = (0..n_nodes)
            .into_par_iter()
            .map(|i| {
                let x = grid.x_min() + i as f64 * grid.cell_width();
                let mut d = vec![0.0; s.len()];
                for (j, &sj) in s.iter().enumerate() {
                    d[j] = v(x + sj) - v(x - sj);
                }
                let mut rate = 0.0;
                for st in &sin_t[1..=m_max] {
                    let mut sum = 0.0;
                    for j in 0..d.len() {
                        sum += st[j] * d[j];
                    }
                    let w = -scale * sum;
                    // both signs of the odd kernel contribute one positive part
                    rate += w.abs();
                }
                rate * weight
            })
            .reduce(|| 0.0, f64::max);
        out.push(max_gamma);
    }
    Ok(out)
}
