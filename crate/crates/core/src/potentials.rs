//! Potential energy models on one spatial coordinate or on the two-particle
//! configuration space (x_0, x_1).
//!
//! The Gaussian barrier is stored with a positive height H; a barrier of the
//! literature form `V = -U exp(-x^2/2 sigma^2)` with U < 0 maps to H = -U.
//! The pair interaction is a soft-core Coulomb well `-C / sqrt(r^2 + a^2)`
//! in the relative coordinate r = x_0 - x_1.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("potential.{field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error("potential expects {expected} coordinate(s), got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("table {path}: {message}")]
    Table { path: String, message: String },
}

/// Potential energy model (eV as a function of nm coordinates).
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialModel {
    /// Free propagation, V = 0.
    Zero,
    /// `H exp(-(x - center)^2 / (2 sigma^2))`, H > 0.
    GaussianBarrier {
        height: f64,
        sigma: f64,
        center: f64,
    },
    /// `height` on `[left, right]`, zero elsewhere.
    AbruptBarrier { height: f64, left: f64, right: f64 },
    /// Two-body `-coupling / sqrt((x0 - x1)^2 + softening^2)`.
    SoftCoulombPair { coupling: f64, softening: f64 },
    /// Linear interpolation of uniform samples, clamped to edge values.
    Tabulated { x0: f64, dx: f64, values: Vec<f64> },
}

impl PotentialModel {
    pub fn gaussian_barrier(height: f64, sigma: f64, center: f64) -> Result<Self, PotentialError> {
        if !height.is_finite() || height <= 0.0 {
            return Err(PotentialError::Invalid {
                field: "height",
                message: format!("barrier height must be positive, got {height}"),
            });
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(PotentialError::Invalid {
                field: "sigma",
                message: format!("dispersion must be positive, got {sigma}"),
            });
        }
        Ok(Self::GaussianBarrier {
            height,
            sigma,
            center,
        })
    }

    pub fn abrupt_barrier(height: f64, left: f64, right: f64) -> Result<Self, PotentialError> {
        if !(right - left).is_finite() || right <= left {
            return Err(PotentialError::Invalid {
                field: "right",
                message: format!("barrier interval [{left}, {right}] must have positive width"),
            });
        }
        Ok(Self::AbruptBarrier {
            height,
            left,
            right,
        })
    }

    pub fn soft_coulomb_pair(coupling: f64, softening: f64) -> Result<Self, PotentialError> {
        if !softening.is_finite() || softening <= 0.0 {
            return Err(PotentialError::Invalid {
                field: "softening",
                message: format!("softening must be positive, got {softening}"),
            });
        }
        Ok(Self::SoftCoulombPair {
            coupling,
            softening,
        })
    }

    pub fn tabulated(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self, PotentialError> {
        if values.len() < 2 {
            return Err(PotentialError::Invalid {
                field: "table",
                message: format!("need at least 2 samples, got {}", values.len()),
            });
        }
        if !dx.is_finite() || dx <= 0.0 {
            return Err(PotentialError::Invalid {
                field: "table",
                message: format!("sample spacing must be positive, got {dx}"),
            });
        }
        Ok(Self::Tabulated { x0, dx, values })
    }

    /// Load a tabulated potential from two-column text (x in nm, V in eV);
    /// '#' lines are comments, columns split on whitespace or commas.
    pub fn from_table_file(path: &Path) -> Result<Self, PotentialError> {
        let err = |message: String| PotentialError::Table {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(err(format!(
                    "line {}: expected two columns, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let x: f64 = fields[0]
                .parse()
                .map_err(|_| err(format!("line {}: bad x value {:?}", lineno + 1, fields[0])))?;
            let v: f64 = fields[1]
                .parse()
                .map_err(|_| err(format!("line {}: bad V value {:?}", lineno + 1, fields[1])))?;
            xs.push(x);
            vs.push(v);
        }
        if xs.len() < 2 {
            return Err(err(format!("need at least 2 samples, got {}", xs.len())));
        }
        let dx = xs[1] - xs[0];
        if !dx.is_finite() || dx <= 0.0 {
            return Err(err("x samples must be strictly increasing".to_owned()));
        }
        for (i, w) in xs.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dx).abs() > 1e-9 * dx.abs().max(1.0) {
                return Err(err(format!(
                    "non-uniform spacing at sample {}: {} vs {}",
                    i + 1,
                    step,
                    dx
                )));
            }
        }
        Self::tabulated(xs[0], dx, vs)
    }

    /// Number of coordinates the model takes.
    pub fn dimensions(&self) -> usize {
        match self {
            PotentialModel::SoftCoulombPair { .. } => 2,
            _ => 1,
        }
    }

    /// Potential energy (eV) at a spatial point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, PotentialError> {
        let expected = self.dimensions();
        if x.len() != expected {
            return Err(PotentialError::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        Ok(match self {
            PotentialModel::Zero => 0.0,
            PotentialModel::GaussianBarrier {
                height,
                sigma,
                center,
            } => {
                let u = x[0] - center;
                height * (-u * u / (2.0 * sigma * sigma)).exp()
            }
            PotentialModel::AbruptBarrier {
                height,
                left,
                right,
            } => {
                if x[0] >= *left && x[0] <= *right {
                    *height
                } else {
                    0.0
                }
            }
            PotentialModel::SoftCoulombPair {
                coupling,
                softening,
            } => {
                let r = x[0] - x[1];
                -coupling / (r * r + softening * softening).sqrt()
            }
            PotentialModel::Tabulated { x0, dx, values } => {
                let t = (x[0] - x0) / dx;
                if t <= 0.0 {
                    values[0]
                } else if t >= (values.len() - 1) as f64 {
                    *values.last().unwrap()
                } else {
                    let i = t.floor() as usize;
                    let f = t - i as f64;
                    values[i] * (1.0 - f) + values[i + 1] * f
                }
            }
        })
    }

    /// Single-coordinate evaluation without the slice plumbing; panics on
    /// two-body models (callers gate on `dimensions`).
    pub fn evaluate_1d(&self, x: f64) -> f64 {
        self.evaluate(&[x])
            .expect("evaluate_1d requires a single-coordinate model")
    }

    /// The reduced 1D form `V(r)`, `r = x_0 - x_1`, when the model depends
    /// only on the relative coordinate.
    pub fn relative_coordinate_form(&self) -> Option<ReducedPotential> {
        match self {
            PotentialModel::Zero => Some(ReducedPotential::Zero),
            PotentialModel::SoftCoulombPair {
                coupling,
                softening,
            } => Some(ReducedPotential::SoftCoulomb {
                coupling: *coupling,
                softening: *softening,
            }),
            _ => None,
        }
    }
}

/// 1D potential over the relative coordinate of a reducible pair model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReducedPotential {
    Zero,
    SoftCoulomb { coupling: f64, softening: f64 },
}

impl ReducedPotential {
    pub fn evaluate(&self, r: f64) -> f64 {
        match self {
            ReducedPotential::Zero => 0.0,
            ReducedPotential::SoftCoulomb {
                coupling,
                softening,
            } => -coupling / (r * r + softening * softening).sqrt(),
        }
    }
}
