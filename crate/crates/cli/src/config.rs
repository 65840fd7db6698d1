//! Layered run configuration: preset defaults, then an optional config
//! file, then command-line overrides. Line-oriented `key = value` syntax
//! with dotted section paths; unknown keys are rejected and every invalid
//! value is reported with its key path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected 'key = value', got {text:?}")]
    Syntax {
        path: String,
        line: usize,
        text: String,
    },
    #[error("unknown key {key:?}")]
    UnknownKey { key: String },
    #[error("{key}: expected {expected}, got {got:?}")]
    BadValue {
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("{key}: {message}")]
    Constraint { key: String, message: String },
    #[error("unknown scenario {got:?} (known: {known})")]
    UnknownScenario { got: String, known: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    FreePacket,
    GaussianBarrier,
    AbruptBarrier,
    Hydrogen1d,
    KernelReport,
    ClassicalLimit,
    Custom,
}

impl Scenario {
    pub const ALL: [(&'static str, Scenario); 7] = [
        ("free_packet", Scenario::FreePacket),
        ("gaussian_barrier", Scenario::GaussianBarrier),
        ("abrupt_barrier", Scenario::AbruptBarrier),
        ("hydrogen_1d", Scenario::Hydrogen1d),
        ("kernel_report", Scenario::KernelReport),
        ("classical_limit", Scenario::ClassicalLimit),
        ("custom", Scenario::Custom),
    ];

    pub fn parse(name: &str) -> Result<Scenario, ConfigError> {
        Self::ALL
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| *s)
            .ok_or_else(|| ConfigError::UnknownScenario {
                got: name.to_owned(),
                known: Self::ALL
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }

    pub fn name(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(_, s)| *s == self)
            .map(|(n, _)| *n)
            .unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    Zero,
    GaussianBarrier,
    AbruptBarrier,
    SoftCoulomb,
    Tabulated,
}

impl PotentialKind {
    fn parse(name: &str, key: &str) -> Result<Self, ConfigError> {
        match name {
            "zero" => Ok(Self::Zero),
            "gaussian_barrier" => Ok(Self::GaussianBarrier),
            "abrupt_barrier" => Ok(Self::AbruptBarrier),
            "soft_coulomb" => Ok(Self::SoftCoulomb),
            "tabulated" => Ok(Self::Tabulated),
            _ => Err(ConfigError::BadValue {
                key: key.to_owned(),
                expected: "zero | gaussian_barrier | abrupt_barrier | soft_coulomb | tabulated",
                got: name.to_owned(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::GaussianBarrier => "gaussian_barrier",
            Self::AbruptBarrier => "abrupt_barrier",
            Self::SoftCoulomb => "soft_coulomb",
            Self::Tabulated => "tabulated",
        }
    }
}

/// Fully resolved run configuration. Every field carries the value after
/// preset, file and command-line layering.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub domain_min: f64,
    pub domain_max: f64,
    pub nx: usize,
    pub coherence_length: f64,
    pub m_max: usize,
    pub potential_kind: PotentialKind,
    pub height_ev: f64,
    pub sigma_nm: f64,
    pub center_nm: f64,
    pub left_nm: f64,
    pub right_nm: f64,
    pub coupling_evnm: f64,
    pub softening_nm: f64,
    pub table_path: String,
    pub packet_center: f64,
    pub packet_sigma: f64,
    pub packet_k0: f64,
    pub packet2_center: f64,
    pub packet2_sigma: f64,
    pub packet2_k0: f64,
    pub dt: f64,
    pub total_time: f64,
    pub annihilation_period: usize,
    pub snapshot_period: usize,
    pub n0: usize,
    pub seed: u64,
    pub workers: usize,
    pub particle_cap: usize,
    pub record_particles: bool,
    pub scan_momentum_step: f64,
    pub scan_scales: Vec<f64>,
    pub series_eps: f64,
    pub oracle_enabled: bool,
    pub oracle_points: usize,
    pub oracle_dt: f64,
    pub output_dir: String,
}

impl RunConfig {
    /// Preset defaults per scenario.
    pub fn preset(scenario: Scenario) -> RunConfig {
        let mut c = RunConfig {
            scenario,
            domain_min: -30.0,
            domain_max: 30.0,
            nx: 256,
            coherence_length: 60.0,
            m_max: 128,
            potential_kind: PotentialKind::Zero,
            height_ev: 0.3,
            sigma_nm: 1.0,
            center_nm: 0.0,
            left_nm: -3.0,
            right_nm: 3.0,
            coupling_evnm: 1.43996,
            softening_nm: 0.01,
            table_path: String::new(),
            packet_center: -10.0,
            packet_sigma: 2.0,
            packet_k0: 1.5,
            packet2_center: 0.0,
            packet2_sigma: 0.002,
            packet2_k0: 0.0,
            dt: 0.1,
            total_time: 20.0,
            annihilation_period: 20,
            snapshot_period: 50,
            n0: 100_000,
            seed: 1,
            workers: 0,
            particle_cap: 50_000_000,
            record_particles: false,
            scan_momentum_step: 0.34,
            scan_scales: vec![1.0, 0.3, 0.1, 0.03, 0.01],
            series_eps: 0.05,
            oracle_enabled: false,
            oracle_points: 2048,
            oracle_dt: 5e-4,
            output_dir: "out".to_owned(),
        };
        match scenario {
            Scenario::FreePacket => {
                c.packet_center = 0.0;
                c.packet_k0 = 0.0;
                c.total_time = 10.0;
            }
            Scenario::GaussianBarrier => {
                c.potential_kind = PotentialKind::GaussianBarrier;
                c.packet_center = -8.0;
                c.packet_sigma = 1.5;
                c.packet_k0 = 1.5;
            }
            Scenario::AbruptBarrier => {
                c.potential_kind = PotentialKind::AbruptBarrier;
                c.height_ev = 0.10;
                c.packet_center = -8.0;
                c.packet_sigma = 1.5;
                c.packet_k0 = 1.5;
            }
            Scenario::Hydrogen1d => {
                c.potential_kind = PotentialKind::SoftCoulomb;
                c.domain_min = -0.5;
                c.domain_max = 0.5;
                c.nx = 128;
                c.coherence_length = 1.0;
                c.m_max = 96;
                c.packet_center = 0.0;
                c.packet_sigma = 0.05;
                c.packet_k0 = 0.0;
                c.packet2_center = 0.0;
                c.packet2_sigma = 0.002;
                c.packet2_k0 = 0.0;
                c.dt = 1e-4;
                c.total_time = 6e-3; // 6 as
                c.annihilation_period = 10;
                c.snapshot_period = 30;
                c.n0 = 100_000;
            }
            Scenario::KernelReport => {
                c.potential_kind = PotentialKind::GaussianBarrier;
                c.domain_min = -20.0;
                c.domain_max = 20.0;
                c.coherence_length = 80.0;
                c.nx = 255;
            }
            Scenario::ClassicalLimit => {
                c.potential_kind = PotentialKind::GaussianBarrier;
                c.domain_min = -6.0;
                c.domain_max = 6.0;
                c.nx = 48;
                c.coherence_length = 36.0;
                c.m_max = 64;
            }
            Scenario::Custom => {}
        }
        c
    }

    /// Applies one `key = value` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(
            key: &str,
            value: &str,
            expected: &'static str,
        ) -> Result<T, ConfigError> {
            value.trim().parse().map_err(|_| ConfigError::BadValue {
                key: key.to_owned(),
                expected,
                got: value.to_owned(),
            })
        }
        let f = |v: &str| num::<f64>(key, v, "a number");
        let u = |v: &str| num::<usize>(key, v, "a non-negative integer");
        match key {
            "scenario" => self.scenario = Scenario::parse(value.trim())?,
            "domain.min_nm" => self.domain_min = f(value)?,
            "domain.max_nm" => self.domain_max = f(value)?,
            "grid.nx" => self.nx = u(value)?,
            "grid.coherence_length_nm" => self.coherence_length = f(value)?,
            "grid.m_max" => self.m_max = u(value)?,
            "potential.kind" => self.potential_kind = PotentialKind::parse(value.trim(), key)?,
            "potential.height_ev" => self.height_ev = f(value)?,
            "potential.sigma_nm" => self.sigma_nm = f(value)?,
            "potential.center_nm" => self.center_nm = f(value)?,
            "potential.left_nm" => self.left_nm = f(value)?,
            "potential.right_nm" => self.right_nm = f(value)?,
            "potential.coupling_evnm" => self.coupling_evnm = f(value)?,
            "potential.softening_nm" => self.softening_nm = f(value)?,
            "potential.table_path" => self.table_path = value.trim().to_owned(),
            "packet.center_nm" => self.packet_center = f(value)?,
            "packet.sigma_nm" => self.packet_sigma = f(value)?,
            "packet.k0_invnm" => self.packet_k0 = f(value)?,
            "packet2.center_nm" => self.packet2_center = f(value)?,
            "packet2.sigma_nm" => self.packet2_sigma = f(value)?,
            "packet2.k0_invnm" => self.packet2_k0 = f(value)?,
            "time.dt_fs" => self.dt = f(value)?,
            "time.total_fs" => self.total_time = f(value)?,
            "time.annihilation_period" => self.annihilation_period = u(value)?,
            "time.snapshot_period" => self.snapshot_period = u(value)?,
            "run.n0" => self.n0 = u(value)?,
            "run.seed" => self.seed = num::<u64>(key, value, "a 64-bit integer")?,
            "run.workers" => self.workers = u(value)?,
            "run.particle_cap" => self.particle_cap = u(value)?,
            "run.record_particles" => {
                self.record_particles = match value.trim() {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_owned(),
                            expected: "true | false",
                            got: value.to_owned(),
                        })
                    }
                }
            }
            "scan.momentum_step_invnm" => self.scan_momentum_step = f(value)?,
            "scan.scales" => {
                let scales: Result<Vec<f64>, _> = value
                    .split(',')
                    .map(|s| num::<f64>(key, s, "comma-separated numbers"))
                    .collect();
                self.scan_scales = scales?;
            }
            "series.eps_invnm" => self.series_eps = f(value)?,
            "oracle.enabled" => {
                self.oracle_enabled = match value.trim() {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_owned(),
                            expected: "true | false",
                            got: value.to_owned(),
                        })
                    }
                }
            }
            "oracle.points" => self.oracle_points = u(value)?,
            "oracle.dt_fs" => self.oracle_dt = f(value)?,
            "output.dir" => self.output_dir = value.trim().to_owned(),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_owned(),
                })
            }
        }
        Ok(())
    }

    /// Constraint checks that name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, message: String| -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Constraint {
                    key: key.to_owned(),
                    message,
                })
            }
        };
        check(
            self.domain_max > self.domain_min,
            "domain.max_nm",
            format!(
                "domain [{}, {}] must have positive length",
                self.domain_min, self.domain_max
            ),
        )?;
        check(self.nx >= 2, "grid.nx", "need at least 2 cells".into())?;
        check(
            self.coherence_length > 0.0,
            "grid.coherence_length_nm",
            "must be positive".into(),
        )?;
        check(self.m_max >= 1, "grid.m_max", "must be at least 1".into())?;
        check(
            self.dt > 0.0 && self.dt.is_finite(),
            "time.dt_fs",
            "dt must be positive".into(),
        )?;
        check(
            self.total_time > 0.0,
            "time.total_fs",
            "must be positive".into(),
        )?;
        check(
            self.annihilation_period >= 1,
            "time.annihilation_period",
            "must be at least 1".into(),
        )?;
        check(
            self.snapshot_period >= 1,
            "time.snapshot_period",
            "must be at least 1".into(),
        )?;
        check(self.n0 >= 1, "run.n0", "need at least one particle".into())?;
        check(
            self.particle_cap >= self.n0,
            "run.particle_cap",
            "cap below the initial count".into(),
        )?;
        check(
            self.packet_sigma > 0.0,
            "packet.sigma_nm",
            "must be positive".into(),
        )?;
        check(
            self.packet2_sigma > 0.0,
            "packet2.sigma_nm",
            "must be positive".into(),
        )?;
        check(
            self.scan_momentum_step > 0.0,
            "scan.momentum_step_invnm",
            "must be positive".into(),
        )?;
        check(
            !self.scan_scales.is_empty() && self.scan_scales.iter().all(|&l| l > 0.0 && l <= 1.0),
            "scan.scales",
            "scales must lie in (0, 1]".into(),
        )?;
        check(
            self.series_eps > 0.0,
            "series.eps_invnm",
            "must be positive".into(),
        )?;
        check(
            !self.oracle_enabled
                || (self.oracle_points >= 2 && self.oracle_points.is_multiple_of(self.nx)),
            "oracle.points",
            format!(
                "must be a positive multiple of grid.nx = {} (got {})",
                self.nx, self.oracle_points
            ),
        )?;
        check(
            self.oracle_dt > 0.0,
            "oracle.dt_fs",
            "must be positive".into(),
        )?;
        if self.potential_kind == PotentialKind::Tabulated {
            check(
                !self.table_path.is_empty(),
                "potential.table_path",
                "tabulated potential needs a file path".into(),
            )?;
        }
        Ok(())
    }

    /// The full resolved key set, echoable and re-parseable.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("scenario", self.scenario.name().to_owned());
        put("domain.min_nm", self.domain_min.to_string());
        put("domain.max_nm", self.domain_max.to_string());
        put("grid.nx", self.nx.to_string());
        put(
            "grid.coherence_length_nm",
            self.coherence_length.to_string(),
        );
        put("grid.m_max", self.m_max.to_string());
        put("potential.kind", self.potential_kind.name().to_owned());
        put("potential.height_ev", self.height_ev.to_string());
        put("potential.sigma_nm", self.sigma_nm.to_string());
        put("potential.center_nm", self.center_nm.to_string());
        put("potential.left_nm", self.left_nm.to_string());
        put("potential.right_nm", self.right_nm.to_string());
        put("potential.coupling_evnm", self.coupling_evnm.to_string());
        put("potential.softening_nm", self.softening_nm.to_string());
        if !self.table_path.is_empty() {
            put("potential.table_path", self.table_path.clone());
        }
        put("packet.center_nm", self.packet_center.to_string());
        put("packet.sigma_nm", self.packet_sigma.to_string());
        put("packet.k0_invnm", self.packet_k0.to_string());
        put("packet2.center_nm", self.packet2_center.to_string());
        put("packet2.sigma_nm", self.packet2_sigma.to_string());
        put("packet2.k0_invnm", self.packet2_k0.to_string());
        put("time.dt_fs", self.dt.to_string());
        put("time.total_fs", self.total_time.to_string());
        put(
            "time.annihilation_period",
            self.annihilation_period.to_string(),
        );
        put("time.snapshot_period", self.snapshot_period.to_string());
        put("run.n0", self.n0.to_string());
        put("run.seed", self.seed.to_string());
        put("run.workers", self.workers.to_string());
        put("run.particle_cap", self.particle_cap.to_string());
        put("run.record_particles", self.record_particles.to_string());
        put(
            "scan.momentum_step_invnm",
            self.scan_momentum_step.to_string(),
        );
        put(
            "scan.scales",
            self.scan_scales
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("series.eps_invnm", self.series_eps.to_string());
        put("oracle.enabled", self.oracle_enabled.to_string());
        put("oracle.points", self.oracle_points.to_string());
        put("oracle.dt_fs", self.oracle_dt.to_string());
        put("output.dir", self.output_dir.clone());
        s
    }
}

/// Parses `key = value` lines; '#' starts a comment.
pub fn parse_entries(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                path: path.display().to_string(),
                line: lineno + 1,
                text: raw.to_owned(),
            });
        };
        entries.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    Ok(entries)
}

/// Layered resolution: scenario (from --preset, else from the file), preset
/// defaults, file entries, then --set overrides in order.
pub fn resolve(
    preset: Option<&str>,
    file: Option<&Path>,
    sets: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let file_entries = match file {
        Some(path) => parse_entries(path)?,
        None => Vec::new(),
    };
    let scenario = if let Some(name) = preset {
        Scenario::parse(name)?
    } else if let Some((_, v)) = file_entries.iter().find(|(k, _)| k == "scenario") {
        Scenario::parse(v)?
    } else if let Some((_, v)) = sets.iter().find(|(k, _)| k == "scenario") {
        Scenario::parse(v)?
    } else {
        Scenario::FreePacket
    };
    let mut config = RunConfig::preset(scenario);
    for (k, v) in &file_entries {
        config.apply(k, v)?;
    }
    for (k, v) in sets {
        config.apply(k, v)?;
    }
    config.validate()?;
    Ok(config)
}
