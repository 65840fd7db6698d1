//! Scenario orchestration: builds the grid, potential and kernel from a
//! resolved configuration, runs the requested scenario and writes the
//! output tree (snapshots, diagnostics, resolved config and a manifest).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sigmc_core::constants::HBAR;
use sigmc_core::engine::{
    run, sample_initial, EvolutionConfig, PacketSpec, RelativePairSource, RunOutcome, RunOutput,
    SingleBodySource,
};
use sigmc_core::export::{write_density, write_gamma, write_kernel, write_quasi, write_table};
use sigmc_core::kernel::{
    classical_limit_scan, gamma_series_partial, kernel_numeric, kernel_two_body,
};
use sigmc_core::observables;
use sigmc_core::observables::{relative_difference, EnsembleSnapshot, SpatialDensity};
use sigmc_core::oracle::{split_step_evolve, wigner_transform, WaveFunction};
use sigmc_core::phase_space::{PhaseSpaceGrid, Species};
use sigmc_core::potentials::PotentialModel;
use sigmc_core::stream::RandomStream;

use crate::config::{PotentialKind, RunConfig, Scenario};

/// Exit codes: 0 success, 2 configuration, 3 particle-cap abort, 4 numeric.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }

    fn io(err: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: format!("io error: {err}"),
        }
    }
}

fn grid_of(config: &RunConfig) -> Result<PhaseSpaceGrid, Failure> {
    PhaseSpaceGrid::new(
        config.domain_min,
        config.domain_max,
        config.nx,
        config.coherence_length,
        config.m_max,
    )
    .map_err(|e| Failure::config(e.to_string()))
}

fn potential_of(config: &RunConfig) -> Result<PotentialModel, Failure> {
    let p = match config.potential_kind {
        PotentialKind::Zero => Ok(PotentialModel::Zero),
        PotentialKind::GaussianBarrier => {
            PotentialModel::gaussian_barrier(config.height_ev, config.sigma_nm, config.center_nm)
        }
        PotentialKind::AbruptBarrier => {
            PotentialModel::abrupt_barrier(config.height_ev, config.left_nm, config.right_nm)
        }
        PotentialKind::SoftCoulomb => {
            PotentialModel::soft_coulomb_pair(config.coupling_evnm, config.softening_nm)
        }
        PotentialKind::Tabulated => PotentialModel::from_table_file(Path::new(&config.table_path)),
    };
    p.map_err(|e| Failure::config(e.to_string()))
}

fn evolution_config(config: &RunConfig) -> EvolutionConfig {
    EvolutionConfig {
        dt: config.dt,
        t_final: config.total_time,
        annihilation_period: config.annihilation_period,
        snapshot_period: config.snapshot_period,
        particle_cap: config.particle_cap,
        max_creation_probability: 0.1,
        record_particles: config.record_particles,
        progress: true,
    }
}

fn common_meta(config: &RunConfig) -> Vec<(&'static str, String)> {
    vec![
        ("scenario", config.scenario.name().to_owned()),
        ("seed", config.seed.to_string()),
        ("n0", config.n0.to_string()),
    ]
}

fn write_snapshot_files<const D: usize>(
    dir: &Path,
    config: &RunConfig,
    snap: &EnsembleSnapshot<D>,
) -> std::io::Result<()> {
    let mut meta = common_meta(config);
    meta.push(("time_fs", snap.time.to_string()));
    meta.push(("step", snap.step.to_string()));
    meta.push(("particles", snap.particle_count.to_string()));
    meta.push(("signed_sum", snap.signed_sum.to_string()));
    meta.push(("leaked_sum", snap.leaked_sum.to_string()));
    for density in &snap.densities {
        let name = format!(
            "snap_{:06}_density_{}.dat",
            snap.step,
            density.species.label()
        );
        write_density(&dir.join(name), density, &meta)?;
    }
    let quasi_name = if D == 2 {
        format!("snap_{:06}_quasi_electron.dat", snap.step)
    } else {
        format!("snap_{:06}_quasi.dat", snap.step)
    };
    write_quasi(&dir.join(quasi_name), &snap.quasi, &meta)?;
    Ok(())
}

fn write_diagnostics<const D: usize>(
    dir: &Path,
    config: &RunConfig,
    snapshots: &[EnsembleSnapshot<D>],
) -> std::io::Result<()> {
    write_table(
        &dir.join("diagnostics.dat"),
        &common_meta(config),
        &[
            "step",
            "time_fs",
            "particles",
            "signed_sum",
            "leaked_sum",
            "created",
            "min_cell_value",
        ],
        snapshots.iter().map(|s| {
            vec![
                s.step as f64,
                s.time,
                s.particle_count as f64,
                s.signed_sum as f64,
                s.leaked_sum as f64,
                s.creation_events as f64,
                s.min_cell_value,
            ]
        }),
    )
}

fn write_epsilon(
    dir: &Path,
    name: &str,
    config: &RunConfig,
    rho0: &SpatialDensity,
    rho_t: &SpatialDensity,
    time: f64,
) -> Result<(), Failure> {
    let eps = relative_difference(rho0, rho_t).map_err(|e| Failure::numeric(e.to_string()))?;
    let mut meta = common_meta(config);
    meta.push(("time_fs", time.to_string()));
    meta.push(("species", rho0.species.label().to_owned()));
    let x0 = rho0.x_min;
    let w = rho0.cell_width;
    write_table(
        &dir.join(name),
        &meta,
        &["x_nm", "epsilon"],
        eps.iter()
            .enumerate()
            .map(move |(i, e)| vec![x0 + (i as f64 + 0.5) * w, *e]),
    )
    .map_err(Failure::io)
}

struct Manifest {
    outcome: String,
    creation_events: u64,
    annihilation_removed: u64,
    final_particles: usize,
    final_signed_sum: i64,
    leaked_sum: i64,
    conservation_residual: i64,
}

fn write_manifest(
    dir: &Path,
    config: &RunConfig,
    started: Instant,
    manifest: Option<&Manifest>,
    exit_code: i32,
) -> std::io::Result<()> {
    let mut text = String::new();
    text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("scenario = {}\n", config.scenario.name()));
    text.push_str(&format!("seed = {}\n", config.seed));
    text.push_str(&format!("workers = {}\n", config.workers));
    text.push_str(
        "determinism = single-run bit-exact for a fixed seed and config; \
         independent of worker count (fixed-block sub-streams)\n",
    );
    text.push_str(&format!(
        "wall_time_s = {:.3}\n",
        started.elapsed().as_secs_f64()
    ));
    if let Some(m) = manifest {
        text.push_str(&format!("outcome = {}\n", m.outcome));
        text.push_str(&format!("creation_events = {}\n", m.creation_events));
        text.push_str(&format!(
            "annihilation_removed = {}\n",
            m.annihilation_removed
        ));
        text.push_str(&format!("final_particles = {}\n", m.final_particles));
        text.push_str(&format!("final_signed_sum = {}\n", m.final_signed_sum));
        text.push_str(&format!("leaked_sum = {}\n", m.leaked_sum));
        text.push_str(&format!(
            "conservation_residual = {}\n",
            m.conservation_residual
        ));
    }
    text.push_str(&format!("exit_code = {exit_code}\n"));
    fs::write(dir.join("run_manifest.txt"), text)
}

fn manifest_of<const D: usize>(config: &RunConfig, out: &RunOutput<D>) -> Manifest {
    let signed = out.ensemble.signed_sum();
    Manifest {
        outcome: match out.outcome {
            RunOutcome::Completed => "completed".to_owned(),
            RunOutcome::CapAborted { step } => format!("particle_cap_abort step={step}"),
        },
        creation_events: out.creation_events,
        annihilation_removed: out.annihilation_removed,
        final_particles: out.ensemble.len(),
        final_signed_sum: signed,
        leaked_sum: out.ensemble.leaked_sum,
        conservation_residual: signed + out.ensemble.leaked_sum - config.n0 as i64,
    }
}

/// Runs one resolved configuration; returns the process exit code.
pub fn execute(config: &RunConfig) -> Result<i32, Failure> {
    let started = Instant::now();
    let dir = PathBuf::from(&config.output_dir);
    fs::create_dir_all(&dir).map_err(Failure::io)?;
    fs::write(dir.join("resolved_config.cfg"), config.echo()).map_err(Failure::io)?;

    let result = match config.scenario {
        Scenario::KernelReport => kernel_report(config, &dir),
        Scenario::ClassicalLimit => classical_limit(config, &dir),
        Scenario::Hydrogen1d => hydrogen_run(config, &dir, started),
        _ => single_body_run(config, &dir, started),
    };
    match &result {
        Ok(code) => {
            if matches!(
                config.scenario,
                Scenario::KernelReport | Scenario::ClassicalLimit
            ) {
                write_manifest(&dir, config, started, None, *code).map_err(Failure::io)?;
            }
        }
        Err(failure) => {
            let _ = write_manifest(&dir, config, started, None, failure.code);
        }
    }
    result
}

fn kernel_report(config: &RunConfig, dir: &Path) -> Result<i32, Failure> {
    let grid = grid_of(config)?;
    let potential = potential_of(config)?;
    if potential.dimensions() != 1 {
        return Err(Failure::config(
            "kernel_report needs a single-coordinate potential",
        ));
    }
    let table = kernel_numeric(&potential, &grid).map_err(|e| Failure::numeric(e.to_string()))?;
    let meta = common_meta(config);
    write_kernel(&dir.join("kernel_table.dat"), &table, &meta).map_err(Failure::io)?;
    write_gamma(&dir.join("kernel_gamma.dat"), &table, &meta).map_err(Failure::io)?;

    if let PotentialModel::GaussianBarrier {
        height,
        sigma,
        center,
    } = potential
    {
        // partial sums of the rate series at M = 4, 8, 16, 32, converted to
        // physical rate units (eps * S / (2 pi hbar)) next to the table rate
        let eps = config.series_eps;
        let to_rate = eps / (2.0 * std::f64::consts::PI * HBAR);
        let mut meta = common_meta(config);
        meta.push(("eps_invnm", eps.to_string()));
        write_table(
            &dir.join("gamma_partial_sums.dat"),
            &meta,
            &[
                "x_nm",
                "s4_per_fs",
                "s8_per_fs",
                "s16_per_fs",
                "s32_per_fs",
                "gamma_per_fs",
            ],
            (0..table.n_nodes()).map(|i| {
                let x = table.node_position(i);
                let mut row = vec![x];
                for m in [4usize, 8, 16, 32] {
                    row.push(to_rate * gamma_series_partial(x - center, height, sigma, eps, m));
                }
                row.push(table.gamma(i));
                row
            }),
        )
        .map_err(Failure::io)?;
    }
    Ok(EXIT_OK)
}

fn classical_limit(config: &RunConfig, dir: &Path) -> Result<i32, Failure> {
    let grid = grid_of(config)?;
    let potential = potential_of(config)?;
    let maxima = classical_limit_scan(
        &potential,
        &grid,
        config.scan_momentum_step,
        &config.scan_scales,
    )
    .map_err(|e| Failure::numeric(e.to_string()))?;
    let mut meta = common_meta(config);
    meta.push(("momentum_step_invnm", config.scan_momentum_step.to_string()));
    write_table(
        &dir.join("classical_limit.dat"),
        &meta,
        &["lambda", "max_gamma_per_fs"],
        config
            .scan_scales
            .iter()
            .zip(&maxima)
            .map(|(l, g)| vec![*l, *g]),
    )
    .map_err(Failure::io)?;
    Ok(EXIT_OK)
}

fn single_body_run(config: &RunConfig, dir: &Path, started: Instant) -> Result<i32, Failure> {
    let grid = grid_of(config)?;
    let potential = potential_of(config)?;
    if potential.dimensions() != 1 {
        return Err(Failure::config(format!(
            "scenario {} needs a single-coordinate potential",
            config.scenario.name()
        )));
    }
    let table = kernel_numeric(&potential, &grid).map_err(|e| Failure::numeric(e.to_string()))?;
    write_gamma(&dir.join("kernel_gamma.dat"), &table, &common_meta(config))
        .map_err(Failure::io)?;
    let source = SingleBodySource::new(&table);
    let stream = RandomStream::new(config.seed);
    let packets = [PacketSpec::minimum_uncertainty(
        config.packet_center,
        config.packet_sigma,
        config.packet_k0,
    )];
    let ensemble = sample_initial(&grid, &packets, [Species::Electron], config.n0, &stream)
        .map_err(|e| Failure::config(e.to_string()))?;
    let out = run(ensemble, &grid, &source, &evolution_config(config), &stream)
        .map_err(|e| Failure::config(e.to_string()))?;

    for snap in &out.snapshots {
        write_snapshot_files(dir, config, snap).map_err(Failure::io)?;
    }
    write_diagnostics(dir, config, &out.snapshots).map_err(Failure::io)?;

    if config.oracle_enabled {
        emit_oracle_reference(config, dir, &grid, &potential, &out.snapshots)?;
    }

    let manifest = manifest_of(config, &out);
    let code = match out.outcome {
        RunOutcome::Completed => EXIT_OK,
        RunOutcome::CapAborted { .. } => EXIT_CAP,
    };
    write_manifest(dir, config, started, Some(&manifest), code).map_err(Failure::io)?;
    Ok(code)
}

/// Evolves the wavefunction reference through the same snapshot times and
/// writes its densities and quasi-distributions in the engine's format.
fn emit_oracle_reference(
    config: &RunConfig,
    dir: &Path,
    grid: &PhaseSpaceGrid,
    potential: &PotentialModel,
    snapshots: &[EnsembleSnapshot<1>],
) -> Result<(), Failure> {
    let mut psi = WaveFunction::gaussian(
        config.domain_min,
        config.domain_max,
        config.oracle_points,
        1.0,
        config.packet_center,
        config.packet_sigma,
        config.packet_k0,
    );
    for snap in snapshots {
        let remaining = snap.time - psi.time;
        if remaining > 1e-12 {
            let steps = (remaining / config.oracle_dt).ceil().max(1.0) as usize;
            let dt = remaining / steps as f64;
            psi = split_step_evolve(&psi, potential, dt, steps).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: e.to_string(),
            })?;
        }
        let quasi = wigner_transform(&psi, grid).map_err(|e| Failure::numeric(e.to_string()))?;
        let mut meta = common_meta(config);
        meta.push(("time_fs", snap.time.to_string()));
        meta.push(("step", snap.step.to_string()));
        meta.push(("source", "wavefunction_reference".to_owned()));
        write_quasi(
            &dir.join(format!("oracle_{:06}_quasi.dat", snap.step)),
            &quasi,
            &meta,
        )
        .map_err(Failure::io)?;
        let marg = quasi.x_marginal();
        let density = SpatialDensity {
            species: Species::Electron,
            x_min: quasi.x_min,
            cell_width: quasi.cell_width,
            values: marg,
        };
        write_density(
            &dir.join(format!("oracle_{:06}_density.dat", snap.step)),
            &density,
            &meta,
        )
        .map_err(Failure::io)?;
    }
    Ok(())
}

fn hydrogen_run(config: &RunConfig, dir: &Path, started: Instant) -> Result<i32, Failure> {
    let grid = grid_of(config)?;
    let potential = potential_of(config)?;
    let reduced = potential.relative_coordinate_form().ok_or_else(|| {
        Failure::config("hydrogen_1d needs a pair potential reducible to the relative coordinate")
    })?;
    let table = kernel_two_body(&reduced, &grid).map_err(|e| Failure::numeric(e.to_string()))?;
    write_gamma(&dir.join("kernel_gamma.dat"), &table, &common_meta(config))
        .map_err(Failure::io)?;
    let source = RelativePairSource::new(&table);
    let stream = RandomStream::new(config.seed);
    let packets = [
        PacketSpec::minimum_uncertainty(
            config.packet_center,
            config.packet_sigma,
            config.packet_k0,
        ),
        PacketSpec::minimum_uncertainty(
            config.packet2_center,
            config.packet2_sigma,
            config.packet2_k0,
        ),
    ];
    let ensemble = sample_initial(
        &grid,
        &packets,
        [Species::Electron, Species::Proton],
        config.n0,
        &stream,
    )
    .map_err(|e| Failure::config(e.to_string()))?;
    let out = run(ensemble, &grid, &source, &evolution_config(config), &stream)
        .map_err(|e| Failure::config(e.to_string()))?;

    for snap in &out.snapshots {
        write_snapshot_files(dir, config, snap).map_err(Failure::io)?;
    }
    write_diagnostics(dir, config, &out.snapshots).map_err(Failure::io)?;

    // relative-difference profiles between the first and last snapshots
    let first = out.snapshots.first().expect("initial snapshot");
    let last = out.snapshots.last().expect("final snapshot");
    write_epsilon(
        dir,
        "epsilon_electron.dat",
        config,
        &first.densities[0],
        &last.densities[0],
        last.time,
    )?;
    write_epsilon(
        dir,
        "epsilon_proton.dat",
        config,
        &first.densities[1],
        &last.densities[1],
        last.time,
    )?;

    // pair-separation statistics need particle access; recompute from the
    // final ensemble and from the recorded snapshots when present
    let mut rows = Vec::new();
    for snap in &out.snapshots {
        if let Some(particles) = &snap.particles {
            let e = sigmc_core::phase_space::Ensemble {
                particles: particles.clone(),
                initial_count: config.n0,
                species: [Species::Electron, Species::Proton],
                leaked_sum: snap.leaked_sum,
            };
            let stats = observables::pair_separation_stats(&e, grid.cell_width());
            rows.push(vec![
                snap.time,
                stats.mean,
                stats.median_radius,
                stats.q68_radius,
            ]);
        }
    }
    if rows.is_empty() {
        let stats = observables::pair_separation_stats(&out.ensemble, grid.cell_width());
        rows.push(vec![
            last.time,
            stats.mean,
            stats.median_radius,
            stats.q68_radius,
        ]);
    }
    write_table(
        &dir.join("separation.dat"),
        &common_meta(config),
        &["time_fs", "mean_nm", "median_radius_nm", "q68_radius_nm"],
        rows.into_iter(),
    )
    .map_err(Failure::io)?;

    let manifest = manifest_of(config, &out);
    let code = match out.outcome {
        RunOutcome::Completed => EXIT_OK,
        RunOutcome::CapAborted { .. } => EXIT_CAP,
    };
    write_manifest(dir, config, started, Some(&manifest), code).map_err(Failure::io)?;
    Ok(code)
}
