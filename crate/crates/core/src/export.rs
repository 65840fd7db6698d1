//! Delimiter-separated text output with '#'-prefixed metadata headers.
//! Shared by the engine snapshots, the kernel reports and the wavefunction
//! reference so every table is loadable by the usual plotting tools.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::kernel::WignerKernelTable;
use crate::observables::{QuasiDistribution, SpatialDensity};

/// Writes one table: metadata lines, a column-name line, then rows of
/// space-separated values. Floats are printed shortest-round-trip so files
/// are byte-stable across identical runs.
pub fn write_table(
    path: &Path,
    metadata: &[(&str, String)],
    columns: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (key, value) in metadata {
        writeln!(out, "# {key} = {value}")?;
    }
    writeln!(out, "# columns: {}", columns.join(" "))?;
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                write!(out, " ")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// (x, density) profile.
pub fn write_density(
    path: &Path,
    density: &SpatialDensity,
    extra: &[(&str, String)],
) -> io::Result<()> {
    let mut metadata = vec![
        ("species", density.species.label().to_owned()),
        ("x_min_nm", density.x_min.to_string()),
        ("cell_width_nm", density.cell_width.to_string()),
        ("cells", density.values.len().to_string()),
    ];
    metadata.extend(extra.iter().cloned());
    let x0 = density.x_min;
    let w = density.cell_width;
    write_table(
        path,
        &metadata,
        &["x_nm", "density_per_nm"],
        density
            .values
            .iter()
            .enumerate()
            .map(move |(i, v)| vec![x0 + (i as f64 + 0.5) * w, *v]),
    )
}

/// (x, k, f) listing of a quasi-distribution.
pub fn write_quasi(
    path: &Path,
    quasi: &QuasiDistribution,
    extra: &[(&str, String)],
) -> io::Result<()> {
    let mut metadata = vec![
        ("x_min_nm", quasi.x_min.to_string()),
        ("cell_width_nm", quasi.cell_width.to_string()),
        ("dk_per_nm", quasi.dk.to_string()),
        ("cells_x", quasi.nx.to_string()),
        ("cells_k", quasi.n_momenta().to_string()),
    ];
    metadata.extend(extra.iter().cloned());
    let nm = quasi.n_momenta();
    let rows = (0..quasi.nx).flat_map(move |i| {
        let x = quasi.x_min + (i as f64 + 0.5) * quasi.cell_width;
        (0..nm).map(move |l| {
            let k = (l as i64 - quasi.m_max as i64) as f64 * quasi.dk;
            vec![x, k, quasi.values[i * nm + l]]
        })
    });
    write_table(path, &metadata, &["x_nm", "k_per_nm", "f"], rows)
}

/// (x, k, W) listing of a kernel table.
pub fn write_kernel(
    path: &Path,
    table: &WignerKernelTable,
    extra: &[(&str, String)],
) -> io::Result<()> {
    let mut metadata = vec![
        ("nodes", table.n_nodes().to_string()),
        ("dk_per_nm", table.dk().to_string()),
        ("m_max", table.m_max().to_string()),
        ("max_abs", table.max_abs().to_string()),
    ];
    metadata.extend(extra.iter().cloned());
    let m_max = table.m_max() as i32;
    let rows = (0..table.n_nodes()).flat_map(move |i| {
        let x = table.node_position(i);
        (-m_max..=m_max).map(move |m| vec![x, m as f64 * table.dk(), table.value(i, m)])
    });
    write_table(
        path,
        &metadata,
        &["x_nm", "k_per_nm", "w_rate_density"],
        rows,
    )
}

/// (x, gamma) creation-rate profile of a kernel table.
pub fn write_gamma(
    path: &Path,
    table: &WignerKernelTable,
    extra: &[(&str, String)],
) -> io::Result<()> {
    let mut metadata = vec![
        ("nodes", table.n_nodes().to_string()),
        ("dk_per_nm", table.dk().to_string()),
        ("m_max", table.m_max().to_string()),
    ];
    metadata.extend(extra.iter().cloned());
    let rows = (0..table.n_nodes()).map(move |i| vec![table.node_position(i), table.gamma(i)]);
    write_table(path, &metadata, &["x_nm", "gamma_per_fs"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::Species;

    #[test]
    fn density_file_round_trips() {
        let dir = std::env::temp_dir().join("sigmc_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("density.dat");
        let d = SpatialDensity {
            species: Species::Electron,
            x_min: -1.0,
            cell_width: 0.5,
            values: vec![0.25, 1.5, 0.25, 0.0],
        };
        write_density(&path, &d, &[("time_fs", "1.5".to_owned())]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut rows = 0;
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse().unwrap())
                .collect();
            assert_eq!(fields.len(), 2);
            assert_eq!(fields[1], d.values[rows]);
            rows += 1;
        }
        assert_eq!(rows, 4);
        assert!(text.contains("# time_fs = 1.5"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
