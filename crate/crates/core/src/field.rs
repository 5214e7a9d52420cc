//! Time grids, space-time scalar fields, and their on-disk format: one CSV
//! per time slice plus a JSON manifest carrying the hashes and constants a
//! checker needs to trust a reloaded field.

use crate::error::{Error, Result};
use crate::graph::{Mesh, MetricGraph};
use crate::hash::Fnv64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

/// Uniform time grid on `[0, T)`: points `{0, dt, ..., T - dt}` with
/// `dt = T / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_horizon: f64, n_steps: usize) -> Result<TimeGrid> {
        if !(t_horizon > 0.0) || n_steps == 0 {
            return Err(Error::Config(format!(
                "time grid needs a positive horizon and at least one step, got T = {t_horizon}, n = {n_steps}"
            )));
        }
        Ok(TimeGrid { t_horizon, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_horizon / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn n_slices(&self) -> usize {
        self.n_steps
    }
}

/// Scalar values on a mesh times a time grid. `k_shift` records the linear
/// time shift already applied to the values (zero for a raw solve).
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub grid: TimeGrid,
    /// `slices[i][j]` = value at time index `i`, mesh point `j`.
    pub slices: Vec<Vec<f64>>,
    pub k_shift: f64,
    pub mesh_hash: u64,
    pub problem_hash: u64,
}

impl SpaceTimeField {
    pub fn value(&self, time_idx: usize, point_idx: usize) -> f64 {
        self.slices[time_idx][point_idx]
    }

    pub fn n_points(&self) -> usize {
        self.slices.first().map(Vec::len).unwrap_or(0)
    }

    pub fn assert_finite(&self) -> Result<()> {
        for (i, s) in self.slices.iter().enumerate() {
            for (j, v) in s.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Input(format!(
                        "field value at slice {i}, point {j} is not finite"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Returns a copy with values `u + k t` on the grid.
    pub fn shifted(&self, k: f64) -> SpaceTimeField {
        let slices = self
            .slices
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let t = self.grid.time(i);
                s.iter().map(|v| v + k * t).collect()
            })
            .collect();
        SpaceTimeField {
            grid: self.grid,
            slices,
            k_shift: self.k_shift + k,
            mesh_hash: self.mesh_hash,
            problem_hash: self.problem_hash,
        }
    }

    /// Max over mesh points of `|a - b|` per pair of matching slices.
    pub fn max_abs_diff(&self, other: &SpaceTimeField) -> f64 {
        let mut m = 0.0f64;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            for (x, y) in a.iter().zip(b) {
                m = m.max((x - y).abs());
            }
        }
        m
    }
}

/// Named constants carried by a solve manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ManifestConstants {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub mesh_hash: String,
    pub problem_hash: String,
    pub config_hash: String,
    pub route: String,
    pub h: f64,
    pub dt: f64,
    pub t_horizon: f64,
    pub n_steps: usize,
    pub n_points: usize,
    pub constants: ManifestConstants,
    pub slice_files: Vec<String>,
}

fn slice_file_name(i: usize) -> String {
    format!("slice_{i:05}.csv")
}

/// Writes one CSV per slice (`point_id,edge_id,offset,value`, 17 significant
/// digits) plus `manifest.json` into `dir`.
pub fn write_field(
    dir: &Path,
    g: &MetricGraph,
    mesh: &Mesh,
    field: &SpaceTimeField,
    route: &str,
    config_hash: u64,
    constants: ManifestConstants,
) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut slice_files = Vec::with_capacity(field.slices.len());
    for (i, slice) in field.slices.iter().enumerate() {
        let name = slice_file_name(i);
        let mut w = BufWriter::new(std::fs::File::create(dir.join(&name))?);
        writeln!(w, "point_id,edge_id,offset,value")?;
        for (j, v) in slice.iter().enumerate() {
            let (edge, offset, _) = g.edge_coords(&mesh.points[j])?;
            writeln!(w, "{j},{},{:.16e},{v:.16e}", edge.0, offset)?;
        }
        w.flush()?;
        slice_files.push(name);
    }
    let manifest = Manifest {
        mesh_hash: format!("{:016x}", field.mesh_hash),
        problem_hash: format!("{:016x}", field.problem_hash),
        config_hash: format!("{config_hash:016x}"),
        route: route.to_string(),
        h: mesh.spacing,
        dt: field.grid.dt(),
        t_horizon: field.grid.t_horizon,
        n_steps: field.grid.n_steps,
        n_points: mesh.n_points(),
        constants,
        slice_files,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Reloads a field written by [`write_field`], verifying the mesh hash
/// against the mesh rebuilt from the problem at hand.
pub fn read_field(dir: &Path, g: &MetricGraph, mesh: &Mesh) -> Result<(SpaceTimeField, Manifest)> {
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let expect_hash = format!("{:016x}", mesh.content_hash(g));
    if manifest.mesh_hash != expect_hash {
        return Err(Error::Integrity(format!(
            "mesh hash mismatch: field was written for {}, current mesh is {}",
            manifest.mesh_hash, expect_hash
        )));
    }
    if manifest.n_points != mesh.n_points() {
        return Err(Error::Integrity(format!(
            "point count mismatch: manifest has {}, mesh has {}",
            manifest.n_points,
            mesh.n_points()
        )));
    }
    let grid = TimeGrid::new(manifest.t_horizon, manifest.n_steps)?;
    let mut slices = Vec::with_capacity(manifest.slice_files.len());
    for name in &manifest.slice_files {
        let file = std::fs::File::open(dir.join(name))?;
        let reader = std::io::BufReader::new(file);
        let mut slice = vec![0.0f64; mesh.n_points()];
        let mut seen = 0usize;
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            if ln == 0 {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Input(format!("bad point id in {name}:{}", ln + 1)))?;
            let _edge = parts.next();
            let _offset = parts.next();
            let value: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Input(format!("bad value in {name}:{}", ln + 1)))?;
            if idx >= slice.len() {
                return Err(Error::Input(format!("point id {idx} out of range in {name}")));
            }
            slice[idx] = value;
            seen += 1;
        }
        if seen != mesh.n_points() {
            return Err(Error::Input(format!(
                "{name} has {seen} rows, expected {}",
                mesh.n_points()
            )));
        }
        slices.push(slice);
    }
    let field = SpaceTimeField {
        grid,
        slices,
        k_shift: 0.0,
        mesh_hash: mesh.content_hash(g),
        problem_hash: u64::from_str_radix(&manifest.problem_hash, 16)
            .map_err(|_| Error::Input("bad problem hash in manifest".into()))?,
    };
    Ok((field, manifest))
}

/// Hash of the solve configuration fed into manifests, for byte-stable
/// reruns and integrity checks.
pub fn config_hash(parts: &[(&str, f64)]) -> u64 {
    let mut h = Fnv64::new();
    for (k, v) in parts {
        h.write_str(k).write_f64(*v);
    }
    h.finish()
}
