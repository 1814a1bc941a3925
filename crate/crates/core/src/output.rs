//! Serialization: CSV time series, binary checkpoints, and the JSON run
//! manifest. Time-series text carries 17 significant digits so a parse-back
//! reproduces every f64 exactly.

use crate::config::{parse_config_str, SimConfig};
use crate::diagnostics::DiagnosticsRecord;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::picard::SimState;
use crate::vec3::Vec3;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CSV_HEADER: &str = "time,mass,momentum_x,momentum_y,momentum_z,E_particles,E_fluid,\
                              D_viscous,D_drag,D_align,R,R_bound,M2,M3,M6,var_v,picard_iters";

/// Render the time series as CSV text (header plus one row per record).
pub fn timeseries_to_string(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let fields = [
            r.time,
            r.mass,
            r.momentum.x,
            r.momentum.y,
            r.momentum.z,
            r.energy_particles,
            r.energy_fluid,
            r.dissipation_viscous,
            r.dissipation_drag,
            r.dissipation_alignment,
            r.support_radius,
            r.support_bound_rhs,
            r.m2,
            r.m3,
            r.m6,
            r.velocity_variance,
        ];
        for f in fields {
            out.push_str(&format!("{f:.16e},"));
        }
        out.push_str(&format!("{}\n", r.picard_iters));
    }
    out
}

pub fn write_timeseries(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    std::fs::write(path, timeseries_to_string(records)).map_err(|e| Error::io(path, e))
}

/// Parse a CSV produced by `write_timeseries`; round-trips exactly.
pub fn parse_timeseries(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Invalid("empty time series".into()))?;
    if header != CSV_HEADER {
        return Err(Error::Invalid(format!("unexpected CSV header `{header}`")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 17 {
            return Err(Error::Invalid(format!(
                "row {}: expected 17 columns, got {}",
                i + 2,
                cols.len()
            )));
        }
        let f = |j: usize| -> Result<f64> {
            cols[j]
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("row {}: bad number `{}`", i + 2, cols[j])))
        };
        records.push(DiagnosticsRecord {
            time: f(0)?,
            mass: f(1)?,
            momentum: Vec3::new(f(2)?, f(3)?, f(4)?),
            energy_particles: f(5)?,
            energy_fluid: f(6)?,
            dissipation_viscous: f(7)?,
            dissipation_drag: f(8)?,
            dissipation_alignment: f(9)?,
            support_radius: f(10)?,
            support_bound_rhs: f(11)?,
            m2: f(12)?,
            m3: f(13)?,
            m6: f(14)?,
            velocity_variance: f(15)?,
            picard_iters: cols[16].parse().map_err(|_| {
                Error::Invalid(format!("row {}: bad iteration count `{}`", i + 2, cols[16]))
            })?,
        });
    }
    Ok(records)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"KCSCHKP1";

/// Everything needed to resume a run bit-identically.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: SimConfig,
    pub state: SimState,
    pub time: f64,
    pub step: u64,
    pub support_quad: f64,
}

pub fn write_checkpoint(
    path: &Path,
    config: &SimConfig,
    state: &SimState,
    time: f64,
    step: u64,
    support_quad: f64,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    let echo = config.echo();
    w.write_u64::<LittleEndian>(echo.len() as u64).map_err(io)?;
    w.write_all(echo.as_bytes()).map_err(io)?;

    w.write_u64::<LittleEndian>(step).map_err(io)?;
    w.write_f64::<LittleEndian>(time).map_err(io)?;
    w.write_f64::<LittleEndian>(support_quad).map_err(io)?;

    let ens = &state.ensemble;
    w.write_u64::<LittleEndian>(ens.len() as u64).map_err(io)?;
    w.write_f64::<LittleEndian>(ens.box_length).map_err(io)?;
    w.write_f64::<LittleEndian>(ens.r0).map_err(io)?;
    for p in &ens.positions {
        for c in [p.x, p.y, p.z] {
            w.write_f64::<LittleEndian>(c).map_err(io)?;
        }
    }
    for v in &ens.velocities {
        for c in [v.x, v.y, v.z] {
            w.write_f64::<LittleEndian>(c).map_err(io)?;
        }
    }
    for &m in ens.weights() {
        w.write_f64::<LittleEndian>(m).map_err(io)?;
    }

    let fl = &state.fluid;
    w.write_u64::<LittleEndian>(fl.grid_n as u64).map_err(io)?;
    w.write_f64::<LittleEndian>(fl.box_length).map_err(io)?;
    for comp in &fl.grid {
        for &x in comp {
            w.write_f64::<LittleEndian>(x).map_err(io)?;
        }
    }
    for comp in &fl.spectral {
        for z in comp {
            w.write_f64::<LittleEndian>(z.re).map_err(io)?;
            w.write_f64::<LittleEndian>(z.im).map_err(io)?;
        }
    }
    for comp in &fl.pressure_gradient {
        for &x in comp {
            w.write_f64::<LittleEndian>(x).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let echo_len = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    if echo_len > 1 << 20 {
        return Err(Error::Checkpoint("config echo implausibly large".into()));
    }
    let mut echo = vec![0u8; echo_len];
    r.read_exact(&mut echo).map_err(io)?;
    let echo = String::from_utf8(echo)
        .map_err(|_| Error::Checkpoint("config echo is not UTF-8".into()))?;
    let config = parse_config_str(&echo)?;

    let step = r.read_u64::<LittleEndian>().map_err(io)?;
    let time = r.read_f64::<LittleEndian>().map_err(io)?;
    let support_quad = r.read_f64::<LittleEndian>().map_err(io)?;

    let n = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let box_length = r.read_f64::<LittleEndian>().map_err(io)?;
    let r0 = r.read_f64::<LittleEndian>().map_err(io)?;
    let mut read_vecs = |count: usize| -> Result<Vec<Vec3>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let x = r.read_f64::<LittleEndian>().map_err(io)?;
            let y = r.read_f64::<LittleEndian>().map_err(io)?;
            let z = r.read_f64::<LittleEndian>().map_err(io)?;
            out.push(Vec3::new(x, y, z));
        }
        Ok(out)
    };
    let positions = read_vecs(n)?;
    let velocities = read_vecs(n)?;
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        weights.push(r.read_f64::<LittleEndian>().map_err(io)?);
    }
    // stored positions are already wrapped, so the constructor's wrap is the
    // identity; r0 must come from the file, not from the current velocities
    let mut ensemble = ParticleEnsemble::new(positions, velocities, weights, box_length);
    ensemble.r0 = r0;

    let grid_n = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let fluid_box = r.read_f64::<LittleEndian>().map_err(io)?;
    let m = grid_n * grid_n * grid_n;
    if m > 1 << 28 {
        return Err(Error::Checkpoint("grid implausibly large".into()));
    }
    let mut fluid = FluidState::zero(grid_n, fluid_box);
    for comp in fluid.grid.iter_mut() {
        for x in comp.iter_mut() {
            *x = r.read_f64::<LittleEndian>().map_err(io)?;
        }
    }
    for comp in fluid.spectral.iter_mut() {
        for z in comp.iter_mut() {
            let re = r.read_f64::<LittleEndian>().map_err(io)?;
            let im = r.read_f64::<LittleEndian>().map_err(io)?;
            *z = Complex64::new(re, im);
        }
    }
    for comp in fluid.pressure_gradient.iter_mut() {
        for x in comp.iter_mut() {
            *x = r.read_f64::<LittleEndian>().map_err(io)?;
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after checkpoint payload".into()));
    }

    Ok(Checkpoint {
        config,
        state: SimState { ensemble, fluid },
        time,
        step,
        support_quad,
    })
}

/// Human-readable state summary for `describe`.
pub fn describe_checkpoint(ck: &Checkpoint) -> String {
    let ens = &ck.state.ensemble;
    let fl = &ck.state.fluid;
    format!(
        "checkpoint at t = {:.6} (step {})\n\
         particles: N = {}, mass = {:.16e}, R = {:.16e}\n\
         grid: {}^3, box length {:.16e}\n\
         energies: particles {:.16e}, fluid {:.16e}\n\
         total momentum: ({:.16e}, {:.16e}, {:.16e})\n",
        ck.time,
        ck.step,
        ens.len(),
        ens.total_mass(),
        ens.support_radius(),
        fl.grid_n,
        fl.box_length,
        ens.kinetic_energy(),
        fl.energy(),
        ens.momentum().x + fl.grid_integral().x,
        ens.momentum().y + fl.grid_integral().y,
        ens.momentum().z + fl.grid_integral().z,
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
}

/// Written last, after every listed artifact exists on disk.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub code_version: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    let digest = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Invalid(format!("manifest serialization: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("manifest parse: {e}")))
}
