//! Simulation configuration and the flat key-value config file format.
//!
//! The file is plain text, one `key = value` pair per line, `#` comments.
//! Unknown keys and duplicate keys are hard errors; every reported error
//! names the offending key and line.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Fluid velocity identically zero; particles still feel the -v drag.
    PureKinetic,
    /// Fluid held at its initial field; no Stokes stepping.
    FrozenFluid,
    /// Full two-way coupling through the Picard iteration.
    FullCoupling,
}

/// Exponents of the diagnostic weight (1+v^2)^(2a+1) (1+x^2+v^2)^(3g).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub alpha: f64,
    pub gamma: f64,
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) {
            return Err(Error::Config(format!(
                "weights.alpha must be > 1, got {}",
                self.alpha
            )));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::Config(format!(
                "weights.gamma must be > 1, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// omega(x, v) with x measured from the box center.
    pub fn omega(&self, x_sq: f64, v_sq: f64) -> f64 {
        (1.0 + v_sq).powf(2.0 * self.alpha + 1.0) * (1.0 + x_sq + v_sq).powf(3.0 * self.gamma)
    }
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec { alpha: 2.0, gamma: 2.0 }
    }
}

/// Initial particle distribution. Every preset has compactly supported
/// velocities; unbounded presets (e.g. Gaussian) are rejected at parse time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParticleInit {
    /// Uniform positions, all velocities zero.
    AtRest,
    /// Uniform positions, half the particles at +x unit speed, half at -x.
    TwoCluster,
    /// Uniform positions, velocities uniform in the ball of radius r0.
    UniformBall { r0: f64 },
}

/// Initial fluid field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FluidInit {
    Zero,
    /// u(x) = amp * cos(2 pi k . x / L) for an integer mode k.
    SingleMode { k: [i64; 3], amp: [f64; 3] },
    /// Taylor-Green-like solenoidal vortex with the given amplitude.
    TaylorGreen { amp: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub box_length: f64,
    pub grid_n: usize,
    pub particle_count: usize,
    pub dt: f64,
    pub t_end: f64,
    pub kernel: KernelSpec,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub output_every: usize,
    pub rng_seed: u64,
    pub mode: Mode,
    pub weights: WeightSpec,
    pub q: f64,
    pub init_particles: ParticleInit,
    pub init_fluid: FluidInit,
    /// Total mass carried by the ensemble.
    pub total_mass: f64,
    /// Test-harness switch: disables the (u - v) drag term in the particle
    /// update. Not a config-file key; used by closed-form oracles that need
    /// the alignment-only dynamics.
    pub drag_enabled: bool,
}

impl SimConfig {
    /// A valid baseline configuration; tests and presets start from this.
    pub fn base() -> Self {
        SimConfig {
            box_length: 2.0 * std::f64::consts::PI,
            grid_n: 16,
            particle_count: 64,
            dt: 0.01,
            t_end: 1.0,
            kernel: KernelSpec::RationalDecay,
            picard_tol: 1e-10,
            picard_max_iter: 25,
            output_every: 1,
            rng_seed: 0,
            mode: Mode::FullCoupling,
            weights: WeightSpec::default(),
            q: 6.0,
            init_particles: ParticleInit::UniformBall { r0: 1.0 },
            init_fluid: FluidInit::Zero,
            total_mass: 1.0,
            drag_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.box_length > 0.0) {
            return Err(Error::Config(format!(
                "box_length must be > 0, got {}",
                self.box_length
            )));
        }
        if self.grid_n < 4 || self.grid_n % 2 != 0 {
            return Err(Error::Config(format!(
                "grid_n must be >= 4 and even, got {}",
                self.grid_n
            )));
        }
        if self.particle_count < 1 {
            return Err(Error::Config("n_particles must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.t_end < 0.0 {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!(
                "picard_tol must be > 0, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max_iter < 1 {
            return Err(Error::Config("picard_max_iter must be >= 1".into()));
        }
        if self.output_every < 1 {
            return Err(Error::Config("output_every must be >= 1".into()));
        }
        if !(self.q > 3.0 && self.q <= 6.0) {
            return Err(Error::Config(format!("q must lie in (3, 6], got {}", self.q)));
        }
        if !(self.total_mass > 0.0) {
            return Err(Error::Config("total mass must be > 0".into()));
        }
        if let ParticleInit::UniformBall { r0 } = self.init_particles {
            if !(r0.is_finite() && r0 >= 0.0) {
                return Err(Error::InitialData(format!(
                    "init.particles: uniform_ball radius must be finite and >= 0, got {r0}"
                )));
            }
        }
        self.weights.validate()?;
        self.kernel.validate()
    }

    /// Serialize back to the config-file key set (the "config echo" stored in
    /// checkpoints and manifests).
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "box_length = {:.17e}", self.box_length);
        let _ = writeln!(s, "grid_n = {}", self.grid_n);
        let _ = writeln!(s, "n_particles = {}", self.particle_count);
        let _ = writeln!(s, "dt = {:.17e}", self.dt);
        let _ = writeln!(s, "t_end = {:.17e}", self.t_end);
        match self.kernel {
            KernelSpec::RationalDecay => {
                let _ = writeln!(s, "kernel.family = rational_decay");
            }
            KernelSpec::Constant { c } => {
                let _ = writeln!(s, "kernel.family = constant");
                let _ = writeln!(s, "kernel.c = {c:.17e}");
            }
        }
        let _ = writeln!(s, "picard_tol = {:.17e}", self.picard_tol);
        let _ = writeln!(s, "picard_max_iter = {}", self.picard_max_iter);
        let _ = writeln!(s, "output_every = {}", self.output_every);
        let _ = writeln!(s, "seed = {}", self.rng_seed);
        let mode = match self.mode {
            Mode::PureKinetic => "pure_kinetic",
            Mode::FrozenFluid => "frozen_fluid",
            Mode::FullCoupling => "full_coupling",
        };
        let _ = writeln!(s, "mode = {mode}");
        match self.init_particles {
            ParticleInit::AtRest => {
                let _ = writeln!(s, "init.particles = at_rest");
            }
            ParticleInit::TwoCluster => {
                let _ = writeln!(s, "init.particles = two_cluster");
            }
            ParticleInit::UniformBall { r0 } => {
                let _ = writeln!(s, "init.particles = uniform_ball:{r0:.17e}");
            }
        }
        match self.init_fluid {
            FluidInit::Zero => {
                let _ = writeln!(s, "init.fluid = zero");
            }
            FluidInit::SingleMode { k, amp } => {
                let _ = writeln!(
                    s,
                    "init.fluid = mode:{},{},{},{:.17e},{:.17e},{:.17e}",
                    k[0], k[1], k[2], amp[0], amp[1], amp[2]
                );
            }
            FluidInit::TaylorGreen { amp } => {
                let _ = writeln!(s, "init.fluid = taylor_green:{amp:.17e}");
            }
        }
        let _ = writeln!(s, "weights.alpha = {:.17e}", self.weights.alpha);
        let _ = writeln!(s, "weights.gamma = {:.17e}", self.weights.gamma);
        let _ = writeln!(s, "q = {:.17e}", self.q);
        s
    }
}

const KNOWN_KEYS: &[&str] = &[
    "box_length",
    "grid_n",
    "n_particles",
    "dt",
    "t_end",
    "kernel.family",
    "kernel.c",
    "picard_tol",
    "picard_max_iter",
    "output_every",
    "seed",
    "mode",
    "init.particles",
    "init.fluid",
    "weights.alpha",
    "weights.gamma",
    "q",
];

const REQUIRED_KEYS: &[&str] = &["box_length", "grid_n", "n_particles", "dt", "t_end", "mode"];

/// Parse and fully validate a config file. See `KNOWN_KEYS` for the key set.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<SimConfig> {
    let mut seen: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::ConfigLine {
            line: lineno,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::ConfigLine {
                line: lineno,
                msg: format!("unknown key `{key}`"),
            });
        }
        if let Some((first, _)) = seen.get(&key) {
            return Err(Error::ConfigLine {
                line: lineno,
                msg: format!("duplicate key `{key}` (first defined on line {first})"),
            });
        }
        seen.insert(key, (lineno, value));
    }

    for req in REQUIRED_KEYS {
        if !seen.contains_key(*req) {
            return Err(Error::Config(format!("missing required key `{req}`")));
        }
    }

    let get = |k: &str| seen.get(k).cloned();
    let parse_f64 = |k: &str| -> Result<Option<f64>> {
        match get(k) {
            None => Ok(None),
            Some((line, v)) => v.parse::<f64>().map(Some).map_err(|_| Error::ConfigLine {
                line,
                msg: format!("key `{k}`: `{v}` is not a number"),
            }),
        }
    };
    let parse_usize = |k: &str| -> Result<Option<usize>> {
        match get(k) {
            None => Ok(None),
            Some((line, v)) => v.parse::<usize>().map(Some).map_err(|_| Error::ConfigLine {
                line,
                msg: format!("key `{k}`: `{v}` is not a non-negative integer"),
            }),
        }
    };

    let mut cfg = SimConfig::base();
    cfg.box_length = parse_f64("box_length")?.unwrap();
    cfg.grid_n = parse_usize("grid_n")?.unwrap();
    cfg.particle_count = parse_usize("n_particles")?.unwrap();
    cfg.dt = parse_f64("dt")?.unwrap();
    cfg.t_end = parse_f64("t_end")?.unwrap();
    if let Some(v) = parse_f64("picard_tol")? {
        cfg.picard_tol = v;
    }
    if let Some(v) = parse_usize("picard_max_iter")? {
        cfg.picard_max_iter = v;
    }
    if let Some(v) = parse_usize("output_every")? {
        cfg.output_every = v;
    }
    if let Some((line, v)) = get("seed") {
        cfg.rng_seed = v.parse::<u64>().map_err(|_| Error::ConfigLine {
            line,
            msg: format!("key `seed`: `{v}` is not an unsigned integer"),
        })?;
    }
    if let Some(v) = parse_f64("weights.alpha")? {
        cfg.weights.alpha = v;
    }
    if let Some(v) = parse_f64("weights.gamma")? {
        cfg.weights.gamma = v;
    }
    if let Some(v) = parse_f64("q")? {
        cfg.q = v;
    }

    let (mode_line, mode) = get("mode").unwrap();
    cfg.mode = match mode.as_str() {
        "pure_kinetic" => Mode::PureKinetic,
        "frozen_fluid" => Mode::FrozenFluid,
        "full_coupling" => Mode::FullCoupling,
        other => {
            return Err(Error::ConfigLine {
                line: mode_line,
                msg: format!(
                    "key `mode`: `{other}` is not one of pure_kinetic, frozen_fluid, full_coupling"
                ),
            })
        }
    };

    let family = get("kernel.family").map(|(_, v)| v).unwrap_or_else(|| "rational_decay".into());
    cfg.kernel = match family.as_str() {
        "rational_decay" => {
            if let Some((line, _)) = get("kernel.c") {
                return Err(Error::ConfigLine {
                    line,
                    msg: "key `kernel.c` only applies to the constant kernel family".into(),
                });
            }
            KernelSpec::RationalDecay
        }
        "constant" => {
            let c = parse_f64("kernel.c")?
                .ok_or_else(|| Error::Config("constant kernel requires key `kernel.c`".into()))?;
            KernelSpec::Constant { c }
        }
        other => {
            let line = get("kernel.family").unwrap().0;
            return Err(Error::ConfigLine {
                line,
                msg: format!("key `kernel.family`: unknown family `{other}`"),
            });
        }
    };

    if let Some((line, v)) = get("init.particles") {
        cfg.init_particles = parse_particle_init(&v).map_err(|msg| Error::ConfigLine {
            line,
            msg: format!("key `init.particles`: {msg}"),
        })?;
    }
    if let Some((line, v)) = get("init.fluid") {
        cfg.init_fluid = parse_fluid_init(&v).map_err(|msg| Error::ConfigLine {
            line,
            msg: format!("key `init.fluid`: {msg}"),
        })?;
    }

    // Re-check the numeric constraints with key-precise messages.
    if !(cfg.dt > 0.0) {
        let line = get("dt").unwrap().0;
        return Err(Error::ConfigLine {
            line,
            msg: format!("key `dt`: must be > 0, got {}", cfg.dt),
        });
    }
    if cfg.grid_n < 4 || cfg.grid_n % 2 != 0 {
        let line = get("grid_n").unwrap().0;
        return Err(Error::ConfigLine {
            line,
            msg: format!("key `grid_n`: must be >= 4 and even, got {}", cfg.grid_n),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_particle_init(v: &str) -> std::result::Result<ParticleInit, String> {
    match v {
        "at_rest" => Ok(ParticleInit::AtRest),
        "two_cluster" => Ok(ParticleInit::TwoCluster),
        _ => {
            if let Some(arg) = v.strip_prefix("uniform_ball:") {
                let r0: f64 = arg
                    .parse()
                    .map_err(|_| format!("uniform_ball radius `{arg}` is not a number"))?;
                if !r0.is_finite() {
                    return Err("velocity support radius must be finite".into());
                }
                Ok(ParticleInit::UniformBall { r0 })
            } else if v.starts_with("gaussian") {
                Err("gaussian velocities have unbounded support; only compactly \
                     supported presets are accepted (at_rest, two_cluster, uniform_ball:<r0>)"
                    .into())
            } else {
                Err(format!(
                    "unknown preset `{v}` (expected at_rest, two_cluster, uniform_ball:<r0>)"
                ))
            }
        }
    }
}

fn parse_fluid_init(v: &str) -> std::result::Result<FluidInit, String> {
    if v == "zero" {
        return Ok(FluidInit::Zero);
    }
    if let Some(arg) = v.strip_prefix("taylor_green:") {
        let amp: f64 = arg
            .parse()
            .map_err(|_| format!("taylor_green amplitude `{arg}` is not a number"))?;
        if !amp.is_finite() {
            return Err("taylor_green amplitude must be finite (real field)".into());
        }
        return Ok(FluidInit::TaylorGreen { amp });
    }
    if let Some(arg) = v.strip_prefix("mode:") {
        let parts: Vec<&str> = arg.split(',').collect();
        if parts.len() != 6 {
            return Err("mode preset needs 6 comma-separated values kx,ky,kz,ax,ay,az".into());
        }
        let mut k = [0i64; 3];
        for (i, p) in parts[..3].iter().enumerate() {
            k[i] = p.trim().parse().map_err(|_| {
                format!("mode index `{p}` is not an integer; non-integer modes are not periodic")
            })?;
        }
        let mut amp = [0.0f64; 3];
        for (i, p) in parts[3..].iter().enumerate() {
            amp[i] = p
                .trim()
                .parse()
                .map_err(|_| format!("mode amplitude `{p}` is not a real number"))?;
            if !amp[i].is_finite() {
                return Err("mode amplitude must be finite (real field)".into());
            }
        }
        return Ok(FluidInit::SingleMode { k, amp });
    }
    Err(format!(
        "unknown preset `{v}` (expected zero, mode:kx,ky,kz,ax,ay,az, taylor_green:<amp>)"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "box_length = 6.283185307179586\n\
                           grid_n = 8\n\
                           n_particles = 16\n\
                           dt = 0.01\n\
                           t_end = 0.1\n\
                           mode = full_coupling\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.picard_tol, 1e-10);
        assert_eq!(cfg.picard_max_iter, 25);
        assert_eq!(cfg.output_every, 1);
        assert_eq!(cfg.kernel, KernelSpec::RationalDecay);
        assert_eq!(cfg.q, 6.0);
    }

    #[test]
    fn negative_dt_names_the_key() {
        let text = MINIMAL.replace("dt = 0.01", "dt = -1");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("dt"), "{err}");
        assert!(err.contains("> 0"), "{err}");
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let text = format!("{MINIMAL}dt = 0.02\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("duplicate key `dt`"), "{err}");
        assert!(err.contains("line 4"), "{err}"); // first definition
        assert!(err.contains("line 7"), "{err}"); // duplicate
    }

    #[test]
    fn unknown_key_is_a_hard_error() {
        let text = format!("{MINIMAL}viscosity = 2\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("unknown key `viscosity`"), "{err}");
    }

    #[test]
    fn gaussian_velocity_preset_rejected() {
        let text = format!("{MINIMAL}init.particles = gaussian:1.0\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("unbounded support"), "{err}");
    }

    #[test]
    fn non_integer_mode_rejected() {
        let text = format!("{MINIMAL}init.fluid = mode:1.5,0,0,0,1,0\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("not periodic"), "{err}");
    }

    #[test]
    fn odd_grid_rejected() {
        let text = MINIMAL.replace("grid_n = 8", "grid_n = 9");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("grid_n"), "{err}");
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = SimConfig::base();
        cfg.kernel = KernelSpec::Constant { c: 0.25 };
        cfg.init_fluid = FluidInit::SingleMode { k: [1, 0, -2], amp: [0.0, 0.5, 0.0] };
        let echoed = parse_config_str(&cfg.echo()).unwrap();
        assert_eq!(echoed.kernel, cfg.kernel);
        assert_eq!(echoed.init_fluid, cfg.init_fluid);
        assert_eq!(echoed.dt, cfg.dt);
        assert_eq!(echoed.rng_seed, cfg.rng_seed);
    }
}
