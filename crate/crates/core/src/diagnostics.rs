//! Per-output measurements and the checks built on top of them: the energy
//! budget, the velocity-support bound, moment growth monitors, a coarse
//! weighted-norm surrogate, and flocking metrics.

use crate::config::WeightSpec;
use crate::coupling::interpolate;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::kernel::KernelSpec;
use crate::stokes::viscous_dissipation;
use crate::vec3::Vec3;

#[derive(Clone, Debug)]
pub struct DiagnosticsRecord {
    pub time: f64,
    /// sum m_i; immutable weights make this exactly constant.
    pub mass: f64,
    /// Total momentum: sum m_i V_i plus the cell-volume-weighted fluid sum.
    pub momentum: Vec3,
    /// 1/2 sum m_i |V_i|^2.
    pub energy_particles: f64,
    /// 1/2 integral |u|^2 dx.
    pub energy_fluid: f64,
    /// Instantaneous integral |grad u|^2 dx.
    pub dissipation_viscous: f64,
    /// sum m_i |u(X_i) - V_i|^2.
    pub dissipation_drag: f64,
    /// 1/2 sum_{i,j} m_i m_j phi(d_ij) |V_i - V_j|^2, by the double sum.
    pub dissipation_alignment: f64,
    /// Largest particle speed R(t).
    pub support_radius: f64,
    /// R_0 + running quadrature of (max_i |b_i| + |u|_inf).
    pub support_bound_rhs: f64,
    /// M_k = sum m_i (1 + |V_i|^2)^{k/2} for k = 2, 3, 6.
    pub m2: f64,
    pub m3: f64,
    pub m6: f64,
    /// sum m_i |V_i - Vbar|^2 with the mass-weighted mean velocity.
    pub velocity_variance: f64,
    pub picard_iters: usize,
}

impl DiagnosticsRecord {
    pub fn measure(
        time: f64,
        ensemble: &ParticleEnsemble,
        fluid: &FluidState,
        kernel: &KernelSpec,
        support_bound_rhs: f64,
        picard_iters: usize,
    ) -> Self {
        let n = ensemble.len();
        let mass = ensemble.total_mass();
        let momentum = ensemble.momentum() + fluid.grid_integral();
        let energy_particles = ensemble.kinetic_energy();
        let energy_fluid = fluid.energy();
        let dissipation_viscous = viscous_dissipation(fluid);

        let samples = interpolate(fluid, &ensemble.positions);
        let mut dissipation_drag = 0.0;
        for i in 0..n {
            dissipation_drag +=
                ensemble.weights()[i] * (samples[i] - ensemble.velocities[i]).norm_sq();
        }

        let mut dissipation_alignment = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = crate::ensemble::min_image(
                    ensemble.positions[i],
                    ensemble.positions[j],
                    ensemble.box_length,
                )
                .norm();
                let dv = ensemble.velocities[i] - ensemble.velocities[j];
                dissipation_alignment +=
                    ensemble.weights()[i] * ensemble.weights()[j] * kernel.eval(d) * dv.norm_sq();
            }
        }

        let vbar = if mass > 0.0 {
            ensemble.momentum() / mass
        } else {
            Vec3::default()
        };
        let mut velocity_variance = 0.0;
        let (mut m2, mut m3, mut m6) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let w = ensemble.weights()[i];
            let vsq = ensemble.velocities[i].norm_sq();
            let base = 1.0 + vsq;
            m2 += w * base;
            m3 += w * base.powf(1.5);
            m6 += w * base.powi(3);
            velocity_variance += w * (ensemble.velocities[i] - vbar).norm_sq();
        }

        DiagnosticsRecord {
            time,
            mass,
            momentum,
            energy_particles,
            energy_fluid,
            dissipation_viscous,
            dissipation_drag,
            dissipation_alignment,
            support_radius: ensemble.support_radius(),
            support_bound_rhs,
            m2,
            m3,
            m6,
            velocity_variance,
            picard_iters,
        }
    }

    pub fn total_energy(&self) -> f64 {
        self.energy_particles + self.energy_fluid
    }

    fn total_dissipation(&self) -> f64 {
        self.dissipation_alignment + self.dissipation_viscous + self.dissipation_drag
    }
}

#[derive(Debug)]
pub struct EnergyBudget {
    /// residual(T) = E(T) + quadrature of dissipation up to T, minus E(0).
    pub residuals: Vec<f64>,
    /// max |residual| / E(0).
    pub max_normalized: f64,
}

/// Energy-balance residual series by trapezoidal quadrature of the
/// dissipation fields between uniformly spaced records.
pub fn energy_budget(records: &[DiagnosticsRecord]) -> Result<EnergyBudget> {
    if records.len() < 2 {
        return Err(Error::Invalid(
            "energy budget needs at least two records".into(),
        ));
    }
    let spacing = records[1].time - records[0].time;
    for w in records.windows(2) {
        let d = w[1].time - w[0].time;
        if (d - spacing).abs() > 1e-9 * spacing.max(1.0) {
            return Err(Error::Invalid(format!(
                "records not uniformly spaced: gap {d} vs {spacing}"
            )));
        }
    }
    let e0 = records[0].total_energy();
    let mut quad = 0.0;
    let mut residuals = vec![0.0];
    for w in records.windows(2) {
        quad += 0.5 * spacing * (w[0].total_dissipation() + w[1].total_dissipation());
        residuals.push(w[1].total_energy() + quad - e0);
    }
    let max_abs = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let max_normalized = if e0 > 0.0 { max_abs / e0 } else { max_abs };
    Ok(EnergyBudget { residuals, max_normalized })
}

#[derive(Debug)]
pub struct SupportBoundReport {
    pub pass: bool,
    /// bound + slack - R at each record; negative entries are violations.
    pub margins: Vec<f64>,
}

/// Check R(t) <= support_bound_rhs plus the 10 dt (1 + bound) slack at each
/// record. A violation is a reported outcome, not an error.
pub fn support_bound_check(records: &[DiagnosticsRecord], dt: f64) -> SupportBoundReport {
    let mut margins = Vec::with_capacity(records.len());
    let mut pass = true;
    for r in records {
        let slack = 10.0 * dt * (1.0 + r.support_bound_rhs);
        let margin = r.support_bound_rhs + slack - r.support_radius;
        if margin < 0.0 {
            pass = false;
        }
        margins.push(margin);
    }
    SupportBoundReport { pass, margins }
}

#[derive(Debug)]
pub struct MomentGrowthReport {
    pub m3_series: Vec<f64>,
    pub all_finite: bool,
    pub monotone_nonincreasing: bool,
    /// Least-squares slope of log M3 against time (growth-envelope rate);
    /// None when fewer than two records.
    pub log_growth_rate: Option<f64>,
}

/// Finiteness and envelope sanity for the cubic velocity moment. The
/// continuum growth bounds carry unknown constants, so only shape is checked.
pub fn moment_growth_monitor(records: &[DiagnosticsRecord]) -> MomentGrowthReport {
    let m3_series: Vec<f64> = records.iter().map(|r| r.m3).collect();
    let all_finite = m3_series.iter().all(|x| x.is_finite());
    let monotone_nonincreasing = m3_series
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let log_growth_rate = fit_log_slope(
        &records.iter().map(|r| r.time).collect::<Vec<_>>(),
        &m3_series,
    );
    MomentGrowthReport {
        m3_series,
        all_finite,
        monotone_nonincreasing,
        log_growth_rate,
    }
}

/// Least-squares slope of log y against t over entries with y > 0.
fn fit_log_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &y)| y > 0.0 && y.is_finite())
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let st: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let stt: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sty: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * stt - st * st;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sty - st * sy) / denom)
}

#[derive(Debug)]
pub struct WeightedNormSurrogate {
    /// Squared weighted norm of the histogram density.
    pub value: f64,
    pub bins_per_axis: usize,
    pub bin_volume: f64,
    /// Set when the binning is fine enough that the expected particle count
    /// per bin drops below one; the estimate is then dominated by shot noise.
    pub sparse_warning: bool,
}

/// Biased histogram estimate of the squared weighted norm of the empirical
/// phase-space density: a 6-D histogram is formed over the box (positions
/// measured from the box center) and a symmetric velocity range, and the
/// piecewise-constant density is integrated against the weight at bin
/// centers. Coarse by construction; the bin count travels with the value.
pub fn weighted_norm_surrogate(
    ensemble: &ParticleEnsemble,
    weight: &WeightSpec,
    bins: usize,
) -> Result<WeightedNormSurrogate> {
    if bins < 1 {
        return Err(Error::Invalid("bins must be >= 1".into()));
    }
    let n = ensemble.len();
    let l = ensemble.box_length;
    let half = 0.5 * l;

    // velocity range: symmetric box covering the largest component magnitude
    let mut vmax = 0.0f64;
    for v in &ensemble.velocities {
        vmax = vmax.max(v.x.abs()).max(v.y.abs()).max(v.z.abs());
    }
    if vmax == 0.0 {
        vmax = 1.0;
    }
    vmax *= 1.0 + 1e-12; // keep the extreme particle inside the last bin

    let hx = l / bins as f64;
    let hv = 2.0 * vmax / bins as f64;
    let bin_volume = hx.powi(3) * hv.powi(3);

    let clamp = |b: f64| -> usize { (b.floor() as isize).clamp(0, bins as isize - 1) as usize };
    let xbin = |x: f64| -> usize {
        // signed offset from the box center, in [-L/2, L/2)
        let rel = x.rem_euclid(l) - half;
        clamp((rel + half) / hx)
    };
    let vbin = |v: f64| -> usize { clamp((v + vmax) / hv) };

    let mut hist = std::collections::HashMap::<[usize; 6], f64>::new();
    for i in 0..n {
        let p = ensemble.positions[i];
        let v = ensemble.velocities[i];
        let key = [xbin(p.x), xbin(p.y), xbin(p.z), vbin(v.x), vbin(v.y), vbin(v.z)];
        *hist.entry(key).or_insert(0.0) += ensemble.weights()[i];
    }

    let center = |b: usize, h: f64, lo: f64| lo + (b as f64 + 0.5) * h;
    let mut value = 0.0;
    for (key, mass) in &hist {
        let cx = Vec3::new(
            center(key[0], hx, -half),
            center(key[1], hx, -half),
            center(key[2], hx, -half),
        );
        let cv = Vec3::new(
            center(key[3], hv, -vmax),
            center(key[4], hv, -vmax),
            center(key[5], hv, -vmax),
        );
        // density^2 * omega * binvol = mass^2 / binvol * omega
        value += mass * mass / bin_volume * weight.omega(cx.norm_sq(), cv.norm_sq());
    }

    let expected_per_bin = n as f64 / (bins as f64).powi(6);
    Ok(WeightedNormSurrogate {
        value,
        bins_per_axis: bins,
        bin_volume,
        sparse_warning: expected_per_bin < 1.0,
    })
}

#[derive(Debug)]
pub struct FlockingReport {
    pub variance_series: Vec<f64>,
    /// Exponential decay rate fitted over the final half of the run; None
    /// when the tail has fewer than two positive entries.
    pub decay_rate: Option<f64>,
}

/// Velocity-variance series with an exponential fit over the final half.
pub fn flocking_metrics(records: &[DiagnosticsRecord]) -> FlockingReport {
    let variance_series: Vec<f64> = records.iter().map(|r| r.velocity_variance).collect();
    let tail = records.len() / 2;
    let times: Vec<f64> = records[tail..].iter().map(|r| r.time).collect();
    let decay_rate =
        fit_log_slope(&times, &variance_series[tail..]).map(|slope| -slope);
    FlockingReport { variance_series, decay_rate }
}
