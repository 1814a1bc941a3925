//! Characteristic transport: dX/dt = V, dV/dt = L_i + (u(X_i) - V_i),
//! advanced with a midpoint (Heun) step. Alignment fields are re-evaluated
//! at each stage; the fluid samples stay frozen over the step.

use crate::alignment::{alignment_force, compute_fields};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::vec3::Vec3;

/// Per-particle force split, mostly useful for diagnostics and tests.
#[derive(Clone, Copy, Debug)]
pub struct ForceSample {
    pub alignment: Vec3,
    pub drag: Vec3,
}

/// Right-hand side of the characteristic system at the given phase-space
/// state. `fluid_at_particles` are the frozen fluid samples, index-aligned
/// with the ensemble (all zero in pure-kinetic mode). `drag_enabled = false`
/// is a test-harness switch that removes the (u - v) relaxation entirely.
pub fn rhs(
    ensemble: &ParticleEnsemble,
    fluid_at_particles: &[Vec3],
    kernel: &KernelSpec,
    drag_enabled: bool,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let n = ensemble.len();
    if fluid_at_particles.len() != n {
        return Err(Error::LengthMismatch(format!(
            "fluid samples: {} particles but {} samples",
            n,
            fluid_at_particles.len()
        )));
    }
    let fields = compute_fields(ensemble, kernel);
    let lf = alignment_force(&fields, &ensemble.velocities);
    let dxdt = ensemble.velocities.clone();
    let dvdt: Vec<Vec3> = (0..n)
        .map(|i| {
            if drag_enabled {
                lf[i] + (fluid_at_particles[i] - ensemble.velocities[i])
            } else {
                lf[i]
            }
        })
        .collect();
    Ok((dxdt, dvdt))
}

/// One Heun (midpoint/trapezoid) step of the particle system with frozen
/// fluid samples. Positions are re-wrapped; weights untouched.
pub fn step_rk2(
    ensemble: &ParticleEnsemble,
    fluid_at_particles: &[Vec3],
    kernel: &KernelSpec,
    dt: f64,
    drag_enabled: bool,
) -> Result<ParticleEnsemble> {
    let n = ensemble.len();
    let (k1x, k1v) = rhs(ensemble, fluid_at_particles, kernel, drag_enabled)?;

    let stage_pos: Vec<Vec3> = (0..n).map(|i| ensemble.positions[i] + dt * k1x[i]).collect();
    let stage_vel: Vec<Vec3> = (0..n).map(|i| ensemble.velocities[i] + dt * k1v[i]).collect();
    let stage = ensemble.advanced(stage_pos, stage_vel);
    let (k2x, k2v) = rhs(&stage, fluid_at_particles, kernel, drag_enabled)?;

    let new_pos: Vec<Vec3> = (0..n)
        .map(|i| ensemble.positions[i] + 0.5 * dt * (k1x[i] + k2x[i]))
        .collect();
    let new_vel: Vec<Vec3> = (0..n)
        .map(|i| ensemble.velocities[i] + 0.5 * dt * (k1v[i] + k2v[i]))
        .collect();
    let out = ensemble.advanced(new_pos, new_vel);

    for i in 0..n {
        if !out.positions[i].is_finite() || !out.velocities[i].is_finite() {
            return Err(Error::NonFinite(format!(
                "particle {i} after RK2 step: X = {:?}, V = {:?} (dt = {dt})",
                out.positions[i], out.velocities[i]
            )));
        }
    }
    Ok(out)
}

/// R(t), the largest particle speed.
pub fn support_radius(ensemble: &ParticleEnsemble) -> f64 {
    assert!(!ensemble.is_empty());
    ensemble.support_radius()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::ParticleEnsemble;

    const L: f64 = 10.0;

    fn single(v: Vec3) -> ParticleEnsemble {
        ParticleEnsemble::new(vec![Vec3::new(5.0, 5.0, 5.0)], vec![v], vec![1.0], L)
    }

    fn pair(v1: Vec3, v2: Vec3) -> ParticleEnsemble {
        ParticleEnsemble::new(
            vec![Vec3::new(4.0, 5.0, 5.0), Vec3::new(6.0, 5.0, 5.0)],
            vec![v1, v2],
            vec![0.5, 0.5],
            L,
        )
    }

    #[test]
    fn single_particle_rhs_is_minus_v() {
        let e = single(Vec3::new(1.0, -2.0, 0.5));
        let (dx, dv) = rhs(&e, &[Vec3::default()], &KernelSpec::RationalDecay, true).unwrap();
        assert_eq!(dx[0], e.velocities[0]);
        assert!((dv[0] + e.velocities[0]).norm() < 1e-15);
    }

    #[test]
    fn consensus_with_matching_fluid_is_equilibrium() {
        let vbar = Vec3::new(0.4, 0.1, -0.3);
        let e = pair(vbar, vbar);
        let (_, dv) = rhs(&e, &[vbar, vbar], &KernelSpec::RationalDecay, true).unwrap();
        for d in dv {
            assert!(d.norm() < 1e-15);
        }
    }

    #[test]
    fn two_body_hand_value() {
        // phi == 1, weights 1/2, u == 0, velocities +-1 along x:
        // dV1/dt = (b - a V1) - V1 = (0 - 1) - 1 = -2
        let e = pair(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let zeros = [Vec3::default(); 2];
        let (_, dv) = rhs(&e, &zeros, &KernelSpec::Constant { c: 1.0 }, true).unwrap();
        assert!((dv[0] - Vec3::new(-2.0, 0.0, 0.0)).norm() < 1e-14);
        assert!((dv[1] - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn length_mismatch_is_error() {
        let e = pair(Vec3::default(), Vec3::default());
        assert!(rhs(&e, &[Vec3::default()], &KernelSpec::RationalDecay, true).is_err());
    }

    #[test]
    fn zero_dt_leaves_state_unchanged() {
        let e = single(Vec3::new(1.0, 0.0, 0.0));
        let out = step_rk2(&e, &[Vec3::default()], &KernelSpec::RationalDecay, 0.0, true).unwrap();
        assert_eq!(out.positions[0], e.positions[0]);
        assert_eq!(out.velocities[0], e.velocities[0]);
    }

    #[test]
    fn drag_decay_matches_exponential_at_rk2_order() {
        // closed-form linear-ODE oracle: V(t) = e^{-t}
        let run = |dt: f64| -> f64 {
            let mut e = single(Vec3::new(1.0, 0.0, 0.0));
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                e = step_rk2(&e, &[Vec3::default()], &KernelSpec::RationalDecay, dt, true).unwrap();
            }
            e.velocities[0].x
        };
        let exact = (-1.0f64).exp();
        let err1 = (run(0.01) - exact).abs();
        let err2 = (run(0.005) - exact).abs();
        assert!(err1 < 1e-4, "err at dt=0.01: {err1}");
        let ratio = err1 / err2;
        assert!((3.7..=4.3).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn two_body_alignment_only_relative_decay() {
        // drag off, phi == 1, total mass 1: (V1 - V2)' = -(V1 - V2)
        let run = |dt: f64, t: f64| -> f64 {
            let mut e = pair(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
            let zeros = [Vec3::default(); 2];
            let steps = (t / dt).round() as usize;
            for _ in 0..steps {
                e = step_rk2(&e, &zeros, &KernelSpec::Constant { c: 1.0 }, dt, false).unwrap();
            }
            (e.velocities[0] - e.velocities[1]).norm()
        };
        let exact = 2.0 * (-1.0f64).exp();
        let err1 = (run(0.01, 1.0) - exact).abs();
        let err2 = (run(0.005, 1.0) - exact).abs();
        assert!(err1 < 2e-4, "err {err1}");
        assert!((3.7..=4.3).contains(&(err1 / err2)), "ratio {}", err1 / err2);
    }

    #[test]
    fn support_radius_is_max_speed() {
        let e = pair(Vec3::new(3.0, 4.0, 0.0), Vec3::default());
        assert_eq!(support_radius(&e), 5.0);
        let rest = pair(Vec3::default(), Vec3::default());
        assert_eq!(support_radius(&rest), 0.0);
    }

    #[test]
    fn pure_drag_step_contracts_support() {
        let mut e = pair(Vec3::new(0.6, -0.8, 0.0), Vec3::new(0.1, 0.0, 0.3));
        let r_before = support_radius(&e);
        let zeros = [Vec3::default(); 2];
        // near-zero kernel isolates the drag
        e = step_rk2(&e, &zeros, &KernelSpec::Constant { c: 1e-12 }, 0.05, true).unwrap();
        assert!(support_radius(&e) <= r_before);
    }

    #[test]
    fn pure_kinetic_momentum_conserved_without_drag() {
        // alignment momentum neutrality + RK2 consistency over 10^3 steps
        let mut e = ParticleEnsemble::new(
            vec![
                Vec3::new(1.0, 2.0, 3.0),
                Vec3::new(4.0, 5.0, 6.0),
                Vec3::new(7.0, 8.0, 9.0),
                Vec3::new(2.0, 7.0, 4.0),
            ],
            vec![
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(-0.5, 0.5, 0.0),
                Vec3::new(0.0, -0.5, 0.5),
                Vec3::new(-0.5, 0.0, -0.5),
            ],
            vec![0.25; 4],
            L,
        );
        let p0 = e.momentum();
        let zeros = [Vec3::default(); 4];
        for _ in 0..1000 {
            e = step_rk2(&e, &zeros, &KernelSpec::RationalDecay, 0.01, false).unwrap();
        }
        assert!((e.momentum() - p0).norm() <= 1e-10);
    }

    #[test]
    fn weights_never_change() {
        let e = pair(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let w0 = e.weights().to_vec();
        let out = step_rk2(&e, &[Vec3::default(); 2], &KernelSpec::RationalDecay, 0.1, true).unwrap();
        assert_eq!(out.weights(), &w0[..]);
    }
}
