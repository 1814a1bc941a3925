//! The particle ensemble: an empirical-measure discretization of the
//! distribution function. Weights are fixed at initialization and never
//! mutated afterwards (discrete mass conservation and positivity).

use crate::config::{ParticleInit, SimConfig};
use crate::error::Result;
use crate::vec3::Vec3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    weights: Vec<f64>,
    pub box_length: f64,
    /// Measured velocity-support radius at t = 0, kept for the support-bound
    /// diagnostic.
    pub r0: f64,
}

/// Wrap a coordinate into [0, L).
pub fn wrap(x: f64, box_length: f64) -> f64 {
    let w = x.rem_euclid(box_length);
    // rem_euclid can return exactly L when x is a tiny negative number
    if w >= box_length {
        0.0
    } else {
        w
    }
}

pub fn wrap_vec(v: Vec3, box_length: f64) -> Vec3 {
    Vec3::new(wrap(v.x, box_length), wrap(v.y, box_length), wrap(v.z, box_length))
}

/// Minimum-image displacement a - b on the periodic box.
pub fn min_image(a: Vec3, b: Vec3, box_length: f64) -> Vec3 {
    let mi = |d: f64| d - box_length * (d / box_length).round();
    Vec3::new(mi(a.x - b.x), mi(a.y - b.y), mi(a.z - b.z))
}

impl ParticleEnsemble {
    pub fn new(
        positions: Vec<Vec3>,
        velocities: Vec<Vec3>,
        weights: Vec<f64>,
        box_length: f64,
    ) -> Self {
        assert_eq!(positions.len(), velocities.len());
        assert_eq!(positions.len(), weights.len());
        assert!(weights.iter().all(|&w| w >= 0.0), "weights must be nonnegative");
        let positions = positions.into_iter().map(|p| wrap_vec(p, box_length)).collect();
        let mut ens = ParticleEnsemble {
            positions,
            velocities,
            weights,
            box_length,
            r0: 0.0,
        };
        ens.r0 = ens.support_radius();
        ens
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn momentum(&self) -> Vec3 {
        let mut p = Vec3::default();
        for (w, v) in self.weights.iter().zip(&self.velocities) {
            p += *w * *v;
        }
        p
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.velocities)
            .map(|(w, v)| 0.5 * w * v.norm_sq())
            .sum()
    }

    /// R(t): the largest particle speed present.
    pub fn support_radius(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Successor ensemble with updated phase-space coordinates and the same
    /// weights and recorded r0.
    pub fn advanced(&self, positions: Vec<Vec3>, velocities: Vec<Vec3>) -> Self {
        assert_eq!(positions.len(), self.len());
        assert_eq!(velocities.len(), self.len());
        let positions = positions
            .into_iter()
            .map(|p| wrap_vec(p, self.box_length))
            .collect();
        ParticleEnsemble {
            positions,
            velocities,
            weights: self.weights.clone(),
            box_length: self.box_length,
            r0: self.r0,
        }
    }
}

/// Sample a unit vector uniformly on the sphere.
fn unit_dir<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        // Box-Muller-free rejection from the cube keeps the sampling simple
        // and exactly reproducible.
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm_sq();
        if n > 1e-12 && n <= 1.0 {
            return v / n.sqrt();
        }
    }
}

/// Build the initial ensemble from the config's sampling recipe. Positions
/// are uniform in the box for every preset; equal weights M/N.
pub fn init_ensemble(config: &SimConfig) -> Result<ParticleEnsemble> {
    let n = config.particle_count;
    let l = config.box_length;
    let mut rng = ChaCha12Rng::seed_from_u64(config.rng_seed);

    let positions: Vec<Vec3> = (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(0.0..l),
                rng.random_range(0.0..l),
                rng.random_range(0.0..l),
            )
        })
        .collect();

    let velocities: Vec<Vec3> = match config.init_particles {
        ParticleInit::AtRest => vec![Vec3::default(); n],
        ParticleInit::TwoCluster => (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    Vec3::new(1.0, 0.0, 0.0)
                } else {
                    Vec3::new(-1.0, 0.0, 0.0)
                }
            })
            .collect(),
        ParticleInit::UniformBall { r0 } => (0..n)
            .map(|_| {
                let r = r0 * rng.random_range(0.0..1.0f64).cbrt();
                unit_dir(&mut rng) * r
            })
            .collect(),
    };

    let weights = vec![config.total_mass / n as f64; n];
    Ok(ParticleEnsemble::new(positions, velocities, weights, l))
}
