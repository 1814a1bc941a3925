//! Particle-grid momentum exchange: cloud-in-cell (trilinear) deposition of
//! the density and momentum moments, the adjoint interpolation of the fluid
//! velocity at particle positions, and assembly of the coupling force
//! g = j - rho u on collocation points.

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::vec3::Vec3;

#[derive(Clone, Debug)]
pub struct DepositedMoments {
    pub grid_n: usize,
    pub box_length: f64,
    /// Density rho = integral f dv, normalized by cell volume.
    pub rho: Vec<f64>,
    /// Momentum density j = integral f v dv, per component.
    pub j: [Vec<f64>; 3],
}

impl DepositedMoments {
    pub fn cell_volume(&self) -> f64 {
        let h = self.box_length / self.grid_n as f64;
        h * h * h
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_volume() * self.rho.iter().sum::<f64>()
    }

    pub fn total_momentum(&self) -> Vec3 {
        let cv = self.cell_volume();
        Vec3::new(
            cv * self.j[0].iter().sum::<f64>(),
            cv * self.j[1].iter().sum::<f64>(),
            cv * self.j[2].iter().sum::<f64>(),
        )
    }
}

/// The eight CIC stencil nodes and weights for a wrapped position.
#[inline]
fn cic_stencil(p: Vec3, n: usize, h: f64) -> [(usize, f64); 8] {
    let sx = p.x / h;
    let sy = p.y / h;
    let sz = p.z / h;
    // positions are wrapped, so the base index is within range
    let ix = (sx as usize).min(n - 1);
    let iy = (sy as usize).min(n - 1);
    let iz = (sz as usize).min(n - 1);
    let fx = sx - ix as f64;
    let fy = sy - iy as f64;
    let fz = sz - iz as f64;
    let xw = [1.0 - fx, fx];
    let yw = [1.0 - fy, fy];
    let zw = [1.0 - fz, fz];
    let xi = [ix, (ix + 1) % n];
    let yi = [iy, (iy + 1) % n];
    let zi = [iz, (iz + 1) % n];
    let mut out = [(0usize, 0.0f64); 8];
    let mut s = 0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                out[s] = ((xi[a] * n + yi[b]) * n + zi[c], xw[a] * yw[b] * zw[c]);
                s += 1;
            }
        }
    }
    out
}

/// Trilinear deposition of mass and momentum onto the grid, periodic wrap at
/// edges, normalized by cell volume.
pub fn deposit(ensemble: &ParticleEnsemble, grid_n: usize) -> DepositedMoments {
    let l = ensemble.box_length;
    let h = l / grid_n as f64;
    let inv_cv = 1.0 / (h * h * h);
    let m = grid_n * grid_n * grid_n;
    let mut rho = vec![0.0; m];
    let mut j = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let w = ensemble.weights();
    for i in 0..ensemble.len() {
        let mi = w[i] * inv_cv;
        let v = ensemble.velocities[i];
        for (node, wgt) in cic_stencil(ensemble.positions[i], grid_n, h) {
            rho[node] += mi * wgt;
            j[0][node] += mi * wgt * v.x;
            j[1][node] += mi * wgt * v.y;
            j[2][node] += mi * wgt * v.z;
        }
    }
    DepositedMoments {
        grid_n,
        box_length: l,
        rho,
        j,
    }
}

/// Trilinear interpolation of the fluid velocity at the given (wrapped)
/// positions, with the same shape function as `deposit`.
pub fn interpolate(fluid: &FluidState, positions: &[Vec3]) -> Vec<Vec3> {
    let n = fluid.grid_n;
    let h = fluid.box_length / n as f64;
    positions
        .iter()
        .map(|&p| {
            let mut u = Vec3::default();
            for (node, wgt) in cic_stencil(p, n, h) {
                u += wgt
                    * Vec3::new(fluid.grid[0][node], fluid.grid[1][node], fluid.grid[2][node]);
            }
            u
        })
        .collect()
}

/// Coupling force g = j - rho u, nodewise on collocation points.
pub fn coupling_force(moments: &DepositedMoments, fluid: &FluidState) -> Result<[Vec<f64>; 3]> {
    if moments.grid_n != fluid.grid_n {
        return Err(Error::LengthMismatch(format!(
            "moments on {}^3 grid, fluid on {}^3",
            moments.grid_n, fluid.grid_n
        )));
    }
    let m = moments.rho.len();
    let mut g = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    for c in 0..3 {
        for i in 0..m {
            g[c][i] = moments.j[c][i] - moments.rho[i] * fluid.grid[c][i];
        }
    }
    Ok(g)
}
