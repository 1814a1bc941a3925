//! Fluid state on the periodic grid: collocation values, spectral
//! coefficients (kept consistent), and the pressure-gradient byproduct of
//! the last projection.

use crate::config::{FluidInit, SimConfig};
use crate::error::Result;
use crate::fft::{mode_index, Fft3};
use crate::stokes;
use crate::vec3::Vec3;
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct FluidState {
    pub grid_n: usize,
    pub box_length: f64,
    /// Spectral coefficients per component, conjugate-symmetric.
    pub spectral: [Vec<Complex64>; 3],
    /// Collocation values per component, consistent with `spectral`.
    pub grid: [Vec<f64>; 3],
    /// Pressure-gradient diagnostic from the last projection/step.
    pub pressure_gradient: [Vec<f64>; 3],
}

impl FluidState {
    pub fn zero(grid_n: usize, box_length: f64) -> Self {
        let m = grid_n * grid_n * grid_n;
        FluidState {
            grid_n,
            box_length,
            spectral: [vec![Complex64::default(); m], vec![Complex64::default(); m], vec![
                Complex64::default();
                m
            ]],
            grid: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            pressure_gradient: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
        }
    }

    pub fn from_grid(grid: [Vec<f64>; 3], grid_n: usize, box_length: f64, fft: &Fft3) -> Self {
        let spectral = [
            fft.forward(&grid[0]),
            fft.forward(&grid[1]),
            fft.forward(&grid[2]),
        ];
        let m = grid_n * grid_n * grid_n;
        FluidState {
            grid_n,
            box_length,
            spectral,
            grid,
            pressure_gradient: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
        }
    }

    /// Refresh collocation values from the spectral representation.
    pub fn sync_grid(&mut self, fft: &Fft3) {
        for c in 0..3 {
            self.grid[c] = fft.inverse(&self.spectral[c]);
        }
    }

    /// Physical wavevector kappa = 2 pi k / L at linear index `idx`.
    pub fn wavevector(&self, idx: usize) -> Vec3 {
        let n = self.grid_n;
        let k = idx % n;
        let j = (idx / n) % n;
        let i = idx / (n * n);
        let scale = 2.0 * std::f64::consts::PI / self.box_length;
        Vec3::new(
            scale * mode_index(i, n) as f64,
            scale * mode_index(j, n) as f64,
            scale * mode_index(k, n) as f64,
        )
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.box_length / self.grid_n as f64;
        h * h * h
    }

    /// Cell-volume-weighted integral of u over the box (per component).
    pub fn grid_integral(&self) -> Vec3 {
        let cv = self.cell_volume();
        Vec3::new(
            cv * self.grid[0].iter().sum::<f64>(),
            cv * self.grid[1].iter().sum::<f64>(),
            cv * self.grid[2].iter().sum::<f64>(),
        )
    }

    /// 1/2 integral |u|^2 dx via the grid values.
    pub fn energy(&self) -> f64 {
        let cv = self.cell_volume();
        0.5 * cv
            * (0..3)
                .map(|c| self.grid[c].iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
    }

    /// L-infinity norm of |u| over collocation points.
    pub fn max_norm(&self) -> f64 {
        let m = self.grid[0].len();
        (0..m)
            .map(|i| {
                Vec3::new(self.grid[0][i], self.grid[1][i], self.grid[2][i]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest relative spectral divergence max_k |kappa . u_hat| / |u_hat|.
    pub fn max_relative_divergence(&self) -> f64 {
        let m = self.spectral[0].len();
        let mut worst = 0.0f64;
        for idx in 1..m {
            let kap = self.wavevector(idx);
            let u = [
                self.spectral[0][idx],
                self.spectral[1][idx],
                self.spectral[2][idx],
            ];
            let mag = (u[0].norm_sqr() + u[1].norm_sqr() + u[2].norm_sqr()).sqrt();
            if mag < 1e-300 {
                continue;
            }
            let div = (u[0] * kap.x + u[1] * kap.y + u[2] * kap.z).norm()
                / (kap.norm() * mag);
            worst = worst.max(div);
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.spectral
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Build the initial fluid field from the config preset and project it onto
/// divergence-free fields once (compatibility condition).
pub fn init_fluid(config: &SimConfig, fft: &Fft3) -> Result<FluidState> {
    let n = config.grid_n;
    let l = config.box_length;
    let m = n * n * n;
    let h = l / n as f64;
    let kap = 2.0 * std::f64::consts::PI / l;

    let mut grid = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    match config.init_fluid {
        FluidInit::Zero => {}
        FluidInit::SingleMode { k, amp } => {
            for i in 0..n {
                for j in 0..n {
                    for kk in 0..n {
                        let x = Vec3::new(i as f64 * h, j as f64 * h, kk as f64 * h);
                        let phase = kap * (k[0] as f64 * x.x + k[1] as f64 * x.y + k[2] as f64 * x.z);
                        let idx = (i * n + j) * n + kk;
                        grid[0][idx] = amp[0] * phase.cos();
                        grid[1][idx] = amp[1] * phase.cos();
                        grid[2][idx] = amp[2] * phase.cos();
                    }
                }
            }
        }
        FluidInit::TaylorGreen { amp } => {
            for i in 0..n {
                for j in 0..n {
                    for kk in 0..n {
                        let (x, y, z) = (kap * i as f64 * h, kap * j as f64 * h, kap * kk as f64 * h);
                        let idx = (i * n + j) * n + kk;
                        grid[0][idx] = amp * x.cos() * y.sin() * z.sin();
                        grid[1][idx] = -amp * x.sin() * y.cos() * z.sin();
                        grid[2][idx] = 0.0;
                    }
                }
            }
        }
    }

    let mut fluid = FluidState::from_grid(grid, n, l, fft);
    stokes::project_state(&mut fluid);
    fluid.sync_grid(fft);
    Ok(fluid)
}
