//! Three-dimensional FFT helper on an n^3 collocation grid, built from 1-D
//! rustfft plans. Forward transforms are normalized by n^3 so that spectral
//! coefficients are Fourier-series amplitudes: u(x) = sum_k u_hat_k e^{i kappa.x}.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    fn transform_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        // axis 2 (contiguous)
        for row in data.chunks_exact_mut(n) {
            fft.process(row);
        }
        // axes 1 and 0 via gather/scatter
        let mut line = vec![Complex64::default(); n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    line[j] = data[self.idx(i, j, k)];
                }
                fft.process(&mut line);
                for j in 0..n {
                    data[self.idx(i, j, k)] = line[j];
                }
            }
        }
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    line[i] = data[self.idx(i, j, k)];
                }
                fft.process(&mut line);
                for i in 0..n {
                    data[self.idx(i, j, k)] = line[i];
                }
            }
        }
    }

    /// Real grid field -> normalized spectral coefficients.
    pub fn forward(&self, grid: &[f64]) -> Vec<Complex64> {
        assert_eq!(grid.len(), self.n * self.n * self.n);
        let mut data: Vec<Complex64> =
            grid.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform_axes(&mut data, &self.forward);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        for c in &mut data {
            *c *= scale;
        }
        data
    }

    /// Spectral coefficients -> real grid field (imaginary parts discarded;
    /// they are at roundoff for conjugate-symmetric input).
    pub fn inverse(&self, spectral: &[Complex64]) -> Vec<f64> {
        assert_eq!(spectral.len(), self.n * self.n * self.n);
        let mut data = spectral.to_vec();
        self.transform_axes(&mut data, &self.inverse);
        data.into_iter().map(|c| c.re).collect()
    }
}

/// Signed integer mode index for position i on an n-point axis:
/// 0, 1, ..., n/2, -(n/2 - 1), ..., -1.
pub fn mode_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_machine_precision() {
        let n = 8;
        let fft = Fft3::new(n);
        let grid: Vec<f64> = (0..n * n * n).map(|i| ((i * 37 + 5) % 101) as f64 / 101.0).collect();
        let spec = fft.forward(&grid);
        let back = fft.inverse(&spec);
        for (a, b) in grid.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cosine_lands_on_two_modes() {
        let n = 8;
        let fft = Fft3::new(n);
        let mut grid = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    grid[fft.idx(i, j, k)] = (x).cos();
                }
            }
        }
        let spec = fft.forward(&grid);
        // cos kx -> 1/2 at k = +-1
        assert!((spec[fft.idx(1, 0, 0)].re - 0.5).abs() < 1e-12);
        assert!((spec[fft.idx(n - 1, 0, 0)].re - 0.5).abs() < 1e-12);
        assert!(spec[fft.idx(0, 0, 0)].norm() < 1e-12);
    }
}
