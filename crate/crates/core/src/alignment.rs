//! Nonlocal alignment structures: the kernel-weighted local mass a_i and
//! momentum b_i at each particle, from which the alignment force factors as
//! L_i = b_i - a_i v_i. The naive O(N^2) pair loop is the reference
//! semantics; a truncated cell-list path is available as an opt-in.

use crate::ensemble::{min_image, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::vec3::Vec3;

#[derive(Clone, Debug)]
pub struct AlignmentFields {
    /// Kernel-weighted local mass at each particle.
    pub a: Vec<f64>,
    /// Kernel-weighted local momentum at each particle.
    pub b: Vec<Vec3>,
}

impl AlignmentFields {
    pub fn max_b_norm(&self) -> f64 {
        self.b.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }
}

/// a_i = sum_j m_j phi(d_ij), b_i = sum_j m_j phi(d_ij) v_j with the
/// minimum-image distance. The self term is included; it cancels in L.
pub fn compute_fields(ensemble: &ParticleEnsemble, kernel: &KernelSpec) -> AlignmentFields {
    let n = ensemble.len();
    assert!(n > 0, "compute_fields requires a nonempty ensemble");
    let l = ensemble.box_length;
    let w = ensemble.weights();
    let mut a = vec![0.0; n];
    let mut b = vec![Vec3::default(); n];
    for i in 0..n {
        let xi = ensemble.positions[i];
        let mut ai = 0.0;
        let mut bi = Vec3::default();
        // fixed j-order for reproducible summation
        for j in 0..n {
            let d = min_image(xi, ensemble.positions[j], l).norm();
            let phi = kernel.eval(d) * w[j];
            ai += phi;
            bi += phi * ensemble.velocities[j];
        }
        a[i] = ai;
        b[i] = bi;
    }
    AlignmentFields { a, b }
}

/// L_i = b_i - a_i v_i.
pub fn alignment_force(fields: &AlignmentFields, velocities: &[Vec3]) -> Vec<Vec3> {
    assert_eq!(fields.a.len(), velocities.len());
    fields
        .a
        .iter()
        .zip(&fields.b)
        .zip(velocities)
        .map(|((&a, &b), &v)| b - a * v)
        .collect()
}

/// Cell-list evaluation of the same fields with the kernel truncated at
/// `cutoff`. The truncation error on a_i is bounded by phi(cutoff) * M.
pub fn compute_fields_celllist(
    ensemble: &ParticleEnsemble,
    kernel: &KernelSpec,
    cutoff: f64,
) -> Result<AlignmentFields> {
    let l = ensemble.box_length;
    if !(cutoff > 0.0 && cutoff <= l / 2.0) {
        return Err(Error::Invalid(format!(
            "cell-list cutoff must lie in (0, L/2] = (0, {}], got {cutoff} \
             (beyond L/2 the minimum image is ambiguous)",
            l / 2.0
        )));
    }
    let n = ensemble.len();
    let w = ensemble.weights();
    let cells_per_axis = ((l / cutoff).floor() as usize).max(1);
    let cell_size = l / cells_per_axis as f64;
    let ncells = cells_per_axis * cells_per_axis * cells_per_axis;

    let cell_of = |p: Vec3| -> usize {
        let ix = ((p.x / cell_size) as usize).min(cells_per_axis - 1);
        let iy = ((p.y / cell_size) as usize).min(cells_per_axis - 1);
        let iz = ((p.z / cell_size) as usize).min(cells_per_axis - 1);
        (ix * cells_per_axis + iy) * cells_per_axis + iz
    };

    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); ncells];
    for i in 0..n {
        cells[cell_of(ensemble.positions[i])].push(i);
    }

    // Precompute the (sorted, deduplicated) neighbor-cell lists once; with
    // fewer than 3 cells per axis the 27-stencil collapses onto itself.
    let neighbors: Vec<Vec<usize>> = (0..ncells)
        .map(|c| {
            let iz = c % cells_per_axis;
            let iy = (c / cells_per_axis) % cells_per_axis;
            let ix = c / (cells_per_axis * cells_per_axis);
            let mut out = Vec::with_capacity(27);
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dz in -1i64..=1 {
                        let m = cells_per_axis as i64;
                        let jx = (ix as i64 + dx).rem_euclid(m) as usize;
                        let jy = (iy as i64 + dy).rem_euclid(m) as usize;
                        let jz = (iz as i64 + dz).rem_euclid(m) as usize;
                        out.push((jx * cells_per_axis + jy) * cells_per_axis + jz);
                    }
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();

    let mut a = vec![0.0; n];
    let mut b = vec![Vec3::default(); n];
    for i in 0..n {
        let xi = ensemble.positions[i];
        let mut ai = 0.0;
        let mut bi = Vec3::default();
        for &nc in &neighbors[cell_of(xi)] {
            for &j in &cells[nc] {
                let d = min_image(xi, ensemble.positions[j], l).norm();
                if d > cutoff {
                    continue;
                }
                let phi = kernel.eval(d) * w[j];
                ai += phi;
                bi += phi * ensemble.velocities[j];
            }
        }
        a[i] = ai;
        b[i] = bi;
    }
    Ok(AlignmentFields { a, b })
}
