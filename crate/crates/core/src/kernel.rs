//! Interaction kernels. A kernel must be positive, non-increasing, C^1, with
//! both |phi| and |phi'| bounded by 1; this is checked numerically by a dense
//! scan when the kernel is registered.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// phi(r) = 1 / (1 + r^2). The derivative peaks at r = 1/sqrt(3) with
    /// |phi'| = 3 sqrt(3) / 8, below the unit bound.
    RationalDecay,
    /// phi(r) = c for a constant c in (0, 1].
    Constant { c: f64 },
}

impl KernelSpec {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::RationalDecay => 1.0 / (1.0 + r * r),
            KernelSpec::Constant { c } => c,
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::RationalDecay => {
                let d = 1.0 + r * r;
                -2.0 * r / (d * d)
            }
            KernelSpec::Constant { .. } => 0.0,
        }
    }

    /// Dense-scan registration check of the kernel constraints on
    /// r in [0, 100]: positivity, non-increase, |phi| <= 1, |phi'| <= 1.
    pub fn validate(&self) -> Result<()> {
        if let KernelSpec::Constant { c } = *self {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::Kernel(format!(
                    "constant kernel requires c in (0, 1], got {c}"
                )));
            }
        }
        let steps = 1_000_000usize;
        let r_max = 100.0;
        let mut prev = self.eval(0.0);
        for i in 0..=steps {
            let r = r_max * i as f64 / steps as f64;
            let p = self.eval(r);
            let dp = self.deriv(r);
            if !(p > 0.0) {
                return Err(Error::Kernel(format!("phi({r}) = {p} is not positive")));
            }
            if p > 1.0 + 1e-12 {
                return Err(Error::Kernel(format!("phi({r}) = {p} exceeds 1")));
            }
            if dp.abs() > 1.0 + 1e-12 {
                return Err(Error::Kernel(format!("|phi'({r})| = {} exceeds 1", dp.abs())));
            }
            if p > prev + 1e-12 {
                return Err(Error::Kernel(format!("phi is increasing near r = {r}")));
            }
            prev = p;
        }
        Ok(())
    }
}
