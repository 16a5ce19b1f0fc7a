//! Interpolated `h` for hot loops.
//!
//! Nodes are uniform in `u = √|x|`; in that variable `h` is smooth at the
//! origin for every catalog model (`h ≈ u²/σ²` with a Gaussian part and
//! `h ∝ u^{2(α-1)}` for stable processes).

use std::sync::Arc;

use rayon::prelude::*;

use super::{HFunction, ZeroResolvent};
use crate::error::{Error, Result};
use crate::models::SecondMoment;

/// Piecewise cubic Hermite interpolant of `h` on `[-x_max, x_max]`,
/// falling back to the exact evaluator outside that range.
#[derive(Debug, Clone)]
pub struct HTable {
    source: Arc<HFunction>,
    du: f64,
    x_max: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HTable {
    /// Tabulates `h` at `u = 0, du, 2du, ...` up to `√x_max`.
    pub fn build(source: Arc<HFunction>, x_max: f64, du: f64) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite() && du > 0.0 && du < x_max.sqrt()) {
            return Err(Error::InvalidParameter(format!(
                "table range {x_max} with step {du} is not usable"
            )));
        }
        let n = (x_max.sqrt() / du).ceil() as usize;
        let values = (0..=n)
            .into_par_iter()
            .map(|i| {
                let u = i as f64 * du;
                source.h(u * u)
            })
            .collect::<Result<Vec<f64>>>()?;
        let slopes = finite_difference_slopes(&values, du);
        let u_max = n as f64 * du;
        Ok(HTable {
            source,
            du,
            x_max: u_max * u_max,
            values,
            slopes,
        })
    }

    pub fn source(&self) -> &Arc<HFunction> {
        &self.source
    }

    /// Upper end of the tabulated range in `|x|`.
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Interpolated value, or `None` outside the table.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let ax = x.abs();
        if !(ax <= self.x_max) {
            return None;
        }
        let s = ax.sqrt() / self.du;
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.du, self.slopes[i + 1] * self.du);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        Some(v.max(0.0))
    }
}

fn finite_difference_slopes(v: &[f64], du: f64) -> Vec<f64> {
    let n = v.len();
    let mut s = vec![0.0; n];
    if n == 2 {
        let d = (v[1] - v[0]) / du;
        return vec![d, d];
    }
    for i in 1..n - 1 {
        s[i] = (v[i + 1] - v[i - 1]) / (2.0 * du);
    }
    s[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * du);
    s[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * du);
    s
}

impl ZeroResolvent for HTable {
    fn h(&self, x: f64) -> Result<f64> {
        match self.interpolate(x) {
            Some(v) => Ok(v),
            None => self.source.h(x),
        }
    }

    fn second_moment(&self) -> SecondMoment {
        self.source.second_moment()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    #[test]
    fn bm_table_is_exact_for_quadratic_in_u() {
        let hf = Arc::new(HFunction::new(ModelSpec::standard_bm()));
        let t = HTable::build(hf, 4.0, 0.25).unwrap();
        for x in [0.0, 0.1, -0.7, 1.3, 3.99] {
            assert!((t.h(x).unwrap() - f64::abs(x)).abs() < 1e-6, "{x}");
        }
        // outside the table
        assert!((t.h(6.0).unwrap() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn jump_model_table_matches_direct() {
        let hf = Arc::new(HFunction::new(ModelSpec::brownian_with_jumps(1.0, 2.0, 0.5).unwrap()));
        let t = HTable::build(hf.clone(), 2.0, 0.0125).unwrap();
        for x in [0.013, 0.4, -1.1, 1.77] {
            let d = hf.h(x).unwrap();
            assert!((t.h(x).unwrap() - d).abs() < 1e-7, "{x}: {} vs {d}", t.h(x).unwrap());
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let hf = Arc::new(HFunction::new(ModelSpec::standard_bm()));
        assert!(HTable::build(hf, -1.0, 0.1).is_err());
    }
}
