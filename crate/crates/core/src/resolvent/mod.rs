//! Resolvent densities `r_q`, their differences `h_q`, and the renormalized
//! zero resolvent `h = lim_{q→0} h_q`.

mod fourier;
mod table;

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, SecondMoment};
use crate::quadrature::QuadValue;
use fourier::{transform, Kernel};

pub use table::HTable;

/// Beyond this `|x|` the function `h` is evaluated from its far-field form
/// (self-similar models use their exact scaling law beyond `|x| = 16`).
pub const FAR_FIELD_THRESHOLD: f64 = 1e6;
const FAR_FIELD_ANCHOR: f64 = 1e3;
const SELF_SIMILAR_ANCHOR: f64 = 16.0;

/// Tolerances and cut-off policy for the Fourier quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// The analytic tail starts where `Ψ(λ) ≥ tail_ratio·(q + shift)`.
    pub tail_ratio: f64,
    /// Minimum number of radians of `ωλ` covered by explicit panels.
    pub tail_phase: f64,
    /// Largest number of half-period panels before the call is refused.
    pub max_panels: usize,
    /// Cap on adaptive subdivisions.
    pub max_segments: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            tail_ratio: 1e2,
            tail_phase: 30.0,
            max_panels: 2_000_000,
            max_segments: 4_000_000,
        }
    }
}

impl QuadratureConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.tail_ratio >= 10.0
            && self.tail_phase > 0.0
            && self.max_panels > 0
            && self.max_segments > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad quadrature config {self:?}")))
        }
    }
}

/// Geometric `q`-grid and stopping rule for the `q → 0` limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtrapolationConfig {
    pub q0: f64,
    /// Grid is `q0·2^{-k}` for `k = 0..=steps`.
    pub steps: usize,
    /// Declared converged when two successive estimates differ by less than
    /// `stop_tol·max(1, |h|)` twice in a row.
    pub stop_tol: f64,
    /// Two-level Richardson acceleration using the model's known error
    /// exponent.
    pub accelerate: bool,
}

impl Default for ExtrapolationConfig {
    fn default() -> Self {
        ExtrapolationConfig {
            q0: 1.0,
            steps: 50,
            stop_tol: 1e-10,
            accelerate: true,
        }
    }
}

impl ExtrapolationConfig {
    fn validate(&self) -> Result<()> {
        if self.q0 > 0.0 && self.q0.is_finite() && self.steps >= 3 && self.stop_tol > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad extrapolation config {self:?}")))
        }
    }
}

/// An evaluation of `h` with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HValue {
    pub value: f64,
    /// Last Cauchy gap plus the quadrature error of the last iterate.
    pub err_estimate: f64,
    /// Number of grid points consumed.
    pub steps: usize,
    /// Smallest `q` used.
    pub q_final: f64,
    /// Set when the value came from the far-field form instead of quadrature.
    pub far_field: bool,
}

/// Anything that can supply the renormalized zero resolvent `h`.
pub trait ZeroResolvent: Sync {
    fn h(&self, x: f64) -> Result<f64>;

    fn second_moment(&self) -> SecondMoment;

    /// `h(x) + γx/m²`.
    fn h_gamma(&self, gamma: f64, x: f64) -> Result<f64> {
        check_gamma(gamma)?;
        Ok(self.h(x)? + gamma * x * self.second_moment().inverse())
    }

    /// `h^B(a) = h(a) + h(-a)`.
    fn h_b(&self, a: f64) -> Result<f64> {
        Ok(self.h(a)? + self.h(-a)?)
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gamma must lie in [-1, 1], got {gamma}")))
    }
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("q must be positive, got {q}")))
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("x must be finite, got {x}")))
    }
}

/// Evaluator for `r_q`, `h_q`, `h` and derived transforms of one model.
///
/// Values of `h` are memoized; the cache is shared between threads.
pub struct HFunction {
    model: ModelSpec,
    quad: QuadratureConfig,
    extrap: ExtrapolationConfig,
    cache: RwLock<HashMap<u64, HValue>>,
}

impl std::fmt::Debug for HFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HFunction")
            .field("model", &self.model)
            .field("quad", &self.quad)
            .field("extrap", &self.extrap)
            .finish_non_exhaustive()
    }
}

impl Clone for HFunction {
    fn clone(&self) -> Self {
        let cache = self.cache.read().map(|c| c.clone()).unwrap_or_default();
        HFunction {
            model: self.model,
            quad: self.quad,
            extrap: self.extrap,
            cache: RwLock::new(cache),
        }
    }
}

fn cache_key(x: f64) -> u64 {
    (x.abs() * 1e12).round() as u64
}

impl HFunction {
    pub fn new(model: ModelSpec) -> Self {
        HFunction {
            model,
            quad: QuadratureConfig::default(),
            extrap: ExtrapolationConfig::default(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_config(
        model: ModelSpec,
        quad: QuadratureConfig,
        extrap: ExtrapolationConfig,
    ) -> Result<Self> {
        quad.validate()?;
        extrap.validate()?;
        Ok(HFunction {
            model,
            quad,
            extrap,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn quadrature_config(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub fn extrapolation_config(&self) -> &ExtrapolationConfig {
        &self.extrap
    }

    /// Number of memoized `h` values.
    pub fn cache_len(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// `r_q(x)` with its quadrature error estimate.
    pub fn resolvent_density_detailed(&self, q: f64, x: f64) -> Result<QuadValue> {
        check_q(q)?;
        check_x(x)?;
        let kernel = if x == 0.0 { Kernel::Plain } else { Kernel::Cos(x.abs()) };
        transform(&self.model, q, kernel, &self.quad)
    }

    /// `r_q(x) = (1/π) ∫_0^∞ cos(λx) / (q + Ψ(λ)) dλ`.
    pub fn resolvent_density(&self, q: f64, x: f64) -> Result<f64> {
        Ok(self.resolvent_density_detailed(q, x)?.value)
    }

    /// `h_q(x) = r_q(0) - r_q(-x)` with its quadrature error estimate,
    /// computed as a single integral of `(1 - cos λx)/(q + Ψ)`.
    pub fn h_q_detailed(&self, q: f64, x: f64) -> Result<QuadValue> {
        check_q(q)?;
        check_x(x)?;
        if x == 0.0 {
            return Ok(QuadValue::new(0.0, 0.0));
        }
        let v = transform(&self.model, q, Kernel::OneMinusCos(x.abs()), &self.quad)?;
        Ok(QuadValue::new(v.value.max(0.0), v.error))
    }

    pub fn h_q(&self, q: f64, x: f64) -> Result<f64> {
        Ok(self.h_q_detailed(q, x)?.value)
    }

    /// `h(x)` with convergence diagnostics.
    pub fn h_detailed(&self, x: f64) -> Result<HValue> {
        check_x(x)?;
        let ax = x.abs();
        if ax == 0.0 {
            return Ok(HValue {
                value: 0.0,
                err_estimate: 0.0,
                steps: 0,
                q_final: f64::NAN,
                far_field: false,
            });
        }
        if ax > self.far_field_range().0 {
            return self.far_field(ax);
        }
        let key = cache_key(ax);
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(v);
        }
        let v = self.extrapolate(ax)?;
        if let Ok(mut c) = self.cache.write() {
            c.entry(key).or_insert(v);
        }
        Ok(v)
    }

    /// Threshold and anchor of the far-field form. Self-similar models
    /// satisfy the scaling law exactly, so they switch early.
    fn far_field_range(&self) -> (f64, f64) {
        match self.model.self_similar_index() {
            Some(_) => (SELF_SIMILAR_ANCHOR, SELF_SIMILAR_ANCHOR),
            None => (FAR_FIELD_THRESHOLD, FAR_FIELD_ANCHOR),
        }
    }

    fn far_field(&self, ax: f64) -> Result<HValue> {
        let x0 = self.far_field_range().1;
        let anchor = self.h_detailed(x0)?;
        let value = match self.model.self_similar_index() {
            Some(alpha) => anchor.value * (ax / x0).powf(alpha - 1.0),
            None => anchor.value + (ax - x0) * self.model.second_moment().inverse(),
        };
        Ok(HValue {
            value,
            err_estimate: anchor.err_estimate * ax / x0,
            far_field: true,
            ..anchor
        })
    }

    fn extrapolate(&self, ax: f64) -> Result<HValue> {
        self.q_limit(ax, self.model.h_q_error_exponent(), |q| self.h_q_detailed(q, ax))
    }

    /// Limit as `q → 0` of `f(q)` by the extrapolation scheme used for `h`,
    /// where `f(q) - f(0) ~ C q^β` (`label` identifies the quantity in
    /// errors).
    pub fn q_limit<F>(&self, label: f64, beta: f64, f: F) -> Result<HValue>
    where
        F: Fn(f64) -> Result<QuadValue>,
    {
        let cfg = &self.extrap;
        let rho1 = 2f64.powf(-beta);
        let rho2 = rho1 * rho1;
        let first_estimate = if cfg.accelerate { 2 } else { 0 };

        let mut raw_prev = f64::NAN;
        let mut r1_prev = f64::NAN;
        let mut est_prev = f64::NAN;
        let mut est_prev2 = f64::NAN;
        let mut hits = 0;
        for k in 0..=cfg.steps {
            let q = cfg.q0 * 0.5f64.powi(k as i32);
            let hq = f(q)?;
            let raw = hq.value;
            let r1 = (raw - rho1 * raw_prev) / (1.0 - rho1);
            let r2 = (r1 - rho2 * r1_prev) / (1.0 - rho2);
            let est = if cfg.accelerate { r2 } else { raw };
            if k > first_estimate {
                let gap = (est - est_prev).abs();
                let last_err = gap + hq.error;
                if gap < cfg.stop_tol * est.abs().max(1.0) {
                    hits += 1;
                    if hits >= 2 {
                        return Ok(HValue {
                            value: est.max(0.0),
                            err_estimate: last_err,
                            steps: k + 1,
                            q_final: q,
                            far_field: false,
                        });
                    }
                } else {
                    hits = 0;
                }
            }
            raw_prev = raw;
            r1_prev = r1;
            est_prev2 = est_prev;
            est_prev = est;
        }
        Err(Error::Extrapolation {
            x: label,
            steps: cfg.steps + 1,
            previous: est_prev2,
            last: est_prev,
        })
    }

    /// `h^{(γ)}(x) = h(x) + γx/m²` (equal to `h` when `m² = ∞`).
    pub fn h_gamma(&self, gamma: f64, x: f64) -> Result<f64> {
        ZeroResolvent::h_gamma(self, gamma, x)
    }

    /// `P_x[e^{-q T_0}] = r_q(-x)/r_q(0)`.
    pub fn hitting_laplace(&self, q: f64, x: f64) -> Result<f64> {
        let r0 = self.resolvent_density(q, 0.0)?;
        let rx = self.resolvent_density(q, -x)?;
        Ok((rx / r0).clamp(0.0, 1.0))
    }

    /// `h^B_q(a) = h_q(a) + h_q(-a) - h_q(a)h_q(-a)/r_q(0)`.
    pub fn hb_q(&self, q: f64, a: f64) -> Result<f64> {
        let r0 = self.resolvent_density(q, 0.0)?;
        let hp = self.h_q(q, a)?;
        let hm = self.h_q(q, -a)?;
        Ok(hp + hm - hp * hm / r0)
    }

    /// `P_x[e^{-q T_a}; T_a < T_b]`.
    pub fn hitting_laplace_two_point(&self, q: f64, x: f64, a: f64, b: f64) -> Result<f64> {
        if (a - b).abs() < 1e-9 {
            return Err(Error::Degenerate(format!("points {a} and {b} coincide")));
        }
        let r0 = self.resolvent_density(q, 0.0)?;
        let hba = self.h_q(q, b - a)?;
        let hxb = self.h_q(q, x - b)?;
        let hxa = self.h_q(q, x - a)?;
        let num = hba + hxb - hxa - hxb * hba / r0;
        let den = self.hb_q(q, a - b)?;
        Ok((num / den).clamp(0.0, 1.0))
    }
}

impl ZeroResolvent for HFunction {
    fn h(&self, x: f64) -> Result<f64> {
        Ok(self.h_detailed(x)?.value)
    }

    fn second_moment(&self) -> SecondMoment {
        self.model.second_moment()
    }
}

impl<T: ZeroResolvent + Send> ZeroResolvent for std::sync::Arc<T> {
    fn h(&self, x: f64) -> Result<f64> {
        (**self).h(x)
    }

    fn second_moment(&self) -> SecondMoment {
        (**self).second_moment()
    }
}
