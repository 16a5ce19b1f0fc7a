//! Cosine transforms of `1/(q + Ψ(λ))` on the half line.
//!
//! The finite part `[0, A]` is split into panels aligned with the half
//! periods `π/ω` of the cosine (plus geometric breakpoints around the knee
//! `Ψ(λ) = q`) and integrated adaptively. Beyond `A` the integrand is
//! replaced by the convergent series
//! `1/(q+Ψ) = Σ_k (-s)^k / (cλ^p)^{k+1}`, `s = q + shift`, which is
//! integrated term by term: directly for the non-oscillatory part, and by
//! repeated integration by parts for the cosine part (`A` is a multiple of
//! `π/ω`, so the sine boundary terms vanish).

use std::f64::consts::PI;

use super::QuadratureConfig;
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::quadrature::{integrate_panels, QuadValue};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    /// weight 1
    Plain,
    /// weight cos(ωλ)
    Cos(f64),
    /// weight 1 - cos(ωλ)
    OneMinusCos(f64),
}

/// Returns `(1/π) ∫_0^∞ w(λ) / (q + Ψ(λ)) dλ`.
pub(crate) fn transform(
    model: &ModelSpec,
    q: f64,
    kernel: Kernel,
    cfg: &QuadratureConfig,
) -> Result<QuadValue> {
    let omega = match kernel {
        Kernel::Plain => 0.0,
        Kernel::Cos(w) | Kernel::OneMinusCos(w) => w.abs(),
    };
    if omega == 0.0 && matches!(kernel, Kernel::OneMinusCos(_)) {
        return Ok(QuadValue::new(0.0, 0.0));
    }
    let kernel = if omega == 0.0 { Kernel::Plain } else { kernel };

    let asym = model.asymptotic_psi();
    let s = q + asym.shift;
    let lambda_star = (cfg.tail_ratio * s / asym.coeff)
        .powf(1.0 / asym.power)
        .max(asym.min_lambda);
    let knee = knee_point(model, q);

    let (cut, n_half_periods) = if omega > 0.0 {
        let period = PI / omega;
        let want = lambda_star.max(cfg.tail_phase / omega);
        let n = (want / period).ceil();
        if n > cfg.max_panels as f64 {
            return Err(Error::Quadrature {
                value: f64::NAN,
                error: f64::INFINITY,
            });
        }
        (n * period, n as u64)
    } else {
        (lambda_star, 0)
    };

    let breakpoints = breakpoints(knee, cut, omega, n_half_periods);
    let finite = match kernel {
        Kernel::Plain => {
            let f = |l: f64| 1.0 / (q + model.psi(l));
            integrate_panels(&f, &breakpoints, cfg.abs_tol, cfg.rel_tol, cfg.max_segments)
        }
        Kernel::Cos(_) => {
            let f = |l: f64| (omega * l).cos() / (q + model.psi(l));
            integrate_panels(&f, &breakpoints, cfg.abs_tol, cfg.rel_tol, cfg.max_segments)
        }
        Kernel::OneMinusCos(_) => {
            let f = |l: f64| {
                let sn = (0.5 * omega * l).sin();
                2.0 * sn * sn / (q + model.psi(l))
            };
            integrate_panels(&f, &breakpoints, cfg.abs_tol, cfg.rel_tol, cfg.max_segments)
        }
    };

    let series = TailSeries::new(asym.coeff, asym.power, s, cut);
    let tail = match kernel {
        Kernel::Plain => series.plain(),
        Kernel::Cos(_) => series.cosine(omega, n_half_periods),
        Kernel::OneMinusCos(_) => series.plain() - series.cosine(omega, n_half_periods),
    };

    let total = (finite.value + tail) * (1.0 / PI);
    let tol = cfg.abs_tol.max(cfg.rel_tol * total.value.abs());
    if !finite.converged || !total.value.is_finite() || total.error > 10.0 * tol {
        return Err(Error::Quadrature {
            value: total.value,
            error: total.error,
        });
    }
    Ok(total)
}

/// Solves `Ψ(λ) = q` by bisection (Ψ is monotone on the half line).
fn knee_point(model: &ModelSpec, q: f64) -> f64 {
    let mut hi = 1.0;
    while model.psi(hi) < q {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if model.psi(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn breakpoints(knee: f64, cut: f64, omega: f64, n_half_periods: u64) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::with_capacity(n_half_periods as usize + 80);
    pts.push(0.0);
    let mut g = knee / 16.0;
    while g < cut && pts.len() < 80 {
        pts.push(g);
        g *= 2.0;
    }
    if omega > 0.0 {
        let period = PI / omega;
        pts.extend((1..n_half_periods).map(|k| k as f64 * period));
    }
    pts.push(cut);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Term-by-term integrals of the large-λ expansion beyond `cut`.
struct TailSeries {
    /// (coefficient, exponent) pairs of `Σ a_k λ^{-m_k}`
    terms: Vec<(f64, f64)>,
    cut: f64,
}

impl TailSeries {
    fn new(coeff: f64, power: f64, s: f64, cut: f64) -> Self {
        let mut terms = Vec::new();
        let ratio = s / (coeff * cut.powf(power));
        let mut a = 1.0 / coeff;
        for k in 0..200 {
            let m = power * (k as f64 + 1.0);
            terms.push((a, m));
            if (ratio.powi(k as i32 + 1)) < 1e-18 {
                break;
            }
            a *= -s / coeff;
        }
        TailSeries { terms, cut }
    }

    /// `∫_cut^∞ Σ a_k λ^{-m_k} dλ`
    fn plain(&self) -> QuadValue {
        let mut sum = 0.0;
        let mut last = 0.0;
        for &(a, m) in &self.terms {
            let t = a * self.cut.powf(1.0 - m) / (m - 1.0);
            sum += t;
            last = t;
        }
        QuadValue::new(sum, last.abs() + 1e-16 * sum.abs())
    }

    /// r-th derivative of the series at `cut`.
    fn derivative(&self, r: u32) -> f64 {
        self.terms
            .iter()
            .map(|&(a, m)| {
                let mut rising = 1.0;
                for i in 0..r {
                    rising *= m + i as f64;
                }
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                sign * a * rising * self.cut.powf(-m - r as f64)
            })
            .sum()
    }

    /// `∫_cut^∞ cos(ωλ) f(λ) dλ` for `cut = nπ/ω`, as the asymptotic series
    /// `-(-1)^n Σ_j (-1)^j f^{(2j+1)}(cut) / ω^{2j+2}`.
    fn cosine(&self, omega: f64, n: u64) -> QuadValue {
        let outer = if n % 2 == 0 { -1.0 } else { 1.0 };
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        let mut last = 0.0;
        for j in 0..40u32 {
            let r = 2 * j + 1;
            let t = outer * if j % 2 == 0 { 1.0 } else { -1.0 } * self.derivative(r)
                / omega.powi(r as i32 + 1);
            if t.abs() > prev {
                // asymptotic series started to diverge
                break;
            }
            sum += t;
            last = t.abs();
            prev = t.abs();
            if last <= 1e-18 * sum.abs() {
                break;
            }
        }
        QuadValue::new(sum, last + 1e-16 * sum.abs())
    }
}
