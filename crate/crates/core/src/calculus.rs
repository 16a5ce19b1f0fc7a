//! Hitting and local-time laws expressed through `h`.
//!
//! Every function here is a closed-form combination of values of `h`; the
//! only numerics live behind the [`ZeroResolvent`] supplying them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resolvent::{HFunction, ZeroResolvent};

/// Raw probabilities may leave `[0, 1]` by this much before it is an error.
pub const PROBABILITY_SLACK: f64 = 1e-9;
/// Points closer than this are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-9;
const MIN_DENOMINATOR: f64 = 1e-14;

/// Two distinct points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub a: f64,
    pub b: f64,
}

impl PointPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        distinct(&[a, b])?;
        Ok(PointPair { a, b })
    }
}

/// Law of a local time: an atom at zero plus an exponential part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeLaw {
    pub atom_at_zero: f64,
    pub exp_mean: f64,
}

impl LocalTimeLaw {
    /// `E[e^{-λL}]`.
    pub fn laplace(&self, lam: f64) -> f64 {
        self.atom_at_zero + (1.0 - self.atom_at_zero) / (1.0 + lam * self.exp_mean)
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.atom_at_zero) * self.exp_mean
    }
}

pub(crate) fn distinct(points: &[f64]) -> Result<()> {
    for (i, &p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidParameter(format!("point {p} is not finite")));
        }
        for &r in &points[i + 1..] {
            if (p - r).abs() < MIN_SEPARATION {
                return Err(Error::Degenerate(format!("points {p} and {r} coincide")));
            }
        }
    }
    Ok(())
}

/// Clamps a raw probability, failing if it is outside `[0, 1]` by more than
/// [`PROBABILITY_SLACK`].
pub fn clamp_probability(p: f64) -> Result<f64> {
    if !p.is_finite() || p < -PROBABILITY_SLACK || p > 1.0 + PROBABILITY_SLACK {
        return Err(Error::ProbabilityRange { value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}

fn check_lambda(lam: f64) -> Result<()> {
    if lam.is_finite() && lam >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lam}")))
    }
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den.abs() < MIN_DENOMINATOR {
        return Err(Error::Degenerate(format!("{what}: denominator {den:e}")));
    }
    Ok(num / den)
}

/// `h^B(a) = h(a) + h(-a) = E_0[L^0_{T_a}]`.
pub fn h_b<H: ZeroResolvent + ?Sized>(h: &H, a: f64) -> Result<f64> {
    if a.abs() < MIN_SEPARATION {
        return Err(Error::Degenerate("h^B needs a nonzero argument".into()));
    }
    h.h_b(a)
}

/// `P_x(T_a < T_b) = (h(b-a) + h(x-b) - h(x-a)) / h^B(a-b)`.
pub fn hit_prob<H: ZeroResolvent + ?Sized>(h: &H, x: f64, a: f64, b: f64) -> Result<f64> {
    distinct(&[a, b])?;
    let num = h.h(b - a)? + h.h(x - b)? - h.h(x - a)?;
    clamp_probability(num / h.h_b(a - b)?)
}

/// `h^C(a, b) = E_0[L^0_{T_a ∧ T_b}]`.
pub fn h_c<H: ZeroResolvent + ?Sized>(h: &H, a: f64, b: f64) -> Result<f64> {
    distinct(&[a, b])?;
    let (ha, hma, hb, hmb) = (h.h(a)?, h.h(-a)?, h.h(b)?, h.h(-b)?);
    let (hab, hba) = (h.h(a - b)?, h.h(b - a)?);
    let num = (hb + hma) * hab + (ha + hmb) * hba + (ha - hb) * (hmb - hma) - hab * hba;
    Ok(num / (hab + hba))
}

/// `P_x(T_a < T_b ∧ T_c)`.
pub fn hit_prob3<H: ZeroResolvent + ?Sized>(h: &H, x: f64, a: f64, b: f64, c: f64) -> Result<f64> {
    distinct(&[a, b, c])?;
    let num = hit_prob(h, x, a, b)? - hit_prob(h, x, c, b)? * hit_prob(h, c, a, b)?;
    let den = 1.0 - hit_prob(h, a, c, b)? * hit_prob(h, c, a, b)?;
    clamp_probability(ratio(num, den, "three-point hitting")?)
}

/// `P_x[e^{-λ L^0_{e_q}}]` for an independent exponential time of rate `q`.
pub fn exp_clock_law(hf: &HFunction, q: f64, x: f64, lam: f64) -> Result<f64> {
    check_lambda(lam)?;
    let r0 = hf.resolvent_density(q, 0.0)?;
    let hq = hf.h_q(q, x)?;
    let v = (hq + (1.0 - hq / r0) / (lam + 1.0 / r0)) / r0;
    clamp_probability(v)
}

/// Law of `L^z_{T_a}` under `P_x`.
pub fn local_time_at_hit_law<H: ZeroResolvent + ?Sized>(
    h: &H,
    x: f64,
    zero_pt: f64,
    a: f64,
) -> Result<LocalTimeLaw> {
    distinct(&[zero_pt, a])?;
    Ok(LocalTimeLaw {
        atom_at_zero: hit_prob(h, x, a, zero_pt)?,
        exp_mean: h.h_b(a - zero_pt)?,
    })
}

/// `P_a[e^{-λ L^a_{T_c}}] = 1 / (1 + λ h^B(c-a))`.
pub fn lt_laplace_from_a<H: ZeroResolvent + ?Sized>(h: &H, a: f64, c: f64, lam: f64) -> Result<f64> {
    distinct(&[a, c])?;
    check_lambda(lam)?;
    Ok(1.0 / (1.0 + lam * h.h_b(c - a)?))
}

/// `P_b[e^{-λ L^a_{T_c}}] = (1 + λ{h(a-c) + h(b-a) - h(b-c)}) / (1 + λ h^B(c-a))`.
pub fn lt_laplace_from_b<H: ZeroResolvent + ?Sized>(h: &H, a: f64, b: f64, c: f64, lam: f64) -> Result<f64> {
    distinct(&[a, c])?;
    check_lambda(lam)?;
    let num = 1.0 + lam * (h.h(a - c)? + h.h(b - a)? - h.h(b - c)?);
    Ok(num / (1.0 + lam * h.h_b(c - a)?))
}

/// `P_a[e^{-λ L^a_{T_c}}; T_c < T_b]`.
///
/// Solving the renewal identity at `T_b` gives
/// `(A1 - A2·A3) / (1 - A4·A3)` with `A1 = P_a[e^{-λL^a_{T_c}}]`,
/// `A2 = P_a[e^{-λL^a_{T_b}}]`, `A3 = P_b[e^{-λL^a_{T_c}}]`,
/// `A4 = P_c[e^{-λL^a_{T_b}}]`. Clearing the common denominators yields the
/// cancellation-free form evaluated here.
pub fn lt_laplace_restricted<H: ZeroResolvent + ?Sized>(
    h: &H,
    a: f64,
    b: f64,
    c: f64,
    lam_a: f64,
) -> Result<f64> {
    distinct(&[a, b, c])?;
    check_lambda(lam_a)?;
    let bc = h.h_b(c - a)?;
    let bb = h.h_b(b - a)?;
    let n3 = h.h(a - c)? + h.h(b - a)? - h.h(b - c)?;
    let n4 = h.h(a - b)? + h.h(c - a)? - h.h(c - b)?;
    let num = bb - n3;
    let den = (bc + bb - n3 - n4) + lam_a * (bc * bb - n3 * n4);
    clamp_probability(ratio(num, den, "restricted local-time transform")?)
}

/// `P_x[e^{-λa L^a_{T_c}}; T_a < T_c < T_b]`.
pub fn lemma_d2<H: ZeroResolvent + ?Sized>(
    h: &H,
    x: f64,
    a: f64,
    b: f64,
    c: f64,
    lam_a: f64,
) -> Result<f64> {
    Ok(hit_prob3(h, x, a, b, c)? * lt_laplace_restricted(h, a, b, c, lam_a)?)
}

/// `P_b[Γ_{T_c}]` with `Γ = e^{-λa L^a - λb L^b}`.
pub fn gamma_at_hit_from_b<H: ZeroResolvent + ?Sized>(
    h: &H,
    a: f64,
    b: f64,
    c: f64,
    lam_a: f64,
    lam_b: f64,
) -> Result<f64> {
    let r_b_to_c = lt_laplace_restricted(h, b, a, c, lam_b)?;
    let r_b_to_a = lt_laplace_restricted(h, b, c, a, lam_b)?;
    let r_a_to_c = lt_laplace_restricted(h, a, b, c, lam_a)?;
    let r_a_to_b = lt_laplace_restricted(h, a, c, b, lam_a)?;
    let num = r_b_to_c + r_b_to_a * r_a_to_c;
    let den = 1.0 - r_b_to_a * r_a_to_b;
    clamp_probability(ratio(num, den, "return transform from b")?)
}

/// `P_x[Γ_{T_c}; T_a < T_b < T_c]`.
pub fn lemma_d12<H: ZeroResolvent + ?Sized>(
    h: &H,
    x: f64,
    a: f64,
    b: f64,
    c: f64,
    lam_a: f64,
    lam_b: f64,
) -> Result<f64> {
    Ok(hit_prob3(h, x, a, b, c)?
        * lt_laplace_restricted(h, a, c, b, lam_a)?
        * gamma_at_hit_from_b(h, a, b, c, lam_a, lam_b)?)
}

/// `n^0(T_a < T_0) = 1/h^B(a)`.
pub fn excursion_rate<H: ZeroResolvent + ?Sized>(h: &H, a: f64) -> Result<f64> {
    Ok(1.0 / h_b(h, a)?)
}

/// `n^c(T_a < T_b ∧ T_c) = P_c(T_a < T_b) / h^C(a-c, b-c)`.
///
/// Under `P_c`, `L^c_{T_a∧T_b}` is exponential with mean `h^C(a-c, b-c)`,
/// so excursions reaching `{a, b}` arrive at rate `1/h^C`; the first of them
/// reaches `a` first with probability `P_c(T_a < T_b)`.
pub fn excursion_rate3<H: ZeroResolvent + ?Sized>(h: &H, c: f64, a: f64, b: f64) -> Result<f64> {
    distinct(&[a, b, c])?;
    Ok(hit_prob(h, c, a, b)? / h_c(h, a - c, b - c)?)
}
