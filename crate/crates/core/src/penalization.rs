//! The martingale density `φ` and the exact clock expectations.

use serde::{Deserialize, Serialize};

use crate::calculus::{
    distinct, gamma_at_hit_from_b, h_c, hit_prob, hit_prob3, lemma_d12, lemma_d2,
    lt_laplace_restricted, excursion_rate3, clamp_probability,
};
use crate::error::{Error, Result};
use crate::resolvent::{check_gamma, HFunction, ZeroResolvent};

/// `(a, b, λa, λb, γ)` defining the weight `Γ_t = e^{-λa L^a_t - λb L^b_t}`
/// and the martingale `φ^{(γ)}(X_t)Γ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct PenalizationParams {
    a: f64,
    b: f64,
    lam_a: f64,
    lam_b: f64,
    gamma: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
    lambda_a: f64,
    lambda_b: f64,
    #[serde(default)]
    gamma: f64,
}

impl TryFrom<RawParams> for PenalizationParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        PenalizationParams::new(r.a, r.b, r.lambda_a, r.lambda_b, r.gamma)
    }
}

impl From<PenalizationParams> for RawParams {
    fn from(p: PenalizationParams) -> Self {
        RawParams {
            a: p.a,
            b: p.b,
            lambda_a: p.lam_a,
            lambda_b: p.lam_b,
            gamma: p.gamma,
        }
    }
}

impl PenalizationParams {
    pub fn new(a: f64, b: f64, lam_a: f64, lam_b: f64, gamma: f64) -> Result<Self> {
        distinct(&[a, b]).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for (name, lam) in [("lambda_a", lam_a), ("lambda_b", lam_b)] {
            if !(lam.is_finite() && lam > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {lam}")));
            }
        }
        check_gamma(gamma)?;
        Ok(PenalizationParams {
            a,
            b,
            lam_a,
            lam_b,
            gamma,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn lam_a(&self) -> f64 {
        self.lam_a
    }
    pub fn lam_b(&self) -> f64 {
        self.lam_b
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Same parameters with the roles of `(a, λa)` and `(b, λb)` exchanged.
    pub fn swapped(&self) -> Self {
        PenalizationParams {
            a: self.b,
            b: self.a,
            lam_a: self.lam_b,
            lam_b: self.lam_a,
            gamma: self.gamma,
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(PenalizationParams { gamma, ..*self })
    }

    /// `Γ = e^{-λa l_a - λb l_b}`.
    pub fn weight(&self, l_a: f64, l_b: f64) -> f64 {
        (-self.lam_a * l_a - self.lam_b * l_b).exp()
    }
}

/// The random times along which the penalization limit is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClockSpec {
    /// Independent exponential time `e_q`.
    Exponential { q: f64 },
    /// First hitting time `T_c`.
    Hitting { c: f64 },
    /// `T_c ∧ T_{-d}`.
    TwoPoint { c: f64, d: f64 },
    /// Inverse local time `η^c_u`.
    InverseLocalTime { c: f64, u: f64 },
}

impl ClockSpec {
    pub fn validate(&self, p: &PenalizationParams) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let away = |c: f64| -> Result<()> {
            distinct(&[p.a, p.b, c]).map_err(|_| {
                Error::InvalidParameter(format!("clock point {c} must differ from a and b"))
            })
        };
        match *self {
            ClockSpec::Exponential { q } => {
                if !(q.is_finite() && q > 0.0) {
                    return bad(format!("q must be positive, got {q}"));
                }
            }
            ClockSpec::Hitting { c } => away(c)?,
            ClockSpec::TwoPoint { c, d } => {
                if !(c > 0.0 && d > 0.0 && c.is_finite() && d.is_finite()) {
                    return bad(format!("c and d must be positive, got {c}, {d}"));
                }
                away(c)?;
                away(-d)?;
            }
            ClockSpec::InverseLocalTime { c, u } => {
                if !(u.is_finite() && u > 0.0) {
                    return bad(format!("u must be positive, got {u}"));
                }
                away(c)?;
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClockSpec::Exponential { .. } => "exponential",
            ClockSpec::Hitting { .. } => "hitting",
            ClockSpec::TwoPoint { .. } => "two_point",
            ClockSpec::InverseLocalTime { .. } => "inverse_local_time",
        }
    }
}

/// `(X_t, L^a_t, L^b_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightState {
    pub x_t: f64,
    pub l_a: f64,
    pub l_b: f64,
}

impl WeightState {
    pub fn start(x: f64) -> Self {
        WeightState {
            x_t: x,
            l_a: 0.0,
            l_b: 0.0,
        }
    }
}

/// `φ` with every `x`-independent quantity precomputed.
///
/// `φ(x) = h^{(γ)}(x-a) - P_x(T_b<T_a) h^{(γ)}(b-a) + P_x(T_a<T_b) K_a + P_x(T_b<T_a) K_b`.
pub struct PhiEvaluator<'h, H: ZeroResolvent + ?Sized> {
    h: &'h H,
    p: PenalizationParams,
    /// the parameters in evaluation order
    e: PenalizationParams,
    inv_m2: f64,
    hb: f64,
    h_ba: f64,
    hg_ba: f64,
    k_a: f64,
    k_b: f64,
}

impl<'h, H: ZeroResolvent + ?Sized> PhiEvaluator<'h, H> {
    /// Evaluates with the two points in increasing order, so that swapping
    /// `(a, λa)` and `(b, λb)` gives bit-identical values.
    pub fn new(h: &'h H, p: PenalizationParams) -> Result<Self> {
        let e = if p.a > p.b { p.swapped() } else { p };
        Self::build(h, p, e)
    }

    /// Evaluates with the points in the given order.
    pub fn with_order(h: &'h H, p: PenalizationParams) -> Result<Self> {
        Self::build(h, p, p)
    }

    fn build(h: &'h H, p: PenalizationParams, e: PenalizationParams) -> Result<Self> {
        let (a, b, la, lb, g) = (e.a, e.b, e.lam_a, e.lam_b, e.gamma);
        let hb = h.h_b(a - b)?;
        let hg_ba = h.h_gamma(g, b - a)?;
        let hg_ab = h.h_gamma(g, a - b)?;
        let den = la + lb + la * lb * hb;
        let k_a = hg_ab / (1.0 + la * hb) + (1.0 + la * hg_ba) / ((1.0 + la * hb) * den);
        let k_b = hg_ba / (1.0 + lb * hb) + (1.0 + lb * hg_ab) / ((1.0 + lb * hb) * den);
        Ok(PhiEvaluator {
            h,
            p,
            e,
            inv_m2: h.second_moment().inverse(),
            hb,
            h_ba: h.h(b - a)?,
            hg_ba,
            k_a,
            k_b,
        })
    }

    pub fn params(&self) -> &PenalizationParams {
        &self.p
    }

    /// `φ(x)` without the positivity check.
    pub fn raw(&self, x: f64) -> Result<f64> {
        let (a, b) = (self.e.a, self.e.b);
        let hxa = self.h.h(x - a)?;
        let hxb = self.h.h(x - b)?;
        let pa = clamp_probability((self.h_ba + hxb - hxa) / self.hb)?;
        let pb = 1.0 - pa;
        let hg_xa = hxa + self.e.gamma * (x - a) * self.inv_m2;
        Ok(hg_xa - pb * self.hg_ba + pa * self.k_a + pb * self.k_b)
    }

    pub fn phi(&self, x: f64) -> Result<f64> {
        let v = self.raw(x)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonPositive { x, value: v })
        }
    }

    /// `φ(X_t) Γ_t`.
    pub fn martingale_value(&self, s: &WeightState) -> Result<f64> {
        Ok(self.phi(s.x_t)? * self.p.weight(s.l_a, s.l_b))
    }
}

/// `φ^{(γ),λa,λb}_{a,b}(x)`.
pub fn phi<H: ZeroResolvent + ?Sized>(h: &H, p: &PenalizationParams, x: f64) -> Result<f64> {
    PhiEvaluator::new(h, *p)?.phi(x)
}

/// `φ(X_t) e^{-λa L^a_t - λb L^b_t}`.
pub fn martingale_value<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
    s: &WeightState,
) -> Result<f64> {
    PhiEvaluator::new(h, *p)?.martingale_value(s)
}

/// `h^{(γ)}(x) + 1/λ`, the `λb → 0` limit of `φ` with `a = 0`.
pub fn reduce_one_point<H: ZeroResolvent + ?Sized>(h: &H, lam: f64, gamma: f64, x: f64) -> Result<f64> {
    if !(lam.is_finite() && lam > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lam}")));
    }
    Ok(h.h_gamma(gamma, x)? + 1.0 / lam)
}

/// `P_x[Γ_{T_c}]`, summed over the five orders in which `a`, `b`, `c` can be
/// first visited.
pub fn expect_gamma_at_hit<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
    x: f64,
    c: f64,
) -> Result<f64> {
    let (a, b, la, lb) = (p.a, p.b, p.lam_a, p.lam_b);
    distinct(&[a, b, c])?;
    let total = hit_prob3(h, x, c, a, b)?
        + lemma_d2(h, x, a, b, c, la)?
        + lemma_d2(h, x, b, a, c, lb)?
        + lemma_d12(h, x, a, b, c, la, lb)?
        + lemma_d12(h, x, b, a, c, lb, la)?;
    clamp_probability(total)
}

/// Components of `P_x[Γ_{T_c ∧ T_{-d}}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointExpectation {
    /// `P_x[Γ_{T_c}; T_c < T_{-d}]`
    pub restricted_c: f64,
    /// `P_x[Γ_{T_{-d}}; T_{-d} < T_c]`
    pub restricted_d: f64,
    pub total: f64,
}

/// `P_x[Γ_{T_c ∧ T_{-d}}]` split by which point is reached first.
pub fn expect_gamma_two_point<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
    x: f64,
    c: f64,
    d: f64,
) -> Result<TwoPointExpectation> {
    ClockSpec::TwoPoint { c, d }.validate(p)?;
    let md = -d;
    let g = |from: f64, to: f64| expect_gamma_at_hit(h, p, from, to);
    let (x_c, x_d) = (g(x, c)?, g(x, md)?);
    let (d_c, c_d) = (g(md, c)?, g(c, md)?);
    let den = 1.0 - c_d * d_c;
    if den.abs() < 1e-14 {
        return Err(Error::Degenerate(format!("two-point clock denominator {den:e}")));
    }
    let restricted_c = clamp_probability((x_c - x_d * d_c) / den)?;
    let restricted_d = clamp_probability((x_d - x_c * c_d) / den)?;
    Ok(TwoPointExpectation {
        restricted_c,
        restricted_d,
        total: clamp_probability(restricted_c + restricted_d)?,
    })
}

/// The four pieces of `Λ(c) = n^c[1 - Γ_{T_c}]`, split by the order in
/// which an excursion from `c` visits `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionExponent {
    /// excursion visits a, then returns to c before b
    pub a_only: f64,
    /// excursion visits b, then returns to c before a
    pub b_only: f64,
    /// excursion visits a, then b, then returns to c
    pub a_then_b: f64,
    /// excursion visits b, then a, then returns to c
    pub b_then_a: f64,
}

impl ExcursionExponent {
    pub fn total(&self) -> f64 {
        self.a_only + self.b_only + self.a_then_b + self.b_then_a
    }
}

pub fn excursion_exponent_parts<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
    c: f64,
) -> Result<ExcursionExponent> {
    let (a, b, la, lb) = (p.a, p.b, p.lam_a, p.lam_b);
    distinct(&[a, b, c])?;
    let rate_a = excursion_rate3(h, c, a, b)?;
    let rate_b = excursion_rate3(h, c, b, a)?;
    let a_only = rate_a * (hit_prob(h, a, c, b)? - lt_laplace_restricted(h, a, b, c, la)?);
    let b_only = rate_b * (hit_prob(h, b, c, a)? - lt_laplace_restricted(h, b, a, c, lb)?);
    let a_then_b = rate_a
        * (hit_prob(h, a, b, c)?
            - lt_laplace_restricted(h, a, c, b, la)? * gamma_at_hit_from_b(h, a, b, c, la, lb)?);
    let b_then_a = rate_b
        * (hit_prob(h, b, a, c)?
            - lt_laplace_restricted(h, b, c, a, lb)? * gamma_at_hit_from_b(h, b, a, c, lb, la)?);
    Ok(ExcursionExponent {
        a_only,
        b_only,
        a_then_b,
        b_then_a,
    })
}

/// `Λ(c)`, so that `P_c[Γ_{η^c_u}] = e^{-uΛ(c)}`.
pub fn excursion_exponent<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
    c: f64,
) -> Result<f64> {
    Ok(excursion_exponent_parts(h, p, c)?.total().max(0.0))
}

/// `P_x[Γ_{η^c_u}] = e^{-uΛ(c)} P_x[Γ_{T_c}]`.
pub fn expect_gamma_inverse_lt<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
    x: f64,
    c: f64,
    u: f64,
) -> Result<f64> {
    ClockSpec::InverseLocalTime { c, u }.validate(p)?;
    Ok((-u * excursion_exponent(h, p, c)?).exp() * expect_gamma_at_hit(h, p, x, c)?)
}

/// Exact `P_x[Γ_τ]` for the clocks that have a closed form (all but the
/// exponential clock, for which `None` is returned).
pub fn expect_exact<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
    clock: &ClockSpec,
    x: f64,
) -> Result<Option<f64>> {
    clock.validate(p)?;
    Ok(match *clock {
        ClockSpec::Exponential { .. } => None,
        ClockSpec::Hitting { c } => Some(expect_gamma_at_hit(h, p, x, c)?),
        ClockSpec::TwoPoint { c, d } => Some(expect_gamma_two_point(h, p, x, c, d)?.total),
        ClockSpec::InverseLocalTime { c, u } => Some(expect_gamma_inverse_lt(h, p, x, c, u)?),
    })
}

/// Normalizer multiplying `P_x[Γ_τ]` in the clock limit.
pub fn limit_normalizer(hf: &HFunction, clock: &ClockSpec) -> Result<f64> {
    match *clock {
        ClockSpec::Exponential { q } => hf.resolvent_density(q, 0.0),
        ClockSpec::Hitting { c } | ClockSpec::InverseLocalTime { c, .. } => hf.h_b(c),
        ClockSpec::TwoPoint { c, d } => h_c(hf, c, -d),
    }
}

/// `γ = (d - c)/(c + d)`.
pub fn gamma_from_cd(c: f64, d: f64) -> Result<f64> {
    if !(c > 0.0 && d > 0.0 && c.is_finite() && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("c and d must be positive, got {c}, {d}")));
    }
    Ok((d - c) / (c + d))
}

/// `(h(a-b)/(1+λa h^B(a-b)), 1/(1+λa h^B(a-b)))`, the `q → 0` limits of
/// `r_q(0) I^q_{a,b}` and `J^q_{a,b}`.
pub fn limit_constants_exp_clock<H: ZeroResolvent + ?Sized>(
    h: &H,
    p: &PenalizationParams,
) -> Result<(f64, f64)> {
    let den = 1.0 + p.lam_a * h.h_b(p.a - p.b)?;
    Ok((h.h(p.a - p.b)? / den, 1.0 / den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bm_oracle::BmClosedForms;
    use crate::models::{ModelSpec, SecondMoment};

    struct Abs;

    impl ZeroResolvent for Abs {
        fn h(&self, x: f64) -> Result<f64> {
            Ok(x.abs())
        }
        fn second_moment(&self) -> SecondMoment {
            ModelSpec::standard_bm().second_moment()
        }
    }

    const BM: BmClosedForms = BmClosedForms { sigma: 1.0 };

    fn std_params() -> PenalizationParams {
        PenalizationParams::new(0.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn phi_brownian_example() {
        let p = std_params();
        assert!((phi(&Abs, &p, 0.0).unwrap() - 0.5).abs() < 1e-15);
        for x in [-3.0, -0.2, 0.0, 0.4, 1.0, 2.5] {
            for g in [-1.0, 0.3, 1.0] {
                let p = PenalizationParams::new(-0.5, 1.5, 0.7, 2.0, g).unwrap();
                let o = BM.phi(-0.5, 1.5, 0.7, 2.0, g, x).unwrap();
                assert!((phi(&Abs, &p, x).unwrap() - o).abs() < 1e-13, "x={x} g={g}");
            }
        }
    }

    #[test]
    fn limit_constants_example() {
        let (i, j) = limit_constants_exp_clock(&Abs, &std_params()).unwrap();
        assert!((i - 1.0 / 3.0).abs() < 1e-15 && (j - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reduction_example() {
        assert_eq!(reduce_one_point(&Abs, 1.0, 0.0, 2.0).unwrap(), 3.0);
        assert_eq!(reduce_one_point(&Abs, 4.0, 0.5, 0.0).unwrap(), 0.25);
    }

    #[test]
    fn martingale_value_examples() {
        let p = std_params();
        let s = WeightState::start(0.3);
        assert_eq!(martingale_value(&Abs, &p, &s).unwrap(), phi(&Abs, &p, 0.3).unwrap());
        let s = WeightState { x_t: 0.3, l_a: 0.5, l_b: 0.1 };
        assert!(martingale_value(&Abs, &p, &s).unwrap() < phi(&Abs, &p, 0.3).unwrap());
    }

    #[test]
    fn clock_expectations_against_oracle() {
        let p = PenalizationParams::new(0.0, 1.0, 1.0, 2.0, 0.0).unwrap();
        for &x in &[-2.0, 0.5, 1.7] {
            let v = expect_gamma_at_hit(&Abs, &p, x, 5.0).unwrap();
            assert!((v - BM.gamma_at_hit(0.0, 1.0, 1.0, 2.0, x, 5.0).unwrap()).abs() < 1e-13);
            let v = expect_gamma_at_hit(&Abs, &p, x, -3.0).unwrap();
            assert!((v - BM.gamma_at_hit(0.0, 1.0, 1.0, 2.0, x, -3.0).unwrap()).abs() < 1e-13);
            let t = expect_gamma_two_point(&Abs, &p, x, 4.0, 3.0).unwrap();
            let (rc, rd, tot) = BM.gamma_two_point(0.0, 1.0, 1.0, 2.0, x, 4.0, 3.0).unwrap();
            assert!((t.restricted_c - rc).abs() < 1e-13);
            assert!((t.restricted_d - rd).abs() < 1e-13);
            assert!((t.total - tot).abs() < 1e-13);
            let v = expect_gamma_inverse_lt(&Abs, &p, x, 3.0, 1.0).unwrap();
            let o = BM.gamma_inverse_lt(0.0, 1.0, 1.0, 2.0, x, 3.0, 1.0).unwrap();
            assert!((v - o).abs() < 1e-13);
        }
        for c in [-4.0, 0.5, 3.0] {
            let v = excursion_exponent(&Abs, &p, c).unwrap();
            let o = BM.excursion_exponent(0.0, 1.0, 1.0, 2.0, c).unwrap();
            assert!((v - o).abs() < 1e-13, "c={c}: {v} vs {o}");
        }
    }

    #[test]
    fn normalizers() {
        let hf = HFunction::new(ModelSpec::standard_bm());
        assert!((limit_normalizer(&hf, &ClockSpec::Hitting { c: 8.0 }).unwrap() - 16.0).abs() < 1e-6);
        let v = limit_normalizer(&hf, &ClockSpec::TwoPoint { c: 1.0, d: 1.0 }).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let v = limit_normalizer(&hf, &ClockSpec::Exponential { q: 1.0 }).unwrap();
        assert!((v - BM.rq(1.0, 0.0)).abs() < 1e-9);
        assert_eq!(gamma_from_cd(1.0, 3.0).unwrap(), 0.5);
        assert_eq!(gamma_from_cd(2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(PenalizationParams::new(0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(PenalizationParams::new(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(PenalizationParams::new(0.0, 1.0, 1.0, 1.0, 1.1).is_err());
        let p = std_params();
        assert!(ClockSpec::Hitting { c: 1.0 }.validate(&p).is_err());
        assert!(ClockSpec::TwoPoint { c: 2.0, d: 0.0 }.validate(&p).is_err());
        assert!(ClockSpec::Exponential { q: 0.5 }.validate(&p).is_ok());
    }

    #[test]
    fn serde_roundtrip() {
        let p: PenalizationParams =
            serde_json::from_str(r#"{"a":0,"b":1,"lambda_a":1,"lambda_b":2,"gamma":0.5}"#).unwrap();
        assert_eq!(p.lam_b(), 2.0);
        let c: ClockSpec = serde_json::from_str(r#"{"kind":"two_point","c":4,"d":12}"#).unwrap();
        assert_eq!(c, ClockSpec::TwoPoint { c: 4.0, d: 12.0 });
        assert!(serde_json::from_str::<PenalizationParams>(r#"{"a":0,"b":0,"lambda_a":1,"lambda_b":1}"#).is_err());
    }
}
