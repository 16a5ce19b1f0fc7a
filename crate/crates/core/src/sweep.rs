//! Clock-limit sweeps: normalized clock expectations along a parameter
//! ladder, compared with the limiting martingale density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::h_c;
use crate::error::{Error, Result};
use crate::montecarlo::{estimate_weighted, SimConfig};
use crate::penalization::{
    excursion_exponent, expect_gamma_at_hit, expect_gamma_inverse_lt, expect_gamma_two_point, gamma_from_cd,
    phi, ClockSpec, PenalizationParams,
};
use crate::resolvent::{HFunction, ZeroResolvent};

/// A parameter ladder for one clock family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepSpec {
    /// Hitting clocks `T_c` for each `c` (sign gives the direction).
    Hitting { ladder: Vec<f64> },
    /// Two-point clocks `T_c ∧ T_{-d}` with `d = ratio·c`.
    TwoPoint { ladder: Vec<f64>, ratio: f64 },
    /// Inverse local time `η^c_u` for each `c`.
    InverseLocalTime { ladder: Vec<f64>, u: f64 },
    /// Exponential clocks with rate `q`, estimated by simulation.
    Exponential { ladder: Vec<f64> },
}

impl SweepSpec {
    pub fn ladder(&self) -> &[f64] {
        match self {
            SweepSpec::Hitting { ladder }
            | SweepSpec::TwoPoint { ladder, .. }
            | SweepSpec::InverseLocalTime { ladder, .. }
            | SweepSpec::Exponential { ladder } => ladder,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepSpec::Hitting { .. } => "hitting",
            SweepSpec::TwoPoint { .. } => "two_point",
            SweepSpec::InverseLocalTime { .. } => "inverse_local_time",
            SweepSpec::Exponential { .. } => "exponential",
        }
    }

    /// Ladders run toward the limit: `|c|` increasing, `q` decreasing, with
    /// a constant sign for `c`.
    pub fn validate(&self) -> Result<()> {
        let l = self.ladder();
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if l.is_empty() {
            return bad("empty sweep ladder");
        }
        if l.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return bad("ladder entries must be finite and non-zero");
        }
        let sorted = match self {
            SweepSpec::Exponential { .. } => {
                l.iter().all(|&q| q > 0.0) && l.windows(2).all(|w| w[1] < w[0])
            }
            SweepSpec::TwoPoint { .. } => l.iter().all(|&c| c > 0.0) && l.windows(2).all(|w| w[1] > w[0]),
            _ => {
                let s = l[0].signum();
                l.iter().all(|c| c.signum() == s) && l.windows(2).all(|w| w[1].abs() > w[0].abs())
            }
        };
        if !sorted {
            return bad("ladder must be strictly monotone toward the limit");
        }
        match self {
            SweepSpec::TwoPoint { ratio, .. } if !(*ratio > 0.0 && ratio.is_finite()) => {
                bad("two-point ratio must be positive")
            }
            SweepSpec::InverseLocalTime { u, .. } if !(*u > 0.0 && u.is_finite()) => bad("u must be positive"),
            _ => Ok(()),
        }
    }
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Ladder value (`c` or `q`).
    pub parameter: f64,
    /// `d` for two-point clocks.
    pub d: Option<f64>,
    /// Direction parameter of the limit.
    pub gamma: f64,
    pub normalizer: f64,
    pub expectation: f64,
    /// Standard error for simulated rungs.
    pub std_err: Option<f64>,
    pub normalized: f64,
    pub target: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    /// Which quantity the row tracks (`total`, `restricted_c`, `restricted_d`).
    pub component: String,
    /// `e^{-uΛ(c)}` for inverse-local-time rungs.
    pub excursion_factor: Option<f64>,
    /// False for simulated rungs with excessive truncation.
    pub reliable: bool,
}

/// A completed sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub clock: String,
    pub x: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Rows of one component, in ladder order.
    pub fn component(&self, name: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.component == name).collect()
    }

    /// True when `|gap|` strictly decreases along the component's rows.
    pub fn gaps_decreasing(&self, name: &str) -> bool {
        self.component(name).windows(2).all(|w| w[1].abs_gap < w[0].abs_gap)
    }

    /// Relative gap of the last rung of a component.
    pub fn final_rel_gap(&self, name: &str) -> Option<f64> {
        self.component(name).last().map(|r| r.rel_gap)
    }

    /// Empirical convergence order between consecutive rungs: the slope of
    /// `log|gap|` against `log(1/|c|)` (or `log q` for exponential clocks).
    pub fn observed_orders(&self, name: &str) -> Vec<f64> {
        let rows = self.component(name);
        let scale = |r: &SweepRow| match self.clock.as_str() {
            "exponential" => r.parameter,
            _ => 1.0 / r.parameter.abs(),
        };
        rows.windows(2)
            .map(|w| (w[1].abs_gap / w[0].abs_gap).ln() / (scale(w[1]) / scale(w[0])).ln())
            .collect()
    }
}

fn row(
    parameter: f64,
    gamma: f64,
    normalizer: f64,
    expectation: f64,
    target: f64,
    component: &str,
) -> SweepRow {
    let normalized = normalizer * expectation;
    let abs_gap = (normalized - target).abs();
    SweepRow {
        parameter,
        d: None,
        gamma,
        normalizer,
        expectation,
        std_err: None,
        normalized,
        target,
        abs_gap,
        rel_gap: abs_gap / target.abs(),
        component: component.to_string(),
        excursion_factor: None,
        reliable: true,
    }
}

/// Runs a sweep from `x`. Exact rungs use `h` (any zero resolvent of the
/// model of `hf`); exponential rungs are simulated with `sim`.
pub fn limit_sweep<H: ZeroResolvent + ?Sized>(
    hf: &HFunction,
    h: &H,
    p: &PenalizationParams,
    x: f64,
    spec: &SweepSpec,
    sim: &SimConfig,
) -> Result<SweepReport> {
    spec.validate()?;
    let target = |g: f64| phi(h, &p.with_gamma(g)?, x);
    let rows: Vec<Vec<SweepRow>> = match spec {
        SweepSpec::Hitting { ladder } => ladder
            .par_iter()
            .map(|&c| {
                let g = c.signum();
                let clock = ClockSpec::Hitting { c };
                clock.validate(p)?;
                Ok(vec![row(c, g, h.h_b(c)?, expect_gamma_at_hit(h, p, x, c)?, target(g)?, "total")])
            })
            .collect::<Result<_>>()?,
        SweepSpec::InverseLocalTime { ladder, u } => ladder
            .par_iter()
            .map(|&c| {
                let g = c.signum();
                let mut r = row(
                    c,
                    g,
                    h.h_b(c)?,
                    expect_gamma_inverse_lt(h, p, x, c, *u)?,
                    target(g)?,
                    "total",
                );
                r.excursion_factor = Some((-u * excursion_exponent(h, p, c)?).exp());
                Ok(vec![r])
            })
            .collect::<Result<_>>()?,
        SweepSpec::TwoPoint { ladder, ratio } => ladder
            .par_iter()
            .map(|&c| {
                let d = ratio * c;
                let g = gamma_from_cd(c, d)?;
                let n = h_c(h, c, -d)?;
                let e = expect_gamma_two_point(h, p, x, c, d)?;
                let parts = [
                    (e.restricted_c, 0.5 * (1.0 + g) * target(1.0)?, "restricted_c"),
                    (e.restricted_d, 0.5 * (1.0 - g) * target(-1.0)?, "restricted_d"),
                    (e.total, target(g)?, "total"),
                ];
                Ok(parts
                    .iter()
                    .map(|&(v, t, name)| SweepRow {
                        d: Some(d),
                        ..row(c, g, n, v, t, name)
                    })
                    .collect())
            })
            .collect::<Result<_>>()?,
        SweepSpec::Exponential { ladder } => {
            let model = hf.model();
            let t = target(0.0)?;
            ladder
                .iter()
                .map(|&q| {
                    let n = hf.resolvent_density(q, 0.0)?;
                    let e = estimate_weighted(model, p, &ClockSpec::Exponential { q }, x, sim)?;
                    let mut r = row(q, 0.0, n, e.mean, t, "total");
                    r.std_err = Some(e.std_err);
                    r.reliable = e.reliable;
                    Ok(vec![r])
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(SweepReport {
        clock: spec.name().to_string(),
        x,
        rows: rows.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bm_oracle::BmClosedForms;
    use crate::models::ModelSpec;

    fn setup() -> (HFunction, PenalizationParams) {
        (
            HFunction::new(ModelSpec::standard_bm()),
            PenalizationParams::new(0.0, 1.0, 1.0, 1.0, 0.0).unwrap(),
        )
    }

    #[test]
    fn hitting_gaps_shrink() {
        let (hf, p) = setup();
        let spec = SweepSpec::Hitting {
            ladder: vec![4.0, 8.0, 16.0, 32.0],
        };
        let r = limit_sweep(&hf, &hf, &p, 0.5, &spec, &SimConfig::default()).unwrap();
        assert!(r.gaps_decreasing("total"));
        assert!(r.final_rel_gap("total").unwrap() < 0.02);
        let o = BmClosedForms::default();
        assert!((r.rows[0].target - o.phi(0.0, 1.0, 1.0, 1.0, 1.0, 0.5).unwrap()).abs() < 1e-8);
        assert!(r.observed_orders("total").iter().all(|&k| k > 0.5));
    }

    #[test]
    fn two_point_symmetric_ratio_has_zero_gamma() {
        let (hf, p) = setup();
        let spec = SweepSpec::TwoPoint {
            ladder: vec![4.0, 8.0],
            ratio: 1.0,
        };
        let r = limit_sweep(&hf, &hf, &p, 0.5, &spec, &SimConfig::default()).unwrap();
        assert!(r.rows.iter().all(|row| row.gamma == 0.0 && row.d == Some(row.parameter)));
    }

    #[test]
    fn inverse_lt_factor_tends_to_one() {
        let (hf, p) = setup();
        let spec = SweepSpec::InverseLocalTime {
            ladder: vec![4.0, 8.0, 16.0, 32.0],
            u: 1.0,
        };
        let r = limit_sweep(&hf, &hf, &p, 0.5, &spec, &SimConfig::default()).unwrap();
        let f: Vec<f64> = r.rows.iter().map(|r| r.excursion_factor.unwrap()).collect();
        assert!(f.windows(2).all(|w| w[1] > w[0] && w[1] < 1.0));
        assert!(r.final_rel_gap("total").unwrap() < 0.02);
    }

    #[test]
    fn bad_ladders() {
        let (hf, p) = setup();
        let cfg = SimConfig::default();
        for spec in [
            SweepSpec::Hitting { ladder: vec![] },
            SweepSpec::Hitting { ladder: vec![8.0, 4.0] },
            SweepSpec::Hitting { ladder: vec![4.0, -8.0] },
            SweepSpec::Exponential { ladder: vec![0.25, 1.0] },
            SweepSpec::TwoPoint { ladder: vec![1.0], ratio: 0.0 },
        ] {
            assert!(limit_sweep(&hf, &hf, &p, 0.5, &spec, &cfg).is_err(), "{spec:?}");
        }
    }
}
