//! The acceptance suite: exact-layer identities, oracle agreement,
//! simulation cross-checks, clock-limit sweeps and reproducibility.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bm_oracle::BmClosedForms;
use crate::calculus::{h_b, h_c, hit_prob, hit_prob3};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::montecarlo::{estimate_weighted, verify_martingale, Functional, SimConfig, Simulation, StopRule};
use crate::penalization::{expect_exact, phi, ClockSpec, PenalizationParams, PhiEvaluator};
use crate::quadrature::QuadValue;
use crate::resolvent::{HFunction, HTable, ZeroResolvent};
use crate::sweep::{limit_sweep, SweepSpec};

/// Number of criteria in the suite.
pub const CRITERIA: u32 = 9;

/// Pass thresholds. The defaults are the published acceptance tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub quadrature_abs: f64,
    pub quadrature_seconds: f64,
    pub h_abs: f64,
    pub stable_scaling: f64,
    pub h_seconds: f64,
    pub identity: f64,
    pub h_c_abs: f64,
    pub phi_abs: f64,
    pub symmetry: f64,
    pub affine: f64,
    pub reduction: f64,
    pub gamma_independence: f64,
    pub mc_sigmas: f64,
    pub mc_budget: f64,
    pub mc_seconds: f64,
    pub hitting_gap: f64,
    pub two_point_gap: f64,
    pub inverse_lt_gap: f64,
    pub exponential_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quadrature_abs: 1e-8,
            quadrature_seconds: 10.0,
            h_abs: 1e-6,
            stable_scaling: 1e-4,
            h_seconds: 30.0,
            identity: 1e-9,
            h_c_abs: 1e-6,
            phi_abs: 1e-8,
            symmetry: 1e-10,
            affine: 1e-12,
            reduction: 1e-4,
            gamma_independence: 1e-12,
            mc_sigmas: 3.0,
            mc_budget: 0.02,
            mc_seconds: 600.0,
            hitting_gap: 0.02,
            two_point_gap: 0.03,
            inverse_lt_gap: 0.02,
            exponential_gap: 0.03,
        }
    }
}

/// Suite settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Multiplies every simulation path count (1 = 10⁵ paths).
    pub scale: f64,
    /// Simulation time step.
    pub dt: f64,
    /// Criteria to run (1 to 9); empty runs all.
    pub criteria: Vec<u32>,
    /// Path-count multiplier for the repeated runs of the reproducibility
    /// criterion, relative to `scale`.
    pub repro_scale: f64,
    pub tolerances: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 20_240_601,
            scale: 1.0,
            dt: 1e-4,
            criteria: vec![],
            repro_scale: 0.02,
            tolerances: Tolerances::default(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite() && self.repro_scale > 0.0 && self.repro_scale.is_finite()) {
            return Err(Error::InvalidParameter("scale factors must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(c) = self.criteria.iter().find(|&&c| c == 0 || c > CRITERIA) {
            return Err(Error::InvalidParameter(format!("no criterion {c}")));
        }
        Ok(())
    }

    fn selected(&self, id: u32) -> bool {
        self.criteria.is_empty() || self.criteria.contains(&id)
    }

    fn paths(&self) -> usize {
        ((1e5 * self.scale).round() as usize).max(100)
    }

    fn sim(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            n_paths: self.paths(),
            seed: self.seed,
            ..SimConfig::default()
        }
    }
}

/// One comparison: passes when `error ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub error: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, observed: f64, expected: f64, error: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            expected,
            error,
            bound,
            passed: error <= bound,
        }
    }

    fn abs(name: impl Into<String>, observed: f64, expected: f64, bound: f64) -> Self {
        Self::new(name, observed, expected, (observed - expected).abs(), bound)
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self::new(name, v, 1.0, 1.0 - v, 0.0)
    }
}

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Wall-clock budget, when the criterion has one.
    pub budget_seconds: Option<f64>,
    pub within_budget: bool,
    /// Measured wall-clock time (not serialized, so reports stay
    /// reproducible).
    #[serde(skip)]
    pub seconds: f64,
}

/// Outcome of the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub scale: f64,
    pub dt: f64,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    /// One line per criterion.
    pub fn summary_lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| {
                let failed = c.checks.iter().filter(|k| !k.passed).count();
                format!(
                    "criterion {}: {} - {} ({} checks, {} failed, {:.1} s)",
                    c.id,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.title,
                    c.checks.len(),
                    failed,
                    c.seconds
                )
            })
            .collect()
    }
}

fn finish(id: u32, title: &str, checks: Vec<Check>, budget: Option<f64>, start: Instant) -> CriterionResult {
    let seconds = start.elapsed().as_secs_f64();
    let within_budget = budget.is_none_or(|b| seconds <= b);
    CriterionResult {
        id,
        title: title.to_string(),
        passed: within_budget && checks.iter().all(|c| c.passed),
        checks,
        budget_seconds: budget,
        within_budget,
        seconds,
    }
}

fn bm_params() -> PenalizationParams {
    PenalizationParams::new(0.0, 1.0, 1.0, 1.0, 0.0).expect("valid parameters")
}

fn jump_model() -> ModelSpec {
    ModelSpec::brownian_with_jumps(1.0, 2.0, 0.5).expect("valid model")
}

fn stable_model() -> ModelSpec {
    ModelSpec::stable(1.5).expect("valid model")
}

fn criterion_1(tol: &Tolerances) -> Result<CriterionResult> {
    let start = Instant::now();
    let hf = HFunction::new(ModelSpec::standard_bm());
    let oracle = BmClosedForms::default();
    let mut checks = Vec::new();
    for k in -4..=4 {
        let q = 2f64.powi(k);
        for x in [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0] {
            let v = hf.resolvent_density(q, x)?;
            checks.push(Check::abs(format!("r_q(x) q=2^{k} x={x}"), v, oracle.rq(q, x), tol.quadrature_abs));
        }
    }
    Ok(finish(1, "resolvent density vs Brownian closed form", checks, Some(tol.quadrature_seconds), start))
}

fn criterion_2(tol: &Tolerances) -> Result<CriterionResult> {
    let start = Instant::now();
    let bm = HFunction::new(ModelSpec::standard_bm());
    let mut checks = Vec::new();
    for x in [0.25f64, -0.25, 1.0, -1.0, 4.0, -4.0] {
        checks.push(Check::abs(format!("h(x) x={x}"), bm.h(x)?, x.abs(), tol.h_abs));
    }
    let st = HFunction::new(stable_model());
    let ratio = st.h(2.0)? / st.h(1.0)?;
    checks.push(Check::abs("stable h(2)/h(1)", ratio, 2f64.sqrt(), tol.stable_scaling));
    Ok(finish(2, "renormalized zero resolvent", checks, Some(tol.h_seconds), start))
}

fn criterion_3(tol: &Tolerances) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let configs = [
        (0.3, 0.0, 1.0, -1.5),
        (2.0, -1.0, 0.5, 3.0),
        (-0.7, 1.2, -2.0, 0.4),
        (5.0, 0.0, 1.0, 2.5),
    ];
    for model in [ModelSpec::standard_bm(), stable_model(), jump_model()] {
        let hf = HFunction::new(model);
        let m = model.label();
        for &(x, a, b, c) in &configs {
            let s = hit_prob(&hf, x, a, b)? + hit_prob(&hf, x, b, a)?;
            checks.push(Check::abs(format!("{m}: hit_prob complement x={x} a={a} b={b}"), s, 1.0, tol.identity));
            let s3 = hit_prob3(&hf, x, a, b, c)? + hit_prob3(&hf, x, b, c, a)? + hit_prob3(&hf, x, c, a, b)?;
            checks.push(Check::abs(format!("{m}: hit_prob3 partition x={x}"), s3, 1.0, tol.identity));
            let (l, r) = (h_c(&hf, a - x, b - x)?, h_c(&hf, b - x, a - x)?);
            checks.push(Check::abs(format!("{m}: h_c swap a={} b={}", a - x, b - x), l, r, tol.identity));
        }
        for a in [0.5, -1.5, 3.0] {
            let beta = model.inverse_r0_exponent();
            let lim = hf.q_limit(a, beta, |q| Ok(QuadValue::new(hf.hb_q(q, a)?, 0.0)))?;
            let bound = hf.extrapolation_config().stop_tol * lim.value.abs().max(1.0) * 10.0;
            checks.push(Check::abs(format!("{m}: h_b({a}) vs q-limit of h_b_q"), h_b(&hf, a)?, lim.value, bound));
        }
    }
    let bm = HFunction::new(ModelSpec::standard_bm());
    checks.push(Check::abs("BM h_c(1,-1)", h_c(&bm, 1.0, -1.0)?, 1.0, tol.h_c_abs));
    checks.push(Check::abs("BM h_c(2,-1)", h_c(&bm, 2.0, -1.0)?, 4.0 / 3.0, tol.h_c_abs));
    Ok(finish(3, "hitting calculus identities", checks, None, start))
}

fn criterion_4(tol: &Tolerances, seed: u64) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let bm = HFunction::new(ModelSpec::standard_bm());
    let p = bm_params();
    checks.push(Check::abs("BM phi(0)", phi(&bm, &p, 0.0)?, 0.5, tol.phi_abs));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jumps = HFunction::new(jump_model());
    let asym = PenalizationParams::new(-0.5, 1.0, 0.7, 2.0, 0.3)?;
    for (name, hf) in [("BM", &bm), ("bm_jumps", &jumps)] {
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let x = rng.random_range(-5.0..5.0);
            let given = PhiEvaluator::with_order(hf, asym)?.phi(x)?;
            let swapped = PhiEvaluator::with_order(hf, asym.swapped())?.phi(x)?;
            worst = worst.max((given - swapped).abs());
        }
        checks.push(Check::new(format!("{name}: phi swap symmetry, 200 points"), worst, 0.0, worst, tol.symmetry));
        let mut worst: f64 = 0.0;
        for x in [-2.0, -0.5, 0.3, 1.7, 4.0] {
            let up = phi(hf, &asym.with_gamma(1.0)?, x)?;
            let down = phi(hf, &asym.with_gamma(-1.0)?, x)?;
            for g in [-0.6, 0.2, 0.9] {
                let v = phi(hf, &asym.with_gamma(g)?, x)?;
                worst = worst.max((v - 0.5 * (1.0 + g) * up - 0.5 * (1.0 - g) * down).abs());
            }
        }
        checks.push(Check::new(format!("{name}: affine in gamma"), worst, 0.0, worst, tol.affine));
    }

    let weak = PenalizationParams::new(0.0, 1.0, 1.0, 1e-6, 0.0)?;
    for x in [0.0, 1.0, 2.0] {
        checks.push(Check::abs(
            format!("BM phi(lambda_b=1e-6) at x={x} vs h(x)+1"),
            phi(&bm, &weak, x)?,
            bm.h(x)? + 1.0,
            tol.reduction,
        ));
    }

    let st = HFunction::new(stable_model());
    let mut worst: f64 = 0.0;
    for x in [-3.0, -0.4, 0.5, 2.2] {
        let base = phi(&st, &asym.with_gamma(0.0)?, x)?;
        for g in [-1.0, -0.3, 0.5, 1.0] {
            worst = worst.max((phi(&st, &asym.with_gamma(g)?, x)? - base).abs());
        }
    }
    checks.push(Check::new("stable: phi independent of gamma", worst, 0.0, worst, tol.gamma_independence));
    Ok(finish(4, "martingale density phi", checks, None, start))
}

fn mc_check(name: &str, mean: f64, se: f64, exact: f64, tol: &Tolerances) -> Check {
    let bound = tol.mc_sigmas * se + tol.mc_budget * exact.abs();
    Check::abs(name, mean, exact, bound)
}

fn criterion_5(cfg: &VerifyConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let tol = &cfg.tolerances;
    let model = ModelSpec::standard_bm();
    let hf = HFunction::new(model);
    let p = bm_params();
    let sim = cfg.sim();
    let mut checks = Vec::new();
    for clock in [
        ClockSpec::Hitting { c: 5.0 },
        ClockSpec::TwoPoint { c: 4.0, d: 4.0 },
        ClockSpec::InverseLocalTime { c: 3.0, u: 1.0 },
    ] {
        let exact = expect_exact(&hf, &p, &clock, 0.5)?.expect("closed form exists");
        let e = estimate_weighted(&model, &p, &clock, 0.5, &sim)?;
        checks.push(mc_check(&format!("{} clock {clock:?}", clock.name()), e.mean, e.std_err, exact, tol));
        checks.push(Check::flag(format!("{} clock truncation below 1%", clock.name()), e.reliable));
    }
    Ok(finish(5, "exact clock expectations vs simulation", checks, Some(tol.mc_seconds), start))
}

fn criterion_6(cfg: &VerifyConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let tol = &cfg.tolerances;
    let p = bm_params();
    let sim = cfg.sim();
    let mut checks = Vec::new();
    for model in [ModelSpec::standard_bm(), stable_model()] {
        let table = HTable::build(Arc::new(HFunction::new(model)), 50.0, 0.0125)?;
        let m = verify_martingale(&table, &model, &p, 0.5, 1.0, &sim)?;
        let bound = tol.mc_sigmas * m.estimate.std_err + tol.mc_budget * m.phi_x;
        checks.push(Check::new(
            format!("{}: E[M_1] - phi(0.5)", model.label()),
            m.estimate.mean,
            0.0,
            m.estimate.mean.abs(),
            bound,
        ));
    }
    Ok(finish(6, "martingale property", checks, None, start))
}

fn criterion_7(cfg: &VerifyConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let tol = &cfg.tolerances;
    let hf = HFunction::new(ModelSpec::standard_bm());
    let p = bm_params();
    let sim = cfg.sim();
    let ladder = vec![4.0, 8.0, 16.0, 32.0];
    let mut checks = Vec::new();

    let r = limit_sweep(&hf, &hf, &p, 0.5, &SweepSpec::Hitting { ladder: ladder.clone() }, &sim)?;
    checks.push(Check::flag("hitting: gaps decrease", r.gaps_decreasing("total")));
    let last = r.component("total")[ladder.len() - 1].clone();
    checks.push(Check::new("hitting: final relative gap", last.normalized, last.target, last.rel_gap, tol.hitting_gap));

    let spec = SweepSpec::TwoPoint {
        ladder: ladder.clone(),
        ratio: 3.0,
    };
    let r = limit_sweep(&hf, &hf, &p, 0.5, &spec, &sim)?;
    checks.push(Check::flag("two-point: restricted gaps decrease", r.gaps_decreasing("restricted_c")));
    let last = r.component("restricted_c")[ladder.len() - 1].clone();
    checks.push(Check::new(
        "two-point: final relative gap (restricted to c, gamma=0.5)",
        last.normalized,
        last.target,
        last.rel_gap,
        tol.two_point_gap,
    ));

    let spec = SweepSpec::InverseLocalTime {
        ladder: ladder.clone(),
        u: 1.0,
    };
    let r = limit_sweep(&hf, &hf, &p, 0.5, &spec, &sim)?;
    let factors: Vec<f64> = r.rows.iter().filter_map(|row| row.excursion_factor).collect();
    checks.push(Check::flag(
        "inverse local time: exp(-u Lambda(c)) increases toward 1",
        factors.windows(2).all(|w| w[1] > w[0]) && factors.iter().all(|&f| f < 1.0),
    ));
    let last = r.component("total")[ladder.len() - 1].clone();
    checks.push(Check::new(
        "inverse local time: final relative gap",
        last.normalized,
        last.target,
        last.rel_gap,
        tol.inverse_lt_gap,
    ));

    let spec = SweepSpec::Exponential {
        ladder: vec![1.0, 0.25, 0.0625],
    };
    let r = limit_sweep(&hf, &hf, &p, 0.0, &spec, &sim)?;
    checks.push(Check::flag("exponential: gaps decrease", r.gaps_decreasing("total")));
    let last = r.component("total")[2].clone();
    let se = last.std_err.unwrap_or(0.0) * last.normalizer;
    checks.push(Check::new(
        "exponential: final gap",
        last.normalized,
        last.target,
        last.abs_gap,
        tol.mc_sigmas * se + tol.exponential_gap * last.target,
    ));
    checks.push(Check::flag("exponential: rungs reliable", r.rows.iter().all(|row| row.reliable)));
    Ok(finish(7, "clock-limit sweeps", checks, None, start))
}

fn criterion_8(cfg: &VerifyConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let tol = &cfg.tolerances;
    let sim = Simulation::new(
        &ModelSpec::standard_bm(),
        StopRule::Clock(ClockSpec::InverseLocalTime { c: 0.0, u: 1.0 }),
        Functional::discount(1.0),
        &[],
        cfg.sim(),
    )?;
    let e = sim.estimate(0.0)?;
    let exact = (-2f64.sqrt()).exp();
    let checks = vec![Check::abs(
        "E_0 exp(-eta_1), q=1",
        e.mean,
        exact,
        tol.mc_sigmas * e.std_err,
    )];
    Ok(finish(8, "inverse local time Laplace law", checks, None, start))
}

fn criterion_9(cfg: &VerifyConfig) -> Result<CriterionResult> {
    let start = Instant::now();
    let inner = VerifyConfig {
        scale: cfg.scale * cfg.repro_scale,
        criteria: (1..CRITERIA).collect(),
        ..cfg.clone()
    };
    let render = |r: &VerifyReport| serde_json::to_string(r).expect("report serializes");
    let first = render(&run_verify(&inner)?);
    let second = render(&run_verify(&inner)?);
    let pool = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))
    };
    let one = pool(1)?.install(|| run_verify(&inner))?;
    let eight = pool(8)?.install(|| run_verify(&inner))?;
    let checks = vec![
        Check::flag("same seed twice: identical reports", first == second),
        Check::flag("1 vs 8 threads: identical reports", render(&one) == render(&eight)),
        Check::flag("threaded run matches default pool", render(&one) == first),
    ];
    Ok(finish(9, "reproducibility", checks, None, start))
}

/// Runs the selected criteria in order.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let tol = &cfg.tolerances;
    let mut criteria = Vec::new();
    for id in 1..=CRITERIA {
        if !cfg.selected(id) {
            continue;
        }
        criteria.push(match id {
            1 => criterion_1(tol)?,
            2 => criterion_2(tol)?,
            3 => criterion_3(tol)?,
            4 => criterion_4(tol, cfg.seed)?,
            5 => criterion_5(cfg)?,
            6 => criterion_6(cfg)?,
            7 => criterion_7(cfg)?,
            8 => criterion_8(cfg)?,
            _ => criterion_9(cfg)?,
        });
    }
    Ok(VerifyReport {
        seed: cfg.seed,
        scale: cfg.scale,
        dt: cfg.dt,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}
