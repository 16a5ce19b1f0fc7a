//! Monte Carlo estimation of weighted clock functionals.
//!
//! Paths are simulated in blocks; block `i` draws from the ChaCha8 stream
//! `i` of the run seed, and block results are merged in block order, so an
//! estimate depends only on the seed and the configuration, never on the
//! number of worker threads.

mod sampler;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::penalization::{ClockSpec, PenalizationParams, PhiEvaluator, WeightState};
use crate::resolvent::ZeroResolvent;

pub use sampler::{symmetric_stable, PathState, Stepper};

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Base time step (the step used near tracked points).
    pub dt: f64,
    /// Half-width of the occupation band; `0.5·√dt` when absent.
    pub eps: Option<f64>,
    pub n_paths: usize,
    /// Safety horizon: paths still running at `t_max` are truncated.
    pub t_max: f64,
    pub seed: u64,
    /// Paths per RNG stream.
    pub block_size: usize,
    /// Near clock points, Gaussian models step by at most
    /// `max(dt, (dist/adaptive_factor)²)` for inverse-local-time clocks and
    /// for discounted hitting clocks.
    pub adaptive_factor: f64,
    /// Paths whose remaining weight falls below this are stopped and
    /// contribute zero.
    pub weight_floor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            eps: None,
            n_paths: 100_000,
            t_max: 1e7,
            seed: 0,
            block_size: 1000,
            adaptive_factor: 5.0,
            weight_floor: 1e-12,
        }
    }
}

impl SimConfig {
    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or(0.5 * self.dt.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        let eps = self.eps();
        if !(eps > 0.0 && eps.is_finite()) {
            return bad(format!("eps must be positive, got {eps}"));
        }
        if eps * eps < 0.1 * self.dt {
            return bad(format!("eps = {eps} is too small for dt = {}", self.dt));
        }
        if self.n_paths == 0 || self.block_size == 0 {
            return bad("n_paths and block_size must be positive".into());
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive and finite, got {}", self.t_max));
        }
        if !(self.adaptive_factor > 0.0 && self.weight_floor >= 0.0 && self.weight_floor < 1.0) {
            return bad("adaptive_factor and weight_floor out of range".into());
        }
        Ok(())
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
    pub truncated_fraction: f64,
    pub seed: u64,
    /// False when more than 1% of paths hit the horizon.
    pub reliable: bool,
}

impl Estimate {
    /// True when `|mean - target| ≤ k·std_err + budget`.
    pub fn agrees_with(&self, target: f64, k: f64, budget: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err + budget
    }

    pub fn scaled(&self, factor: f64) -> Estimate {
        Estimate {
            mean: self.mean * factor,
            std_err: self.std_err * factor.abs(),
            ..*self
        }
    }
}

/// When a path stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopRule {
    /// Deterministic time `s`.
    Fixed { s: f64 },
    Clock(ClockSpec),
}

/// Multiplicative path functional `exp(-Σ λ_i L^{p_i}_τ - qτ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    /// `(p_i, λ_i)`, with `λ_i ≥ 0`.
    pub penalized: Vec<(f64, f64)>,
    /// Discount rate `q ≥ 0`.
    pub discount: f64,
}

impl Functional {
    pub fn penalization(p: &PenalizationParams) -> Self {
        Functional {
            penalized: vec![(p.a(), p.lam_a()), (p.b(), p.lam_b())],
            discount: 0.0,
        }
    }

    pub fn discount(q: f64) -> Self {
        Functional {
            penalized: vec![],
            discount: q,
        }
    }
}

/// Final state of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub state: PathState,
    /// Value of the functional at the stopping time.
    pub weight: f64,
    pub truncated: bool,
    /// Stopped because the weight fell below the floor.
    pub floored: bool,
    /// Index (in the tracked-point list) of the point whose visit stopped
    /// the path, if any.
    pub stopped_at: Option<usize>,
}

const SEPARATION_FACTOR: f64 = 60.0;

/// A simulation plan: model, tracked points, stop rule and functional.
#[derive(Debug, Clone)]
pub struct Simulation {
    stepper: Stepper,
    stop: StopRule,
    functional: Functional,
    cfg: SimConfig,
    /// indices of the penalized points
    pen_idx: Vec<(usize, f64)>,
    /// indices of the clock points
    clock_idx: Vec<usize>,
    /// points whose visit stops the path
    stop_mask: u64,
}

impl Simulation {
    /// Tracks the penalized points first, then the clock points, then
    /// `extra` (in that order, with duplicates merged).
    pub fn new(
        model: &ModelSpec,
        stop: StopRule,
        functional: Functional,
        extra: &[f64],
        cfg: SimConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(functional.discount >= 0.0 && functional.discount.is_finite())
            || functional.penalized.iter().any(|&(_, l)| !(l >= 0.0 && l.is_finite()))
        {
            return Err(Error::InvalidParameter("functional rates must be non-negative".into()));
        }
        let mut points: Vec<f64> = Vec::new();
        let index_of = |p: f64, pts: &mut Vec<f64>| -> usize {
            match pts.iter().position(|&q| q == p) {
                Some(i) => i,
                None => {
                    pts.push(p);
                    pts.len() - 1
                }
            }
        };
        let pen_idx = functional
            .penalized
            .iter()
            .map(|&(p, l)| (index_of(p, &mut points), l))
            .collect();
        let clock_points: Vec<f64> = match stop {
            StopRule::Fixed { s } => {
                if !(s >= 0.0 && s <= cfg.t_max) {
                    return Err(Error::InvalidParameter(format!("fixed time {s} outside [0, t_max]")));
                }
                vec![]
            }
            StopRule::Clock(ClockSpec::Exponential { q }) => {
                if !(q > 0.0 && q.is_finite()) {
                    return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
                }
                vec![]
            }
            StopRule::Clock(ClockSpec::Hitting { c }) => vec![c],
            StopRule::Clock(ClockSpec::TwoPoint { c, d }) => vec![c, -d],
            StopRule::Clock(ClockSpec::InverseLocalTime { c, u }) => {
                if !(u > 0.0 && u.is_finite()) {
                    return Err(Error::InvalidParameter(format!("u must be positive, got {u}")));
                }
                vec![c]
            }
        };
        let clock_idx: Vec<usize> = clock_points.iter().map(|&p| index_of(p, &mut points)).collect();
        for &p in extra {
            index_of(p, &mut points);
        }
        if points.len() > 64 {
            return Err(Error::InvalidParameter("at most 64 tracked points".into()));
        }
        let stop_mask = match stop {
            StopRule::Clock(ClockSpec::Hitting { .. } | ClockSpec::TwoPoint { .. }) => {
                clock_idx.iter().fold(0u64, |m, &i: &usize| m | (1 << i))
            }
            _ => 0,
        };
        Ok(Simulation {
            stop_mask,
            stepper: Stepper::new(model, points, cfg.eps()),
            stop,
            functional,
            cfg,
            pen_idx,
            clock_idx,
        })
    }

    pub fn points(&self) -> &[f64] {
        self.stepper.points()
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Step length at `x`. Gaussian stretches are sampled exactly, so the
    /// step is only limited by the chance of visiting two tracked points
    /// in one step (below `e^{-30}`) and, when the clock or the discount
    /// depends on time spent near a clock point, by the overshoot there.
    fn step_size(&self, x: f64) -> f64 {
        let cfg = &self.cfg;
        if !self.stepper.is_exact() {
            return cfg.dt;
        }
        let (_, d2) = self.stepper.nearest_two(x);
        let mut h = (d2 * d2 / SEPARATION_FACTOR).max(cfg.dt);
        let timed_clock = match self.stop {
            StopRule::Clock(ClockSpec::InverseLocalTime { .. }) => true,
            StopRule::Clock(ClockSpec::Hitting { .. } | ClockSpec::TwoPoint { .. }) => {
                self.functional.discount > 0.0
            }
            _ => false,
        };
        if timed_clock {
            let points = self.points();
            let dc = self.clock_idx.iter().map(|&i| (x - points[i]).abs()).fold(f64::INFINITY, f64::min);
            let d = dc / cfg.adaptive_factor;
            h = h.min((d * d).max(cfg.dt));
        }
        h
    }

    fn log_weight(&self, s: &PathState) -> f64 {
        -self.pen_idx.iter().map(|&(i, l)| l * s.l[i]).sum::<f64>() - self.functional.discount * s.t
    }

    /// Simulates one path from `x0`.
    pub fn run_path<R: Rng + ?Sized>(&self, x0: f64, rng: &mut R) -> PathOutcome {
        let cfg = &self.cfg;
        let mut state = PathState::new(x0, self.points().len());
        let horizon = match self.stop {
            StopRule::Fixed { s } => s,
            StopRule::Clock(ClockSpec::Exponential { q }) => {
                (rng.sample::<f64, _>(Exp1) / q).min(cfg.t_max)
            }
            StopRule::Clock(_) => cfg.t_max,
        };
        let timed = matches!(
            self.stop,
            StopRule::Fixed { .. } | StopRule::Clock(ClockSpec::Exponential { .. })
        );
        let floor_log = if cfg.weight_floor > 0.0 {
            cfg.weight_floor.ln()
        } else {
            f64::NEG_INFINITY
        };
        let finish = |state: PathState, truncated, floored, stopped_at| {
            let weight = if floored { 0.0 } else { self.log_weight(&state).exp() };
            PathOutcome {
                state,
                weight,
                truncated,
                floored,
                stopped_at,
            }
        };

        // regularity: a clock point at the start is hit at time 0
        if let StopRule::Clock(ClockSpec::Hitting { .. } | ClockSpec::TwoPoint { .. }) = self.stop {
            if let Some(&i) = self.clock_idx.iter().find(|&&i| self.points()[i] == x0) {
                return finish(state, false, false, Some(i));
            }
        }

        loop {
            let remaining = horizon - state.t;
            if remaining <= 0.0 {
                return finish(state, !timed, false, None);
            }
            if self.log_weight(&state) < floor_log {
                return finish(state, false, true, None);
            }
            let mut h = self.step_size(state.x);
            // avoid a sliver step at the end
            if h >= remaining || remaining - h < 1e-3 * cfg.dt {
                h = remaining;
            }
            let hits = self.stepper.step(&mut state, h, self.stop_mask, rng);
            if timed && h == remaining {
                state.t = horizon;
            }
            match self.stop {
                StopRule::Clock(ClockSpec::Hitting { .. } | ClockSpec::TwoPoint { .. }) => {
                    if let Some(&i) = self.clock_idx.iter().find(|&&i| hits & (1 << i) != 0) {
                        return finish(state, false, false, Some(i));
                    }
                }
                StopRule::Clock(ClockSpec::InverseLocalTime { u, .. }) => {
                    let i = self.clock_idx[0];
                    if state.l[i] > u {
                        return finish(state, false, false, Some(i));
                    }
                }
                _ => {}
            }
        }
    }

    /// Simulates `n_paths` paths from `x0`, calling `f` on each outcome;
    /// results are returned in path order.
    pub fn map_paths<T, F>(&self, x0: f64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&PathOutcome) -> T + Sync,
    {
        let cfg = &self.cfg;
        let n_blocks = cfg.n_paths.div_ceil(cfg.block_size);
        let blocks: Vec<Vec<T>> = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(b as u64);
                let start = b * cfg.block_size;
                let end = (start + cfg.block_size).min(cfg.n_paths);
                (start..end).map(|_| f(&self.run_path(x0, &mut rng))).collect()
            })
            .collect();
        blocks.into_iter().flatten().collect()
    }

    /// Estimate of `E[g(outcome)]`, with truncation statistics.
    pub fn estimate_with<F>(&self, x0: f64, g: F) -> Result<Estimate>
    where
        F: Fn(&PathOutcome) -> Result<f64> + Sync,
    {
        let values = self.map_paths(x0, |o| (g(o), o.truncated));
        let mut stats = Moments::default();
        let mut truncated = 0usize;
        for (v, t) in values {
            stats.push(v?);
            truncated += t as usize;
        }
        Ok(stats.estimate(truncated, self.cfg.seed))
    }

    /// Estimate of the functional at the stopping time.
    pub fn estimate(&self, x0: f64) -> Result<Estimate> {
        self.estimate_with(x0, |o| Ok(o.weight))
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn estimate(&self, truncated: usize, seed: u64) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        let truncated_fraction = truncated as f64 / self.n.max(1) as f64;
        Estimate {
            mean: self.mean,
            std_err: (var / self.n.max(1) as f64).sqrt(),
            n: self.n,
            truncated_fraction,
            seed,
            reliable: truncated_fraction <= 0.01,
        }
    }
}

/// Monte Carlo estimate of `P_x[Γ_τ]` for `Γ = e^{-λa L^a - λb L^b}`.
pub fn estimate_weighted(
    model: &ModelSpec,
    p: &PenalizationParams,
    clock: &ClockSpec,
    x: f64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    clock.validate(p)?;
    Simulation::new(model, StopRule::Clock(*clock), Functional::penalization(p), &[], *cfg)?
        .estimate(x)
}

/// Outcome of a martingale check at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    /// Estimate of `E_x[M_s] - φ(x)`.
    pub estimate: Estimate,
    pub phi_x: f64,
    /// Allowance for discretization bias.
    pub bias_budget: f64,
    pub passes: bool,
}

/// Relative discretization allowance used by [`verify_martingale`].
pub const MARTINGALE_BIAS_BUDGET: f64 = 0.02;

/// Checks `E_x[φ(X_s)Γ_s] = φ(x)` by simulation.
pub fn verify_martingale<H: ZeroResolvent + ?Sized>(
    h: &H,
    model: &ModelSpec,
    p: &PenalizationParams,
    x: f64,
    s: f64,
    cfg: &SimConfig,
) -> Result<MartingaleCheck> {
    let phi = PhiEvaluator::new(h, *p)?;
    let phi_x = phi.phi(x)?;
    let bias_budget = MARTINGALE_BIAS_BUDGET * phi_x;
    if s == 0.0 {
        let estimate = Estimate {
            mean: 0.0,
            std_err: 0.0,
            n: cfg.n_paths,
            truncated_fraction: 0.0,
            seed: cfg.seed,
            reliable: true,
        };
        return Ok(MartingaleCheck {
            estimate,
            phi_x,
            bias_budget,
            passes: true,
        });
    }
    let sim = Simulation::new(model, StopRule::Fixed { s }, Functional::penalization(p), &[], *cfg)?;
    let (ia, ib) = (0, 1);
    let estimate = sim.estimate_with(x, |o| {
        if o.floored {
            return Ok(-phi_x);
        }
        let ws = WeightState {
            x_t: o.state.x,
            l_a: o.state.l[ia],
            l_b: o.state.l[ib],
        };
        Ok(phi.martingale_value(&ws)? - phi_x)
    })?;
    Ok(MartingaleCheck {
        estimate,
        phi_x,
        bias_budget,
        passes: estimate.agrees_with(0.0, 3.0, bias_budget),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bm_oracle::BmClosedForms;

    fn cfg(n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_paths: n,
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_rates_give_one() {
        let m = ModelSpec::standard_bm();
        let f = Functional {
            penalized: vec![(0.0, 0.0), (1.0, 0.0)],
            discount: 0.0,
        };
        let sim = Simulation::new(&m, StopRule::Clock(ClockSpec::Hitting { c: 2.0 }), f, &[], cfg(2000, 1)).unwrap();
        let e = sim.estimate(0.5).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_err, 0.0);
    }

    #[test]
    fn hitting_laplace_bm() {
        let m = ModelSpec::standard_bm();
        let q = 0.5;
        let sim = Simulation::new(
            &m,
            StopRule::Clock(ClockSpec::Hitting { c: 1.0 }),
            Functional::discount(q),
            &[],
            cfg(20_000, 7),
        )
        .unwrap();
        let e = sim.estimate(0.0).unwrap();
        let exact = BmClosedForms::default().hitting_laplace(q, 1.0);
        assert!(e.agrees_with(exact, 3.0, 0.0), "{e:?} vs {exact}");
    }

    #[test]
    fn local_time_at_hit_is_exponential() {
        // L^0_{T_1} from 0 is exponential with mean h^B(1) = 2
        let m = ModelSpec::standard_bm();
        let sim = Simulation::new(
            &m,
            StopRule::Clock(ClockSpec::Hitting { c: 1.0 }),
            Functional::discount(0.0),
            &[0.0],
            cfg(20_000, 11),
        )
        .unwrap();
        let i0 = sim.points().iter().position(|&p| p == 0.0).unwrap();
        let ls = sim.map_paths(0.0, |o| o.state.l[i0]);
        let n = ls.len() as f64;
        let mean = ls.iter().sum::<f64>() / n;
        let sd = (ls.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean / 2.0 - 1.0).abs() < 0.03, "mean {mean}");
        assert!((sd / mean - 1.0).abs() < 0.05, "cv {}", sd / mean);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let m = ModelSpec::standard_bm();
        let p = PenalizationParams::new(0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let c = SimConfig {
            block_size: 100,
            ..cfg(1000, 5)
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_weighted(&m, &p, &ClockSpec::Hitting { c: 3.0 }, 0.5, &c).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn two_point_exit_side() {
        // from 0, BM exits (-1, 2) at 2 with probability 1/3
        let m = ModelSpec::standard_bm();
        let sim = Simulation::new(
            &m,
            StopRule::Clock(ClockSpec::TwoPoint { c: 2.0, d: 1.0 }),
            Functional::discount(0.0),
            &[],
            cfg(20_000, 3),
        )
        .unwrap();
        let e = sim
            .estimate_with(0.0, |o| Ok(if o.state.x > 0.0 { 1.0 } else { 0.0 }))
            .unwrap();
        assert!(e.agrees_with(1.0 / 3.0, 3.0, 0.0), "{e:?}");
    }

    #[test]
    fn bad_config() {
        let c = SimConfig {
            eps: Some(1e-5),
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
    }
}
