//! Path increments and local-time updates.
//!
//! Gaussian stretches (Brownian motion, and the diffusive part of
//! Brownian motion with jumps) are advanced with exact Gaussian increments,
//! and the local time at each tracked point is drawn from its exact law
//! given the two endpoints: for a bridge of `σB` over time `h` from `x0` to
//! `x1`, with `k = |x0-p| + |x1-p|` and `Δ = x1 - x0`,
//! `σ L^p = max(0, √(Δ² + 2σ²hE) - k)` with `E ~ Exp(1)`
//! (occupation-density normalization). The event `L^p > 0` is exactly the
//! event that the bridge visits `p`, so point hits are exact as well.
//!
//! Stable paths use Chambers–Mallows–Stuck increments with the occupation
//! kernel `dt/(2ε)·1{|x - p| < ε}` and an `ε`-band hit test.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::models::{ModelKind, ModelSpec};

/// Position, time and local times at the tracked points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub x: f64,
    /// Local time at each tracked point, in the simulator's point order.
    pub l: Vec<f64>,
}

impl PathState {
    pub fn new(x: f64, n_points: usize) -> Self {
        PathState {
            t: 0.0,
            x,
            l: vec![0.0; n_points],
        }
    }
}

/// Standard symmetric α-stable variate (`E e^{iλS} = e^{-|λ|^α}`).
pub fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
    if alpha == 2.0 {
        let n: f64 = rng.sample(StandardNormal);
        return std::f64::consts::SQRT_2 * n;
    }
    let w: f64 = rng.sample(Exp1);
    let v = v.clamp(-FRAC_PI_2 + 1e-15, FRAC_PI_2 - 1e-15);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Advances paths of one model while tracking local times at fixed points.
#[derive(Debug, Clone)]
pub struct Stepper {
    kind: ModelKind,
    points: Vec<f64>,
    eps: f64,
}

impl Stepper {
    pub fn new(model: &ModelSpec, points: Vec<f64>, eps: f64) -> Self {
        Stepper {
            kind: *model.kind(),
            points,
            eps,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Band half-width used by the stable kernel.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// True when hits and local times are exact given the time grid.
    pub fn is_exact(&self) -> bool {
        !matches!(self.kind, ModelKind::SymmetricStable { .. })
    }

    /// Distance from `x` to the nearest tracked point.
    pub fn distance(&self, x: f64) -> f64 {
        self.points
            .iter()
            .map(|p| (x - p).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Distances from `x` to the nearest and second-nearest tracked points
    /// (infinite when absent).
    pub fn nearest_two(&self, x: f64) -> (f64, f64) {
        let mut d = (f64::INFINITY, f64::INFINITY);
        for p in &self.points {
            let e = (x - p).abs();
            if e < d.0 {
                d = (e, d.0);
            } else if e < d.1 {
                d.1 = e;
            }
        }
        d
    }

    /// Advances `state` by `h`, setting bit `i` of the result when point `i`
    /// was visited during the step.
    ///
    /// When a continuous stretch visits a point in `stop_mask`, the step
    /// ends there: the position is set to that point and no local time is
    /// added at it.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut PathState, h: f64, stop_mask: u64, rng: &mut R) -> u64 {
        match self.kind {
            ModelKind::BrownianMotion { sigma } => self.gaussian(state, sigma, h, stop_mask, rng),
            ModelKind::BrownianWithGaussianJumps {
                sigma,
                jump_rate,
                jump_std,
            } => {
                let mut hits = 0;
                let mut rest = h;
                loop {
                    let to_jump = if jump_rate > 0.0 {
                        rng.sample::<f64, _>(Exp1) / jump_rate
                    } else {
                        f64::INFINITY
                    };
                    if to_jump >= rest {
                        hits |= self.gaussian(state, sigma, rest, stop_mask, rng);
                        break;
                    }
                    hits |= self.gaussian(state, sigma, to_jump, stop_mask, rng);
                    if hits & stop_mask != 0 {
                        break;
                    }
                    let z: f64 = rng.sample(StandardNormal);
                    state.x += jump_std * z;
                    rest -= to_jump;
                }
                hits
            }
            ModelKind::SymmetricStable { alpha } => self.stable(state, alpha, h, rng),
        }
    }

    fn gaussian<R: Rng + ?Sized>(
        &self,
        state: &mut PathState,
        sigma: f64,
        h: f64,
        stop_mask: u64,
        rng: &mut R,
    ) -> u64 {
        let x0 = state.x;
        let z: f64 = rng.sample(StandardNormal);
        let x1 = x0 + sigma * h.sqrt() * z;
        let s2h = sigma * sigma * h;
        let delta = x1 - x0;
        let mut hits = 0;
        for (i, &p) in self.points.iter().enumerate() {
            let (u, v) = (x0 - p, x1 - p);
            let k = u.abs() + v.abs();
            // visit probability exp(-2uv/(σ²h)) on the same side
            if u * v > 0.0 && 2.0 * u * v > 60.0 * s2h {
                continue;
            }
            let e: f64 = rng.sample(Exp1);
            let scaled = (delta * delta + 2.0 * s2h * e).sqrt() - k;
            if scaled > 0.0 {
                hits |= 1 << i;
                if stop_mask & (1 << i) == 0 {
                    state.l[i] += scaled / (sigma * sigma);
                }
            }
        }
        state.x = x1;
        if hits & stop_mask != 0 {
            state.x = self.points[(hits & stop_mask).trailing_zeros() as usize];
        }
        state.t += h;
        hits
    }

    fn stable<R: Rng + ?Sized>(&self, state: &mut PathState, alpha: f64, h: f64, rng: &mut R) -> u64 {
        let x0 = state.x;
        let x1 = x0 + h.powf(1.0 / alpha) * symmetric_stable(alpha, rng);
        let mut hits = 0;
        for (i, &p) in self.points.iter().enumerate() {
            if (x0 - p).abs() < self.eps {
                state.l[i] += h / (2.0 * self.eps);
            }
            if (x1 - p).abs() < self.eps {
                hits |= 1 << i;
            }
        }
        state.x = x1;
        state.t += h;
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bm_increment_variance() {
        let st = Stepper::new(&ModelSpec::brownian(1.5).unwrap(), vec![], 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let (steps, dt) = (10, 1e-2);
        let mut sum2 = 0.0;
        for _ in 0..n {
            let mut s = PathState::new(0.0, 0);
            for _ in 0..steps {
                st.step(&mut s, dt, 0, &mut rng);
            }
            sum2 += s.x * s.x;
        }
        let var = sum2 / n as f64;
        let expected = 2.25 * steps as f64 * dt;
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn bm_local_time_mean_at_one() {
        // E_0 L^0_1 = √(2/π)
        let st = Stepper::new(&ModelSpec::standard_bm(), vec![0.0], 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut s = PathState::new(0.0, 1);
            for _ in 0..100 {
                st.step(&mut s, 0.01, 0, &mut rng);
            }
            sum += s.l[0];
        }
        let mean = sum / n as f64;
        let exact = (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean / exact - 1.0).abs() < 0.03, "{mean} vs {exact}");
    }

    #[test]
    fn stable_sample_scaling() {
        // characteristic function at λ = 1: E cos(S) = e^{-1}
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| symmetric_stable(1.5, &mut rng).cos()).sum::<f64>() / n as f64;
        assert!((m - (-1.0f64).exp()).abs() < 0.005, "{m}");
    }

    #[test]
    fn jump_model_variance() {
        let model = ModelSpec::brownian_with_jumps(1.0, 2.0, 0.5).unwrap();
        let st = Stepper::new(&model, vec![], 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let mut s = PathState::new(0.0, 0);
            st.step(&mut s, 1.0, 0, &mut rng);
            sum2 += s.x * s.x;
        }
        let var = sum2 / n as f64;
        assert!((var / 1.5 - 1.0).abs() < 0.02, "{var}");
    }
}
