//! Closed-form Brownian-motion ground truth.
//!
//! For `X = σB` every quantity in the calculus reduces to a piecewise-linear
//! boundary problem: `x ↦ E_x[e^{-Σ λ_i L^{p_i}_τ}; ...]` is linear between
//! the points involved, takes prescribed values at absorbing points, has a
//! slope jump `u'(p+) - u'(p-) = 2λ u(p)/σ²` at each penalized point, and
//! has prescribed slopes at `±∞`. [`PiecewiseLinear`] solves that problem;
//! the derivations are in `docs/bm_oracle.md`.

use crate::error::{Error, Result};

/// One node of a piecewise-linear boundary problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Value pinned at this point.
    Fixed { x: f64, value: f64 },
    /// Local time penalized at rate λ at this point.
    Kill { x: f64, lambda: f64 },
}

impl Node {
    fn x(&self) -> f64 {
        match *self {
            Node::Fixed { x, .. } | Node::Kill { x, .. } => x,
        }
    }
}

/// Solution of a piecewise-linear boundary problem for `σB`.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    vs: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

impl PiecewiseLinear {
    pub fn solve(sigma: f64, mut nodes: Vec<Node>, left_slope: f64, right_slope: f64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("no nodes".into()));
        }
        nodes.sort_by(|p, q| p.x().total_cmp(&q.x()));
        if nodes.windows(2).any(|w| w[1].x() - w[0].x() < 1e-12) {
            return Err(Error::Degenerate("coincident nodes".into()));
        }
        let s2 = sigma * sigma;
        let n = nodes.len();
        let xs: Vec<f64> = nodes.iter().map(Node::x).collect();
        // unknowns are the values at all nodes; one equation per node
        let mut m = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Fixed { value, .. } => {
                    m[i][i] = 1.0;
                    rhs[i] = value;
                }
                Node::Kill { lambda, .. } => {
                    // slope_right - slope_left - 2λ v_i/σ² = 0
                    m[i][i] -= 2.0 * lambda / s2;
                    if i + 1 < n {
                        let w = 1.0 / (xs[i + 1] - xs[i]);
                        m[i][i + 1] += w;
                        m[i][i] -= w;
                    } else {
                        rhs[i] -= right_slope;
                    }
                    if i > 0 {
                        let w = 1.0 / (xs[i] - xs[i - 1]);
                        m[i][i] -= w;
                        m[i][i - 1] += w;
                    } else {
                        rhs[i] += left_slope;
                    }
                }
            }
        }
        let vs = gaussian_solve(m, rhs)?;
        Ok(PiecewiseLinear {
            xs,
            vs,
            left_slope,
            right_slope,
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.vs[0] + self.left_slope * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.vs[n - 1] + self.right_slope * (x - self.xs[n - 1]);
        }
        let i = self.xs.partition_point(|&p| p <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.vs[i] + t * (self.vs[i + 1] - self.vs[i])
    }

    /// One-sided slopes `(u'(x-), u'(x+))`.
    pub fn slopes_at(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let seg = |i: usize| (self.vs[i + 1] - self.vs[i]) / (self.xs[i + 1] - self.xs[i]);
        let slope_on = |k: usize| -> f64 {
            // k indexes the gaps: 0 is (-∞, x_0), n is (x_{n-1}, ∞)
            if k == 0 {
                self.left_slope
            } else if k == n {
                self.right_slope
            } else {
                seg(k - 1)
            }
        };
        let below = self.xs.partition_point(|&p| p < x);
        let upto = self.xs.partition_point(|&p| p <= x);
        (slope_on(below), slope_on(upto))
    }
}

fn gaussian_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[piv][col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular boundary problem".into()));
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Ok(x)
}

/// Brownian closed forms for `X = σB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmClosedForms {
    pub sigma: f64,
}

impl Default for BmClosedForms {
    fn default() -> Self {
        BmClosedForms { sigma: 1.0 }
    }
}

impl BmClosedForms {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(BmClosedForms { sigma })
        } else {
            Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")))
        }
    }

    fn s2(&self) -> f64 {
        self.sigma * self.sigma
    }

    fn k(&self, q: f64) -> f64 {
        (2.0 * q).sqrt() / self.sigma
    }

    /// `r_q(x) = e^{-√(2q)|x|/σ} / (σ√(2q))`.
    pub fn rq(&self, q: f64, x: f64) -> f64 {
        let k = self.k(q);
        (-k * x.abs()).exp() / (self.s2() * k)
    }

    /// `h_q(x) = (1 - e^{-√(2q)|x|/σ}) / (σ√(2q))`.
    pub fn h_q(&self, q: f64, x: f64) -> f64 {
        let k = self.k(q);
        -(-k * x.abs()).exp_m1() / (self.s2() * k)
    }

    pub fn h(&self, x: f64) -> f64 {
        x.abs() / self.s2()
    }

    pub fn h_gamma(&self, gamma: f64, x: f64) -> f64 {
        (x.abs() + gamma * x) / self.s2()
    }

    pub fn h_b(&self, a: f64) -> f64 {
        2.0 * a.abs() / self.s2()
    }

    /// `E_0[L^0_{T_a ∧ T_b}]`: by Tanaka's formula `E_0|X_T| / σ²`, which is
    /// `2|a||b|/((|a|+|b|)σ²)` on opposite sides and `h^B` of the nearer
    /// point on the same side.
    pub fn h_c(&self, a: f64, b: f64) -> f64 {
        if a * b < 0.0 {
            2.0 * a.abs() * b.abs() / ((a.abs() + b.abs()) * self.s2())
        } else {
            self.h_b(a.abs().min(b.abs()))
        }
    }

    /// Gambler's ruin `P_x(T_a < T_b)`.
    pub fn hit_prob(&self, x: f64, a: f64, b: f64) -> f64 {
        ((b - x) / (b - a)).clamp(0.0, 1.0)
    }

    /// `P_x(T_a < T_b ∧ T_c)`.
    pub fn hit_prob3(&self, x: f64, a: f64, b: f64, c: f64) -> Result<f64> {
        let nodes = vec![
            Node::Fixed { x: a, value: 1.0 },
            Node::Fixed { x: b, value: 0.0 },
            Node::Fixed { x: c, value: 0.0 },
        ];
        Ok(PiecewiseLinear::solve(self.sigma, nodes, 0.0, 0.0)?.value(x))
    }

    /// `P_x[e^{-q T_0}]`.
    pub fn hitting_laplace(&self, q: f64, x: f64) -> f64 {
        (-self.k(q) * x.abs()).exp()
    }

    /// `P_x[e^{-λ L^0_{e_q}}] = 1 - λ e^{-k|x|} / (σ²k + λ)`, `k = √(2q)/σ`.
    pub fn exp_clock_law(&self, q: f64, x: f64, lam: f64) -> f64 {
        let k = self.k(q);
        1.0 - lam * (-k * x.abs()).exp() / (self.s2() * k + lam)
    }

    /// `E_0[L^0_t] = √(2t/π)/σ` (Lévy: `σ² L^0_t` has the law of `|X_t|`).
    pub fn mean_local_time(&self, t: f64) -> f64 {
        (2.0 * t / std::f64::consts::PI).sqrt() / self.sigma
    }

    /// `E[e^{-q η_l}] = e^{-l/r_q(0)}` for the inverse local time at the start.
    pub fn inverse_local_time_laplace(&self, q: f64, l: f64) -> f64 {
        (-l / self.rq(q, 0.0)).exp()
    }

    /// The martingale density `φ^{(γ),λa,λb}_{a,b}(x)`: slopes `±(1±γ)/σ²`
    /// at `±∞` and slope jumps `2λ φ/σ²` at `a` and `b`.
    pub fn phi(&self, a: f64, b: f64, lam_a: f64, lam_b: f64, gamma: f64, x: f64) -> Result<f64> {
        let nodes = vec![
            Node::Kill { x: a, lambda: lam_a },
            Node::Kill { x: b, lambda: lam_b },
        ];
        let s2 = self.s2();
        let pl = PiecewiseLinear::solve(self.sigma, nodes, -(1.0 - gamma) / s2, (1.0 + gamma) / s2)?;
        Ok(pl.value(x))
    }

    fn gamma_solution(&self, a: f64, b: f64, lam_a: f64, lam_b: f64, targets: &[(f64, f64)]) -> Result<PiecewiseLinear> {
        let mut nodes = vec![
            Node::Kill { x: a, lambda: lam_a },
            Node::Kill { x: b, lambda: lam_b },
        ];
        nodes.extend(targets.iter().map(|&(x, value)| Node::Fixed { x, value }));
        PiecewiseLinear::solve(self.sigma, nodes, 0.0, 0.0)
    }

    /// `P_x[Γ_{T_c}]` with `Γ = e^{-λa L^a - λb L^b}`.
    pub fn gamma_at_hit(&self, a: f64, b: f64, lam_a: f64, lam_b: f64, x: f64, c: f64) -> Result<f64> {
        Ok(self.gamma_solution(a, b, lam_a, lam_b, &[(c, 1.0)])?.value(x))
    }

    /// `(P_x[Γ_{T_c}; T_c < T_{-d}], P_x[Γ_{T_{-d}}; T_{-d} < T_c], total)`.
    pub fn gamma_two_point(
        &self,
        a: f64,
        b: f64,
        lam_a: f64,
        lam_b: f64,
        x: f64,
        c: f64,
        d: f64,
    ) -> Result<(f64, f64, f64)> {
        let rc = self.gamma_solution(a, b, lam_a, lam_b, &[(c, 1.0), (-d, 0.0)])?.value(x);
        let rd = self.gamma_solution(a, b, lam_a, lam_b, &[(c, 0.0), (-d, 1.0)])?.value(x);
        Ok((rc, rd, rc + rd))
    }

    /// `Λ(c) = n^c[1 - Γ_{T_c}]`, read off the slope defect at `c` of
    /// `x ↦ P_x[Γ_{T_c}]`.
    pub fn excursion_exponent(&self, a: f64, b: f64, lam_a: f64, lam_b: f64, c: f64) -> Result<f64> {
        let pl = self.gamma_solution(a, b, lam_a, lam_b, &[(c, 1.0)])?;
        let (left, right) = pl.slopes_at(c);
        Ok(0.5 * self.s2() * (left - right))
    }

    /// `P_x[Γ_{η^c_u}]`.
    pub fn gamma_inverse_lt(&self, a: f64, b: f64, lam_a: f64, lam_b: f64, x: f64, c: f64, u: f64) -> Result<f64> {
        let big_lambda = self.excursion_exponent(a, b, lam_a, lam_b, c)?;
        Ok((-u * big_lambda).exp() * self.gamma_at_hit(a, b, lam_a, lam_b, x, c)?)
    }

    /// `P_a[e^{-λ L^a_{T_c}}; T_c < T_b]`.
    pub fn lt_laplace_restricted(&self, a: f64, b: f64, c: f64, lam_a: f64) -> Result<f64> {
        let nodes = vec![
            Node::Kill { x: a, lambda: lam_a },
            Node::Fixed { x: c, value: 1.0 },
            Node::Fixed { x: b, value: 0.0 },
        ];
        Ok(PiecewiseLinear::solve(self.sigma, nodes, 0.0, 0.0)?.value(a))
    }

    /// `P_x[e^{-λa L^a_{T_c}}; T_a < T_c < T_b]`: the restricted transform
    /// from `x` minus the paths that reach `c` before `a`.
    pub fn lemma_d2(&self, x: f64, a: f64, b: f64, c: f64, lam_a: f64) -> Result<f64> {
        let nodes = vec![
            Node::Kill { x: a, lambda: lam_a },
            Node::Fixed { x: c, value: 1.0 },
            Node::Fixed { x: b, value: 0.0 },
        ];
        let all = PiecewiseLinear::solve(self.sigma, nodes, 0.0, 0.0)?.value(x);
        Ok(all - self.hit_prob3(x, c, a, b)?)
    }
}
