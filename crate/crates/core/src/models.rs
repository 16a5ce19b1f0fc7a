//! Catalog of admissible Lévy processes.
//!
//! Every catalog member is symmetric and centered, so its characteristic
//! exponent Ψ is real, even and non-negative, and the process is recurrent.
//! Admissibility (integrability of `1/(q + Ψ)`) is checked when a
//! [`ModelSpec`] is built; inadmissible parameters never reach the numerics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw model description, as it appears in configuration files.
///
/// A `ModelKind` is not necessarily admissible; wrap it in a [`ModelSpec`]
/// to use it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Brownian motion with `Ψ(λ) = σ²λ²/2`.
    #[serde(rename = "bm")]
    BrownianMotion { sigma: f64 },
    /// Unit-scale symmetric stable process with `Ψ(λ) = |λ|^α`.
    #[serde(rename = "stable")]
    SymmetricStable { alpha: f64 },
    /// Brownian motion plus compound Poisson jumps with centered Gaussian sizes.
    #[serde(rename = "bm_jumps")]
    BrownianWithGaussianJumps {
        sigma: f64,
        jump_rate: f64,
        jump_std: f64,
    },
}

impl ModelKind {
    pub fn psi(&self, lam: f64) -> f64 {
        match *self {
            ModelKind::BrownianMotion { sigma } => 0.5 * sigma * sigma * lam * lam,
            ModelKind::SymmetricStable { alpha } => lam.abs().powf(alpha),
            ModelKind::BrownianWithGaussianJumps {
                sigma,
                jump_rate,
                jump_std,
            } => {
                let z = 0.5 * jump_std * jump_std * lam * lam;
                0.5 * sigma * sigma * lam * lam - jump_rate * (-z).exp_m1()
            }
        }
    }

    /// Large-λ form of Ψ used for the analytic quadrature tail.
    pub fn asymptotic_psi(&self) -> AsymptoticPsi {
        match *self {
            ModelKind::BrownianMotion { sigma } => AsymptoticPsi {
                coeff: 0.5 * sigma * sigma,
                power: 2.0,
                shift: 0.0,
                min_lambda: 0.0,
            },
            ModelKind::SymmetricStable { alpha } => AsymptoticPsi {
                coeff: 1.0,
                power: alpha,
                shift: 0.0,
                min_lambda: 0.0,
            },
            ModelKind::BrownianWithGaussianJumps {
                sigma,
                jump_rate,
                jump_std,
            } => AsymptoticPsi {
                coeff: 0.5 * sigma * sigma,
                power: 2.0,
                shift: jump_rate,
                // exp(-jump_std²λ²/2) < 3e-18 beyond this point
                min_lambda: if jump_rate > 0.0 { 9.0 / jump_std } else { 0.0 },
            },
        }
    }

    /// Integrability report for `1/(q + Ψ(λ))` on `[0, ∞)`.
    ///
    /// The tail exponent is estimated from the log-log slope of the integrand
    /// between `λ = 1e6` and `λ = 1e8`; the integral converges iff it exceeds 1.
    pub fn check_condition_a(&self, q: f64) -> AdmissibilityReport {
        let (lo, hi) = (1e6_f64, 1e8_f64);
        let g = |l: f64| 1.0 / (q + self.psi(l));
        let tail_exponent = -(g(hi).ln() - g(lo).ln()) / (hi.ln() - lo.ln());
        let passes = q > 0.0 && tail_exponent.is_finite() && tail_exponent > 1.0 + 1e-6;
        let diagnostic = if q <= 0.0 {
            format!("q = {q} is not positive")
        } else if passes {
            format!("integrand decays like λ^-{tail_exponent:.4}; tail integral converges")
        } else {
            format!("integrand decays like λ^-{tail_exponent:.4}; tail integral diverges")
        };
        AdmissibilityReport {
            passes,
            tail_exponent,
            diagnostic,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        match *self {
            ModelKind::BrownianMotion { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return bad(format!("sigma must be positive, got {sigma}"));
                }
            }
            ModelKind::SymmetricStable { alpha } => {
                if !(alpha.is_finite() && alpha > 1.0 && alpha <= 2.0) {
                    return bad(format!("stable index must lie in (1, 2], got {alpha}"));
                }
            }
            ModelKind::BrownianWithGaussianJumps {
                sigma,
                jump_rate,
                jump_std,
            } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return bad(format!("sigma must be positive, got {sigma}"));
                }
                if !(jump_rate.is_finite() && jump_rate >= 0.0) {
                    return bad(format!("jump_rate must be non-negative, got {jump_rate}"));
                }
                if !(jump_std.is_finite() && jump_std > 0.0) {
                    return bad(format!("jump_std must be positive, got {jump_std}"));
                }
            }
        }
        let report = self.check_condition_a(1.0);
        if !report.passes {
            return bad(report.diagnostic);
        }
        Ok(())
    }
}

/// `Ψ(λ) ≈ coeff·λ^power + shift` for `λ ≥ min_lambda`, up to terms below
/// double precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPsi {
    pub coeff: f64,
    pub power: f64,
    pub shift: f64,
    pub min_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub passes: bool,
    pub tail_exponent: f64,
    pub diagnostic: String,
}

/// `m² = E[X₁²]`, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoment(f64);

impl SecondMoment {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// `1/m²`, which is zero when the moment is infinite.
    pub fn inverse(self) -> f64 {
        if self.0.is_finite() {
            1.0 / self.0
        } else {
            0.0
        }
    }
}

/// An admissible (symmetric, centered, condition-(A)) Lévy process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelKind", into = "ModelKind")]
pub struct ModelSpec {
    kind: ModelKind,
}

impl TryFrom<ModelKind> for ModelSpec {
    type Error = Error;

    fn try_from(kind: ModelKind) -> Result<Self> {
        kind.validate()?;
        Ok(ModelSpec { kind })
    }
}

impl From<ModelSpec> for ModelKind {
    fn from(m: ModelSpec) -> Self {
        m.kind
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Result<Self> {
        Self::try_from(kind)
    }

    pub fn brownian(sigma: f64) -> Result<Self> {
        Self::new(ModelKind::BrownianMotion { sigma })
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        Self::new(ModelKind::SymmetricStable { alpha })
    }

    pub fn brownian_with_jumps(sigma: f64, jump_rate: f64, jump_std: f64) -> Result<Self> {
        Self::new(ModelKind::BrownianWithGaussianJumps {
            sigma,
            jump_rate,
            jump_std,
        })
    }

    /// Standard Brownian motion.
    pub fn standard_bm() -> Self {
        ModelSpec {
            kind: ModelKind::BrownianMotion { sigma: 1.0 },
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn psi(&self, lam: f64) -> f64 {
        self.kind.psi(lam)
    }

    pub fn check_condition_a(&self, q: f64) -> AdmissibilityReport {
        self.kind.check_condition_a(q)
    }

    pub fn asymptotic_psi(&self) -> AsymptoticPsi {
        self.kind.asymptotic_psi()
    }

    pub fn second_moment(&self) -> SecondMoment {
        match self.kind {
            ModelKind::BrownianMotion { sigma } => SecondMoment(sigma * sigma),
            ModelKind::SymmetricStable { alpha } if alpha < 2.0 => SecondMoment(f64::INFINITY),
            // alpha = 2 is Brownian motion with variance 2
            ModelKind::SymmetricStable { .. } => SecondMoment(2.0),
            ModelKind::BrownianWithGaussianJumps {
                sigma,
                jump_rate,
                jump_std,
            } => SecondMoment(sigma * sigma + jump_rate * jump_std * jump_std),
        }
    }

    /// Leading exponent β in `h(x) - h_q(x) ~ C q^β` as `q → 0`.
    pub fn h_q_error_exponent(&self) -> f64 {
        match self.kind {
            ModelKind::SymmetricStable { alpha } => (3.0 / alpha - 1.0).min(1.0),
            _ => 0.5,
        }
    }

    /// Exponent β in `1/r_q(0) ~ C q^β` as `q → 0`; this is the leading
    /// error exponent of `h^B_q`.
    pub fn inverse_r0_exponent(&self) -> f64 {
        match self.kind {
            ModelKind::SymmetricStable { alpha } => 1.0 - 1.0 / alpha,
            _ => 0.5,
        }
    }

    /// Self-similarity index α when `h(x) = h(1)|x|^{α-1}` holds exactly.
    pub fn self_similar_index(&self) -> Option<f64> {
        match self.kind {
            ModelKind::SymmetricStable { alpha } => Some(alpha),
            ModelKind::BrownianMotion { .. } => Some(2.0),
            ModelKind::BrownianWithGaussianJumps { .. } => None,
        }
    }

    /// True when sample paths are continuous.
    pub fn is_continuous(&self) -> bool {
        match self.kind {
            ModelKind::BrownianMotion { .. } => true,
            ModelKind::SymmetricStable { alpha } => alpha == 2.0,
            ModelKind::BrownianWithGaussianJumps { jump_rate, .. } => jump_rate == 0.0,
        }
    }

    /// Diffusion coefficient σ² of the Gaussian part.
    pub fn gaussian_variance(&self) -> f64 {
        match self.kind {
            ModelKind::BrownianMotion { sigma }
            | ModelKind::BrownianWithGaussianJumps { sigma, .. } => sigma * sigma,
            ModelKind::SymmetricStable { alpha } if alpha == 2.0 => 2.0,
            ModelKind::SymmetricStable { .. } => 0.0,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::BrownianMotion { sigma } => format!("bm(sigma={sigma})"),
            ModelKind::SymmetricStable { alpha } => format!("stable(alpha={alpha})"),
            ModelKind::BrownianWithGaussianJumps {
                sigma,
                jump_rate,
                jump_std,
            } => format!("bm_jumps(sigma={sigma}, rate={jump_rate}, jump_std={jump_std})"),
        }
    }
}
