//! Quadratic ISS-Lyapunov certificates `V_p(x) = (x − x*_p)ᵀ S_p (x − x*_p)`.
//!
//! `S_p` solves the subsystem's Lyapunov equation for a given `Q`. Two decay
//! rates are kept for each certificate:
//!
//! * `lambda_tight`: the exact disturbance-free rate, a generalized
//!   eigenvalue of the pencil built from `S`;
//! * `lambda_iss`: the rate that appears in the ISS inequality once the
//!   cross term `x̃ᵀ(…)B d` is split with Young's inequality at parameter ε.
//!
//! The disturbance gain is always quadratic, `α_p(s) = g·s²`.
//!
//! Discrete:   `V(Ax̃ + Bd) ≤ (1+ε)·λ_tight·V(x) + (1+1/ε)·λ_max(BᵀSB)·‖d‖²`
//! Continuous: `∇V·f ≤ −(λ_tight − ε)·V(x) + ‖SB‖²/(ε·λ_min(S))·‖d‖²`

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::system_model::{equilibrium_of, LinearAffineSubsystem, SystemFamily, TimeDomain};

/// Young-split parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Epsilon {
    /// Discrete: ε = (1/λ_tight − 1)/2, so λ_iss = (1 + λ_tight)/2.
    /// Continuous: ε = λ_tight/2.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadraticCertificate {
    pub index: usize,
    pub domain: TimeDomain,
    pub s: Matrix,
    pub equilibrium: Vec<f64>,
    pub lambda_tight: f64,
    pub lambda_iss: f64,
    /// Eigenvalue-bound rate: `1 − λ_min(Q)/λ_max(S)` (discrete) or
    /// `λ_min(Q)/λ_max(S)` (continuous).
    pub lambda_conservative: f64,
    pub epsilon: f64,
    pub gain: f64,
    pub lambda_min_s: f64,
    pub lambda_max_s: f64,
}

impl QuadraticCertificate {
    pub fn value(&self, x: &[f64]) -> f64 {
        let e = linalg::sub(x, &self.equilibrium);
        self.s.quadratic_form(&e)
    }

    /// ISS rate obtained from the conservative decay rate with the `Auto`
    /// Young split.
    pub fn lambda_conservative_iss(&self) -> f64 {
        match self.domain {
            TimeDomain::Discrete => 0.5 * (1.0 + self.lambda_conservative),
            TimeDomain::Continuous => 0.5 * self.lambda_conservative,
        }
    }

    /// `(α̲(r), ᾱ(r)) = (λ_min(S)·r², λ_max(S)·r²)`.
    pub fn quadratic_envelope(&self, r: f64) -> (f64, f64) {
        (self.lambda_min_s * r * r, self.lambda_max_s * r * r)
    }
}

/// Builds the certificate of subsystem `index` for weight `q`.
pub fn build_certificate(
    sub: &LinearAffineSubsystem,
    index: usize,
    q: &Matrix,
    epsilon: Epsilon,
) -> Result<QuadraticCertificate> {
    let no_cert = |reason: String| Error::NoCertificate { index, reason };
    let q_min = linalg::sym_eig(q)?.min();
    if !(q_min > 0.0) {
        return Err(Error::Contract(format!(
            "Q must be positive definite, min eigenvalue {q_min}"
        )));
    }
    let s = match sub.domain {
        TimeDomain::Discrete => linalg::solve_discrete_lyapunov(&sub.a, q),
        TimeDomain::Continuous => linalg::solve_continuous_lyapunov(&sub.a, q),
    }
    .map_err(|e| no_cert(e.to_string()))?;
    linalg::cholesky(&s).map_err(|e| no_cert(format!("unstable subsystem: {e}")))?;
    let spectrum = linalg::sym_eig(&s)?;
    let (lambda_min_s, lambda_max_s) = (spectrum.min(), spectrum.max());
    let equilibrium = equilibrium_of(sub, index)?.point;

    let (lambda_tight, lambda_iss, lambda_conservative, eps, gain) = match sub.domain {
        TimeDomain::Discrete => {
            let closed = sub.a.transpose().matmul(&s).matmul(&sub.a).symmetrized();
            let tight = linalg::generalized_max_eig(&closed, &s)?.max(0.0);
            if tight >= 1.0 {
                return Err(no_cert(format!("decay rate {tight} is not below 1")));
            }
            let input_gain = if sub.input_dim() == 0 {
                0.0
            } else {
                let bsb = sub.b.transpose().matmul(&s).matmul(&sub.b).symmetrized();
                linalg::sym_eig(&bsb)?.max().max(0.0)
            };
            let (eps, iss, factor) = match epsilon {
                Epsilon::Auto if tight == 0.0 => (f64::INFINITY, 0.5, 1.0),
                Epsilon::Auto => {
                    let eps = 0.5 * (1.0 / tight - 1.0);
                    (eps, 0.5 * (1.0 + tight), 1.0 + 1.0 / eps)
                }
                Epsilon::Fixed(eps) => {
                    let iss = (1.0 + eps) * tight;
                    if !(eps > 0.0) || !(iss > 0.0 && iss < 1.0) {
                        return Err(Error::BadEpsilon {
                            epsilon: eps,
                            rate: iss,
                        });
                    }
                    (eps, iss, 1.0 + 1.0 / eps)
                }
            };
            let conservative = 1.0 - q_min / lambda_max_s;
            (tight, iss, conservative, eps, factor * input_gain)
        }
        TimeDomain::Continuous => {
            let tight = linalg::generalized_min_eig(q, &s)?;
            if !(tight > 0.0) {
                return Err(no_cert(format!("decay rate {tight} is not positive")));
            }
            let eps = match epsilon {
                Epsilon::Auto => 0.5 * tight,
                Epsilon::Fixed(eps) => eps,
            };
            let iss = tight - eps;
            if !(eps > 0.0) || !(iss > 0.0) {
                return Err(Error::BadEpsilon {
                    epsilon: eps,
                    rate: iss,
                });
            }
            let sb = linalg::spectral_norm(&s.matmul(&sub.b));
            let gain = sb * sb / (eps * lambda_min_s);
            (tight, iss, q_min / lambda_max_s, eps, gain)
        }
    };

    Ok(QuadraticCertificate {
        index,
        domain: sub.domain,
        s,
        equilibrium,
        lambda_tight,
        lambda_iss,
        lambda_conservative,
        epsilon: eps,
        gain,
        lambda_min_s,
        lambda_max_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IssCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
}

/// Checks the certificate's dissipation inequality at one `(x, d)`.
pub fn verify_iss_pointwise(
    cert: &QuadraticCertificate,
    sub: &LinearAffineSubsystem,
    x: &[f64],
    d: &[f64],
) -> IssCheck {
    let v = cert.value(x);
    let d2 = linalg::dot(d, d);
    let next = sub.eval(x, d);
    let (lhs, rhs) = match cert.domain {
        TimeDomain::Discrete => (cert.value(&next), cert.lambda_iss * v + cert.gain * d2),
        TimeDomain::Continuous => {
            let e = linalg::sub(x, &cert.equilibrium);
            let grad = cert.s.mul_vec(&e);
            (2.0 * linalg::dot(&grad, &next), -cert.lambda_iss * v + cert.gain * d2)
        }
    };
    let slack = rhs - lhs;
    IssCheck {
        holds: slack >= -1e-9 * (1.0 + rhs.abs()),
        lhs,
        rhs,
        slack,
    }
}

/// Which per-certificate rate enters an aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateConvention {
    Tight,
    Conservative,
    TightIss,
    ConservativeIss,
}

impl RateConvention {
    pub const ALL: [RateConvention; 4] = [
        RateConvention::Tight,
        RateConvention::Conservative,
        RateConvention::TightIss,
        RateConvention::ConservativeIss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RateConvention::Tight => "tight",
            RateConvention::Conservative => "conservative",
            RateConvention::TightIss => "tight_iss",
            RateConvention::ConservativeIss => "conservative_iss",
        }
    }
}

/// One certificate per subsystem of a family.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateSet {
    pub domain: TimeDomain,
    pub certs: Vec<QuadraticCertificate>,
}

impl CertificateSet {
    pub fn build(family: &SystemFamily, q: &Matrix, epsilon: Epsilon) -> Result<Self> {
        let certs = family
            .subsystems
            .iter()
            .enumerate()
            .map(|(p, sub)| build_certificate(sub, p, q, epsilon))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domain: family.domain,
            certs,
        })
    }

    /// `Q = I`, `Auto` ε.
    pub fn build_default(family: &SystemFamily) -> Result<Self> {
        Self::build(family, &Matrix::identity(family.n), Epsilon::Auto)
    }

    pub fn from_certs(domain: TimeDomain, certs: Vec<QuadraticCertificate>) -> Result<Self> {
        if certs.is_empty() {
            return Err(Error::Contract("empty certificate set".into()));
        }
        if certs.iter().any(|c| c.domain != domain) {
            return Err(Error::Contract("mixed time domains in certificate set".into()));
        }
        Ok(Self { domain, certs })
    }

    pub fn len(&self) -> usize {
        self.certs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.certs.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&QuadraticCertificate> {
        self.certs.get(index).ok_or(Error::MissingCertificate { index })
    }

    /// `λ := max_p λ_p` (discrete) or `min_p λ_p` (continuous) of the ISS rates.
    pub fn aggregate_rate(&self) -> f64 {
        self.aggregate(RateConvention::TightIss)
    }

    pub fn aggregate(&self, convention: RateConvention) -> f64 {
        let rates = self.certs.iter().map(|c| match convention {
            RateConvention::Tight => c.lambda_tight,
            RateConvention::Conservative => c.lambda_conservative,
            RateConvention::TightIss => c.lambda_iss,
            RateConvention::ConservativeIss => c.lambda_conservative_iss(),
        });
        match self.domain {
            TimeDomain::Discrete => rates.fold(f64::NEG_INFINITY, f64::max),
            TimeDomain::Continuous => rates.fold(f64::INFINITY, f64::min),
        }
    }

    /// `ĝ := max_p g_p`, so `α̂(s) = ĝ·s²`.
    pub fn aggregate_gain(&self) -> f64 {
        self.certs.iter().map(|c| c.gain).fold(0.0, f64::max)
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.certs.iter().map(|c| c.value(x)).collect()
    }

    /// `min_p V_p(x)`; `x ∈ M(ω)` iff this is at most `ω`.
    pub fn min_value(&self, x: &[f64]) -> f64 {
        self.certs.iter().map(|c| c.value(x)).fold(f64::INFINITY, f64::min)
    }
}
