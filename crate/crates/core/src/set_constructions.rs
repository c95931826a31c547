//! Sublevel sets `M_p(κ)`, the enlargement level `ω(κ)` and the switching
//! ratio `μ(κ)`.
//!
//! Two routes are provided. [`closed_form_bounds`] evaluates closed-form
//! upper bounds that hold for quadratic certificates. [`oracle_estimates`]
//! samples the defining optimisation problems directly and therefore
//! under-estimates; the pair brackets the true constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::certificates::{CertificateSet, QuadraticCertificate};
use crate::error::{Error, Result};
use crate::linalg::{self, LinalgError, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetMethod {
    ClosedForm,
    SamplingOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetConstants {
    pub kappa: f64,
    pub omega: f64,
    pub mu: f64,
    pub method: SetMethod,
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::BadConfig(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// Closed-form bounds for quadratic certificates:
///
/// ```text
/// ω(κ) ≤ max_{p,q} λ_max(S_p)·(√(κ/λ_min(S_q)) + ‖x*_p − x*_q‖)²
/// μ(κ) ≤ max_{p,q} λ_max(S_q)/λ_min(S_p)·(1 + √(λ_max(S_p)/κ)·‖x*_p − x*_q‖)²
/// ```
pub fn closed_form_bounds(certs: &CertificateSet, kappa: f64) -> Result<SetConstants> {
    check_kappa(kappa)?;
    let mut omega = f64::NEG_INFINITY;
    let mut mu = f64::NEG_INFINITY;
    for p in &certs.certs {
        for q in &certs.certs {
            let gap = linalg::distance(&p.equilibrium, &q.equilibrium);
            let w = p.lambda_max_s * ((kappa / q.lambda_min_s).sqrt() + gap).powi(2);
            let m = q.lambda_max_s / p.lambda_min_s * (1.0 + (p.lambda_max_s / kappa).sqrt() * gap).powi(2);
            omega = omega.max(w);
            mu = mu.max(m);
        }
    }
    Ok(SetConstants {
        kappa,
        omega,
        mu,
        method: SetMethod::ClosedForm,
    })
}

pub const DEFAULT_SHELLS: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Samples per sampled set (per `q` for ω, per `p` for μ).
    pub samples: usize,
    /// Radial scale factors applied to `∂M_p(κ)` for the μ search.
    pub shells: Vec<f64>,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            shells: DEFAULT_SHELLS.to_vec(),
            seed: 0,
        }
    }
}

/// Maps the unit ball onto `M_p(κ)`: `x = x*_p + √κ·S_p^{-1/2} u`.
#[derive(Debug, Clone)]
pub struct EllipsoidSampler {
    center: Vec<f64>,
    inv_sqrt: Matrix,
}

impl EllipsoidSampler {
    pub fn new(cert: &QuadraticCertificate) -> Result<Self> {
        let eig = linalg::sym_eig(&cert.s)?;
        let n = cert.s.rows();
        if !(eig.min() > 0.0) {
            return Err(LinalgError::NotPositiveDefinite {
                row: n.saturating_sub(1),
                pivot: eig.min(),
            }
            .into());
        }
        let mut inv_sqrt = Matrix::zeros(n, n);
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            let w = 1.0 / lam.sqrt();
            for i in 0..n {
                for j in 0..n {
                    inv_sqrt[(i, j)] += w * eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)];
                }
            }
        }
        Ok(Self {
            center: cert.equilibrium.clone(),
            inv_sqrt,
        })
    }

    /// Point with `V_p(x) = level·|u|²` for `u` in eigen-coordinates.
    pub fn map(&self, level: f64, u: &[f64]) -> Vec<f64> {
        let y = self.inv_sqrt.mul_vec(u);
        let r = level.sqrt();
        self.center.iter().zip(&y).map(|(c, yi)| c + r * yi).collect()
    }

    /// A point on `{V_p = level}`.
    pub fn boundary<R: Rng>(&self, level: f64, rng: &mut R) -> Vec<f64> {
        let u = unit_direction(self.center.len(), rng);
        self.map(level, &u)
    }

    /// A point uniformly distributed in `{V_p ≤ level}`.
    pub fn interior<R: Rng>(&self, level: f64, rng: &mut R) -> Vec<f64> {
        let n = self.center.len();
        let u = unit_direction(n, rng);
        let radius = rng.random::<f64>().powf(1.0 / n as f64);
        let scaled: Vec<f64> = u.iter().map(|v| v * radius).collect();
        self.map(level, &scaled)
    }
}

pub fn unit_direction<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = linalg::norm(&g);
        if r > 1e-12 {
            return g.iter().map(|v| v / r).collect();
        }
    }
}

fn unit_rng(seed: u64, unit: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit);
    rng
}

/// Sampled estimates of `ω(κ)` and `μ(κ)`; never above the true values.
pub fn oracle_estimates(certs: &CertificateSet, kappa: f64, config: &OracleConfig) -> Result<SetConstants> {
    check_kappa(kappa)?;
    if config.samples < 1_000 {
        return Err(Error::BadConfig(format!(
            "oracle needs at least 1000 samples, got {}",
            config.samples
        )));
    }
    if config.shells.is_empty() || config.shells.iter().any(|s| !(*s >= 1.0)) {
        return Err(Error::BadConfig(
            "shell scale factors must be nonempty and at least 1".into(),
        ));
    }
    let samplers = certs
        .certs
        .iter()
        .map(EllipsoidSampler::new)
        .collect::<Result<Vec<_>>>()?;
    let np = certs.len();

    // ω: maximise V_p over M_q(κ); half the draws on the boundary.
    let omega = (0..np)
        .into_par_iter()
        .map(|q| {
            let mut rng = unit_rng(config.seed, q as u64);
            let mut best = f64::NEG_INFINITY;
            for i in 0..config.samples {
                let x = if i % 2 == 0 {
                    samplers[q].boundary(kappa, &mut rng)
                } else {
                    samplers[q].interior(kappa, &mut rng)
                };
                best = certs.certs.iter().map(|c| c.value(&x)).fold(best, f64::max);
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    // μ: maximise V_q/V_p on scaled boundaries of M_p(κ).
    let per_shell = (config.samples / config.shells.len()).max(1);
    let units: Vec<(usize, usize)> = (0..np)
        .flat_map(|p| (0..config.shells.len()).map(move |s| (p, s)))
        .collect();
    let mu = units
        .par_iter()
        .enumerate()
        .map(|(unit, &(p, s))| {
            let mut rng = unit_rng(config.seed, (np + unit) as u64);
            let level = kappa * config.shells[s] * config.shells[s];
            let mut best = f64::NEG_INFINITY;
            for _ in 0..per_shell {
                let x = samplers[p].boundary(level, &mut rng);
                let vp = certs.certs[p].value(&x);
                for c in &certs.certs {
                    best = best.max(c.value(&x) / vp);
                }
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    Ok(SetConstants {
        kappa,
        omega,
        mu,
        method: SetMethod::SamplingOracle,
    })
}

/// `V_p(x) ≤ κ`.
pub fn sublevel_membership(cert: &QuadraticCertificate, kappa: f64, x: &[f64]) -> bool {
    cert.value(x) <= kappa
}

/// `x ∈ ∩_p M_p(ω)`.
pub fn trap_set_membership(certs: &CertificateSet, omega: f64, x: &[f64]) -> bool {
    certs.certs.iter().all(|c| c.value(x) <= omega)
}

/// `x ∈ M(ω) = ∪_p M_p(ω)`.
pub fn union_membership(certs: &CertificateSet, omega: f64, x: &[f64]) -> bool {
    certs.min_value(x) <= omega
}
