//! Linear-affine subsystem families and bounded disturbances.
//!
//! A family member is `x⁺ = A x + B d + C` (discrete) or `ẋ = A x + B d + C`
//! (continuous). Subsystem indices are zero-based inside the crate; the file
//! formats in [`crate::io`] use one-based indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, LinalgError, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomain {
    Discrete,
    Continuous,
}

impl TimeDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeDomain::Discrete => "discrete",
            TimeDomain::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearAffineSubsystem {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Vec<f64>,
    pub domain: TimeDomain,
}

impl LinearAffineSubsystem {
    pub fn new(a: Matrix, b: Matrix, c: Vec<f64>, domain: TimeDomain) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::Contract(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.rows() != n {
            return Err(Error::Contract(format!("B must have {n} rows, got {}", b.rows())));
        }
        if c.len() != n {
            return Err(Error::Contract(format!("C must have length {n}, got {}", c.len())));
        }
        Ok(Self { a, b, c, domain })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    /// `A x + B d + C`: the successor state (discrete) or the vector field
    /// (continuous).
    pub fn eval(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        let ax = self.a.mul_vec(x);
        let bd = self.b.mul_vec(d);
        ax.iter().zip(&bd).zip(&self.c).map(|((a, b), c)| a + b + c).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub index: usize,
    pub point: Vec<f64>,
}

/// `x* = (I − A)⁻¹ C` (discrete) or `x* = −A⁻¹ C` (continuous).
pub fn equilibrium_of(sub: &LinearAffineSubsystem, index: usize) -> Result<Equilibrium> {
    let n = sub.state_dim();
    let (op, rhs) = match sub.domain {
        TimeDomain::Discrete => (Matrix::identity(n).add_scaled(-1.0, &sub.a), sub.c.clone()),
        TimeDomain::Continuous => (sub.a.clone(), sub.c.iter().map(|v| -v).collect()),
    };
    let point = linalg::solve_linear(&op, &rhs).map_err(|e| match e {
        LinalgError::Singular { .. } => Error::NoUniqueEquilibrium { index },
        other => other.into(),
    })?;
    Ok(Equilibrium { index, point })
}

/// Residual of the equilibrium condition.
pub fn equilibrium_residual(sub: &LinearAffineSubsystem, x: &[f64]) -> f64 {
    let zero_d = vec![0.0; sub.input_dim()];
    let f = sub.eval(x, &zero_d);
    match sub.domain {
        TimeDomain::Discrete => linalg::distance(&f, x),
        TimeDomain::Continuous => linalg::norm(&f),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StabilityVerdict {
    /// Carries the Lyapunov solution for `Q = I`.
    Stable {
        lyapunov: Matrix,
    },
    Unstable {
        reason: String,
    },
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityVerdict::Stable { .. })
    }
}

/// Decides Schur/Hurwitz stability from the `Q = I` Lyapunov solution.
pub fn stability_check(sub: &LinearAffineSubsystem) -> StabilityVerdict {
    let n = sub.state_dim();
    let q = Matrix::identity(n);
    let solved = match sub.domain {
        TimeDomain::Discrete => linalg::solve_discrete_lyapunov(&sub.a, &q),
        TimeDomain::Continuous => linalg::solve_continuous_lyapunov(&sub.a, &q),
    };
    match solved {
        Err(e) => StabilityVerdict::Unstable {
            reason: format!("Lyapunov solve failed: {e}"),
        },
        Ok(s) => match linalg::cholesky(&s) {
            Ok(_) => StabilityVerdict::Stable { lyapunov: s },
            Err(e) => StabilityVerdict::Unstable {
                reason: format!("Lyapunov solution is not positive definite: {e}"),
            },
        },
    }
}

/// An ordered family `{f_p}` sharing one time domain and dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFamily {
    pub domain: TimeDomain,
    pub n: usize,
    pub m: usize,
    pub subsystems: Vec<LinearAffineSubsystem>,
}

impl SystemFamily {
    pub fn new(domain: TimeDomain, subsystems: Vec<LinearAffineSubsystem>) -> Result<Self> {
        let first = subsystems
            .first()
            .ok_or_else(|| Error::Contract("a family needs at least one subsystem".into()))?;
        let (n, m) = (first.state_dim(), first.input_dim());
        for (p, sub) in subsystems.iter().enumerate() {
            if sub.domain != domain {
                return Err(Error::Contract(format!(
                    "subsystem {} has domain {}, family is {}",
                    p + 1,
                    sub.domain.as_str(),
                    domain.as_str()
                )));
            }
            if sub.state_dim() != n || sub.input_dim() != m {
                return Err(Error::Contract(format!(
                    "subsystem {} has dimensions (n={}, m={}), expected (n={n}, m={m})",
                    p + 1,
                    sub.state_dim(),
                    sub.input_dim()
                )));
            }
        }
        Ok(Self {
            domain,
            n,
            m,
            subsystems,
        })
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn equilibria(&self) -> Result<Vec<Equilibrium>> {
        self.subsystems
            .iter()
            .enumerate()
            .map(|(p, s)| equilibrium_of(s, p))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceKind {
    Zero,
    Constant { value: Vec<f64> },
    UniformSeeded { bound: f64, seed: u64 },
    Samples { values: Vec<Vec<f64>> },
}

/// A bounded disturbance signal of dimension `m`.
///
/// Sampling is stateless: `UniformSeeded` keys a ChaCha stream on
/// `(seed, time index)`, so any index can be replayed in isolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub m: usize,
    pub kind: DisturbanceKind,
}

impl DisturbanceSpec {
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            kind: DisturbanceKind::Zero,
        }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self {
            m: value.len(),
            kind: DisturbanceKind::Constant { value },
        }
    }

    pub fn uniform(m: usize, bound: f64, seed: u64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::Contract(format!(
                "uniform bound must be finite and nonnegative, got {bound}"
            )));
        }
        Ok(Self {
            m,
            kind: DisturbanceKind::UniformSeeded { bound, seed },
        })
    }

    pub fn samples(m: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((k, bad)) = values.iter().enumerate().find(|(_, v)| v.len() != m) {
            return Err(Error::Contract(format!(
                "disturbance sample {k} has length {}, expected {m}",
                bad.len()
            )));
        }
        Ok(Self {
            m,
            kind: DisturbanceKind::Samples { values },
        })
    }

    /// Euclidean sup-norm `sup_k ‖d_k‖`. For the seeded uniform cube this is
    /// `bound·√m`.
    pub fn sup_norm(&self) -> f64 {
        match &self.kind {
            DisturbanceKind::Zero => 0.0,
            DisturbanceKind::Constant { value } => linalg::norm(value),
            DisturbanceKind::UniformSeeded { bound, .. } => bound * (self.m as f64).sqrt(),
            DisturbanceKind::Samples { values } => values.iter().map(|v| linalg::norm(v)).fold(0.0, f64::max),
        }
    }

    /// The disturbance value at time index `k`.
    pub fn sample(&self, k: u64) -> Result<Vec<f64>> {
        match &self.kind {
            DisturbanceKind::Zero => Ok(vec![0.0; self.m]),
            DisturbanceKind::Constant { value } => Ok(value.clone()),
            DisturbanceKind::UniformSeeded { bound, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k);
                Ok((0..self.m)
                    .map(|_| {
                        if *bound == 0.0 {
                            0.0
                        } else {
                            rng.random_range(-*bound..=*bound)
                        }
                    })
                    .collect())
            }
            DisturbanceKind::Samples { values } => values.get(k as usize).cloned().ok_or(Error::OutOfRange {
                index: k,
                len: values.len(),
            }),
        }
    }

    /// Continuous-time sample: the value held on `[i·period, (i+1)·period)`.
    pub fn sample_at_time(&self, t: f64, period: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::Contract(format!("time must be nonnegative, got {t}")));
        }
        self.sample(time_index(t, period))
    }
}

/// Index of the hold interval containing `t`; instants within 1e-9 of a grid
/// point count as that grid point.
pub fn time_index(t: f64, period: f64) -> u64 {
    let r = t / period;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 {
        nearest as u64
    } else {
        r.floor() as u64
    }
}
