#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchbound::linalg::{self, Matrix};
use switchbound::{LinearAffineSubsystem, SystemFamily, TimeDomain};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Schur (`‖A‖₂ ≤ radius < 1`) or Hurwitz (`M − (‖M‖₂ + margin)I`).
pub fn random_stable<R: Rng>(domain: TimeDomain, n: usize, rng: &mut R) -> Matrix {
    let m = random_matrix(n, n, rng);
    let norm = linalg::spectral_norm(&m);
    match domain {
        TimeDomain::Discrete => {
            let radius = rng.random_range(0.2..0.9);
            m.scale(radius / norm)
        }
        TimeDomain::Continuous => {
            let margin = rng.random_range(0.2..1.5);
            m.add_scaled(-(norm + margin), &Matrix::identity(n))
        }
    }
}

pub fn random_vector<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Family with random stable `A_p`, random `B_p`, and either random offsets
/// or offsets placing every equilibrium at `common`.
pub fn random_family<R: Rng>(
    domain: TimeDomain,
    n: usize,
    m: usize,
    count: usize,
    common: Option<&[f64]>,
    rng: &mut R,
) -> SystemFamily {
    let subs = (0..count)
        .map(|_| {
            let a = random_stable(domain, n, rng);
            let b = random_matrix(n, m, rng);
            let c = match common {
                None => random_vector(n, 2.0, rng),
                Some(x) => {
                    let ax = a.mul_vec(x);
                    match domain {
                        TimeDomain::Discrete => x.iter().zip(&ax).map(|(xi, axi)| xi - axi).collect(),
                        TimeDomain::Continuous => ax.iter().map(|v| -v).collect(),
                    }
                }
            };
            LinearAffineSubsystem::new(a, b, c, domain).unwrap()
        })
        .collect();
    SystemFamily::new(domain, subs).unwrap()
}
