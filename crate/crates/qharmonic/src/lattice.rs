//! Laguerre blocks `L_j^(alpha)(u | q^2) E_{q^2}(-u)` on the lattice
//! `u_k = q^(2k)/(1-q^2)`, evaluated in double-double arithmetic.
//!
//! The block vanishes at `k = 0` and is small at the first few nodes, where
//! an `f64` Horner sum loses most of its digits. Finite transforms and the
//! finite orthogonality sums read their integrands from here.

use twofloat::TwoFloat;

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

/// Sums and products only: the crate's double-double division is not
/// correctly rounded, so the single division happens in `f64` at the end.
#[derive(Debug, Clone)]
pub struct LatticeBlock {
    p: TwoFloat,
    /// `q^(d(d+1)) (q^(2(i+alpha+1)); q^2)_d [j choose i]_{q^2}`, signed.
    numer: Vec<TwoFloat>,
    /// `(q^2; q^2)_j`.
    denom: f64,
}

impl LatticeBlock {
    pub fn new(q: f64, j: u32, alpha: f64) -> Self {
        let qd = dd(q);
        let p = qd * qd;
        let one = dd(1.0);
        // p^alpha, exact when 2 alpha is an integer
        let two_alpha = 2.0 * alpha;
        let p_alpha = if two_alpha.fract() == 0.0 && two_alpha.abs() < 1e6 {
            if two_alpha >= 0.0 {
                qd.powi(two_alpha as i32)
            } else {
                dd(q.powf(two_alpha))
            }
        } else {
            dd(q.powf(two_alpha))
        };
        let binom = q_binomials(p, j);
        let numer = (0..=j)
            .map(|i| {
                let d = j - i;
                let shifted = (i + 1..=j).fold(one, |acc, t| acc * (one - p.powi(t as i32) * p_alpha));
                let c = qd.powi((d * (d + 1)) as i32) * shifted * binom[i as usize];
                if i % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect();
        let denom = f64::from((1..=j).fold(one, |acc, s| acc * (one - p.powi(s as i32))));
        Self { p, numer, denom }
    }

    fn numerator(&self, k: i64) -> TwoFloat {
        let x = self.p.powi(k as i32);
        self.numer.iter().rev().fold(dd(0.0), |acc, c| acc * x + *c)
    }

    /// `L_j^(alpha)(u_k | q^2)`.
    pub fn laguerre(&self, k: i64) -> f64 {
        f64::from(self.numerator(k)) / self.denom
    }

    /// `(q^(2k); q^2)_inf = E_{q^2}(-u_k)`.
    fn gaussian(&self, k: i64) -> TwoFloat {
        let mut f = self.p.powi(k as i32);
        let mut r = dd(1.0);
        while f.hi() > 1e-34 {
            r *= dd(1.0) - f;
            f *= self.p;
        }
        r
    }

    /// The block at node `k >= 0`.
    pub fn value(&self, k: i64) -> f64 {
        if k <= 0 {
            return 0.0;
        }
        f64::from(self.numerator(k) * self.gaussian(k)) / self.denom
    }
}

/// Row `j` of the Gaussian binomial coefficients in base `p`.
fn q_binomials(p: TwoFloat, j: u32) -> Vec<TwoFloat> {
    let mut row = vec![dd(1.0)];
    for n in 1..=j as usize {
        let mut next = vec![dd(1.0); n + 1];
        for i in 1..n {
            next[i] = row[i - 1] + p.powi(i as i32) * row[i];
        }
        row = next;
    }
    row
}
