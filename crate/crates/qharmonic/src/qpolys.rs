//! q-Hermite, the two q-Laguerre families and q-Gegenbauer polynomials.

use crate::error::{invalid, Result};
use crate::qcore::{
    bracket, factorial, jackson_finite_indexed, jackson_infinite_auto, pow,
    sum_compensated, QContext,
};
use crate::lattice::LatticeBlock;
use crate::qhankel::d_const;

/// Degree and parameter of a polynomial family member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyParams {
    pub degree: u32,
    pub param: f64,
}

impl PolyParams {
    /// Laguerre parameters; the order must exceed -1.
    pub fn laguerre(degree: u32, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            degree,
            param: alpha,
        })
    }

    pub fn gegenbauer(degree: u32, lambda: f64) -> Self {
        Self {
            degree,
            param: lambda,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > -1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", alpha, "Laguerre order must exceed -1"))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// q-Hermite polynomial `H_k(t)`.
pub fn hermite(ctx: &QContext, k: u32, t: f64) -> f64 {
    let q = ctx.q();
    let x = (1.0 + q) * t;
    let fk = factorial(q, k);
    sum_compensated((0..=k / 2).map(|j| {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * fk / (factorial(q, k - 2 * j) * ctx.factorial2(j))
            * pow(q, (j * (j + 1)) as f64)
            * x.powi((k - 2 * j) as i32)
    }))
}

/// `prod_{s=lo+1}^{hi} [s + alpha]_b`.
fn shifted_product(b: f64, lo: u32, hi: u32, alpha: f64) -> f64 {
    (lo + 1..=hi).map(|s| bracket(b, s as f64 + alpha)).product()
}

/// Coefficients in `u` of the base `r^2` Laguerre polynomial written with
/// parameter `r` (the `q^2` family at `r = q`).
pub(crate) fn laguerre_coeffs_with(r: f64, j: u32, alpha: f64) -> Vec<f64> {
    let b = r * r;
    (0..=j)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let d = j - i;
            sign * pow(r, (d * (d + 1)) as f64) / (factorial(b, d) * factorial(b, i))
                * shifted_product(b, i, j, alpha)
        })
        .collect()
}

/// Coefficients in `u` of `L_j^(alpha)(u | q^2)`.
pub fn laguerre_q2_coeffs(ctx: &QContext, j: u32, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    Ok(laguerre_coeffs_with(ctx.q(), j, alpha))
}

/// Coefficients in `u` of `L_j^(alpha)(u | q^-2)`.
pub fn laguerre_q2inv_coeffs(ctx: &QContext, j: u32, alpha: f64) -> Result<Vec<f64>> {
    let front = pow(ctx.q(), -(j as f64) * (j as f64 + 1.0 + 2.0 * alpha));
    Ok(laguerre_q2inv_coeffs_scaled(ctx, j, alpha)?.iter().map(|c| front * c).collect())
}

/// Coefficients of `q^(j(j+1+2 alpha)) L_j^(alpha)(u | q^-2)`, which stay
/// bounded where the unscaled ones overflow.
pub fn laguerre_q2inv_coeffs_scaled(ctx: &QContext, j: u32, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let q = ctx.q();
    let p = ctx.p();
    Ok((0..=j)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * pow(q, 2.0 * i as f64 * (i as f64 + alpha)) / (factorial(p, j - i) * factorial(p, i))
                * shifted_product(p, i, j, alpha)
        })
        .collect())
}

/// `L_j^(alpha)(u | q^2)`.
pub fn laguerre_q2(ctx: &QContext, j: u32, alpha: f64, u: f64) -> Result<f64> {
    Ok(horner(&laguerre_q2_coeffs(ctx, j, alpha)?, u))
}

/// `L_j^(alpha)(u | q^-2)`.
pub fn laguerre_q2inv(ctx: &QContext, j: u32, alpha: f64, u: f64) -> Result<f64> {
    Ok(horner(&laguerre_q2inv_coeffs(ctx, j, alpha)?, u))
}

/// q-Gegenbauer polynomial `C_n^lambda(q; t)`.
pub fn gegenbauer(ctx: &QContext, n: u32, lambda: f64, t: f64) -> f64 {
    let q = ctx.q();
    let p = ctx.p();
    let x = (1.0 + q) * t;
    sum_compensated((0..=n / 2).map(|j| {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let rising: f64 = (0..n - j).map(|s| bracket(p, lambda + s as f64)).product();
        sign * pow(q, (j * j.saturating_sub(1)) as f64) / (factorial(p, j) * factorial(q, n - 2 * j))
            * rising
            * x.powi((n - 2 * j) as i32)
    }))
}

/// Coefficients `c_j` of `t^(n-2j)` in `C_n^lambda(q; mu t/(1+q))`.
pub fn gegenbauer_coeffs(ctx: &QContext, n: u32, lambda: f64) -> Vec<f64> {
    let q = ctx.q();
    let p = ctx.p();
    let mu = ctx.mu();
    (0..=n / 2)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let rising: f64 = (0..n - j).map(|s| bracket(p, lambda + s as f64)).product();
            sign * pow(q, (j * j.saturating_sub(1)) as f64) * rising * mu.powi((n - 2 * j) as i32)
                / (factorial(p, j) * factorial(q, n - 2 * j))
        })
        .collect()
}

/// Jackson inner product of two `q^2` Laguerre polynomials on `[0, 1/sqrt(1-q)]`
/// against `r^(2 alpha + 1) E_{q^2}(-r^2/(1+q))`.
///
/// The grid nodes are `u_n = q^(2n)/(1-q^2)` in the Laguerre variable, where
/// both factors come from [`LatticeBlock`].
pub fn orthogonality_finite(ctx: &QContext, j: u32, k: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let q = ctx.q();
    let lj = LatticeBlock::new(q, j, alpha);
    let lk = LatticeBlock::new(q, k, alpha);
    let a = 1.0 / (1.0 - q).sqrt();
    jackson_finite_indexed(
        q,
        a,
        |n, r| r.powf(2.0 * alpha + 1.0) * lj.laguerre(n) * lk.value(n),
        ctx.policy(),
    )
}

/// Closed-form diagonal of [`orthogonality_finite`].
pub fn orthogonality_finite_norm(ctx: &QContext, j: u32, alpha: f64) -> f64 {
    let q = ctx.q();
    let jf = j as f64;
    pow(q, 2.0 * (jf + 1.0) * (jf + alpha + 1.0)) * (1.0 + q).powf(alpha)
        / (ctx.rgamma2(jf + alpha + 1.0) * ctx.factorial2(j))
}

/// Infinite Jackson inner product of two `q^-2` Laguerre polynomials against
/// `t^(2 alpha + 1) e_{q^2}(-q^2 t^2/(1+q))` on the grid anchored at `gamma`.
pub fn orthogonality_infinite(
    ctx: &QContext,
    j: u32,
    k: u32,
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    let q = ctx.q();
    let p = ctx.p();
    let lj = laguerre_q2inv_coeffs(ctx, j, alpha)?;
    let lk = laguerre_q2inv_coeffs(ctx, k, alpha)?;
    let policy = *ctx.policy();
    let f = |_: i64, t: f64| {
        let u = p * t * t / (1.0 + q);
        let g = crate::qcore::exp_small_in(p, -u, &policy).unwrap_or(f64::NAN);
        if g == 0.0 {
            return 0.0;
        }
        t.powf(2.0 * alpha + 1.0) * horner(&lj, u) * horner(&lk, u) * g
    };
    Ok(jackson_infinite_auto(q, gamma, f, &policy)?.value)
}

/// Closed-form diagonal of [`orthogonality_infinite`].
pub fn orthogonality_infinite_norm(ctx: &QContext, j: u32, alpha: f64, gamma: f64) -> Result<f64> {
    let q = ctx.q();
    let jf = j as f64;
    let d = d_const(ctx, gamma / (1.0 + q).sqrt(), alpha)?;
    Ok(pow(q, -(jf + alpha) * (jf + alpha + 1.0)) * (1.0 + q).powf(alpha)
        / (ctx.rgamma2(jf + alpha + 1.0)
            * ctx.factorial2(j)
            * pow(q, (jf + 1.0) * (jf + 2.0 * alpha + 2.0)))
        * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> QContext {
        QContext::new(0.5, 3).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn hermite_low_degrees() {
        let c = ctx();
        assert_eq!(hermite(&c, 0, 0.7), 1.0);
        assert!(rel(hermite(&c, 1, 0.7), 1.5 * 0.7) < 1e-15);
        assert!(rel(hermite(&c, 2, 1.0), 1.875) < 1e-15);
    }

    #[test]
    fn laguerre_low_degrees() {
        let c = ctx();
        assert_eq!(laguerre_q2(&c, 0, 0.3, 1.7).unwrap(), 1.0);
        assert_eq!(laguerre_q2inv(&c, 0, 0.3, 1.7).unwrap(), 1.0);
        let alpha = 0.3;
        let u = 0.8;
        let expected = 0.25 * c.bracket2(alpha + 1.0) - u;
        assert!(rel(laguerre_q2(&c, 1, alpha, u).unwrap(), expected) < 1e-14);
        assert!(laguerre_q2(&c, 1, -1.0, u).is_err());
        assert!(PolyParams::laguerre(2, -1.5).is_err());
    }

    #[test]
    fn laguerre_inverse_base_is_substitution() {
        let c = ctx();
        for j in 0..6 {
            for &alpha in &[-0.5, 0.0, 0.7, 2.5] {
                for &u in &[0.0, 0.3, 1.1, 4.0] {
                    let direct = laguerre_q2inv(&c, j, alpha, u).unwrap();
                    let swapped = horner(&laguerre_coeffs_with(1.0 / c.q(), j, alpha), u);
                    let scale = laguerre_q2inv_coeffs(&c, j, alpha)
                        .unwrap()
                        .iter()
                        .enumerate()
                        .map(|(i, a)| (a * u.powi(i as i32)).abs())
                        .fold(0.0, f64::max);
                    assert!((direct - swapped).abs() <= 1e-12 * scale.max(1e-300));
                }
            }
        }
    }

    #[test]
    fn gegenbauer_low_degrees() {
        let c = ctx();
        assert_eq!(gegenbauer(&c, 0, 0.8, 0.3), 1.0);
        let expected = c.bracket2(0.8) * 1.5 * 0.3;
        assert!(rel(gegenbauer(&c, 1, 0.8, 0.3), expected) < 1e-15);
        assert_eq!(gegenbauer_coeffs(&c, 0, 0.8), vec![1.0]);
        assert!(rel(gegenbauer_coeffs(&c, 1, 0.8)[0], c.bracket2(0.8) * c.mu()) < 1e-15);
    }

    #[test]
    fn gegenbauer_coefficients_resum() {
        let c = ctx();
        let lambda = 0.5;
        let cs = gegenbauer_coeffs(&c, 4, lambda);
        for &t in &[-1.2f64, -0.3, 0.0, 0.4, 0.9] {
            let resum: f64 = cs.iter().enumerate().map(|(j, a)| a * t.powi(4 - 2 * j as i32)).sum();
            let direct = gegenbauer(&c, 4, lambda, c.mu() * t / (1.0 + c.q()));
            assert!((resum - direct).abs() < 1e-13 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn finite_orthogonality_small_case() {
        let c = ctx();
        let v = orthogonality_finite(&c, 2, 2, 0.5).unwrap();
        assert!(rel(v, orthogonality_finite_norm(&c, 2, 0.5)) < 1e-12);
        let off = orthogonality_finite(&c, 1, 3, 0.5).unwrap();
        assert!(off.abs() < 1e-12 * orthogonality_finite_norm(&c, 1, 0.5));
    }

    #[test]
    fn finite_orthogonality_at_high_degree() {
        let c = ctx();
        let norm5 = orthogonality_finite_norm(&c, 5, 1.5);
        assert!(rel(orthogonality_finite(&c, 5, 5, 1.5).unwrap(), norm5) < 1e-12);
        let scale = (norm5 * orthogonality_finite_norm(&c, 4, 1.5)).sqrt();
        assert!(orthogonality_finite(&c, 4, 5, 1.5).unwrap().abs() < 1e-12 * scale);
    }

    #[test]
    fn infinite_orthogonality_small_case() {
        let c = ctx();
        let v = orthogonality_infinite(&c, 2, 2, 0.0, 1.0).unwrap();
        let norm = orthogonality_infinite_norm(&c, 2, 0.0, 1.0).unwrap();
        assert!(rel(v, norm) < 1e-11);
        let off = orthogonality_infinite(&c, 0, 2, 0.0, 1.0).unwrap();
        assert!(off.abs() < 1e-11 * norm);
    }

    proptest! {
        #[test]
        fn gegenbauer_parity(n in 0u32..7, lambda in -0.9f64..3.0, t in -2.0f64..2.0) {
            let c = ctx();
            let a = gegenbauer(&c, n, lambda, -t);
            let b = gegenbauer(&c, n, lambda, t);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a - sign * b).abs() <= 1e-13 * b.abs().max(1.0));
        }
    }
}
