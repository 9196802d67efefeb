//! First and second q-Bessel functions of Jackson, in scaled form
//! `x^(-nu) J_nu(x | q^2)`.

use crate::error::{invalid, QError, Result};
use crate::qcore::{bracket, exp_big_in, exp_small_in, pow, sum_series, QContext, SeriesPolicy};
use crate::qpolys::{laguerre_q2, laguerre_q2inv_coeffs_scaled};

/// Order of a Bessel function.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    /// Order valid for evaluation (`nu > -1`).
    pub fn new(nu: f64) -> Result<Self> {
        if nu > -1.0 && nu.is_finite() {
            Ok(Self(nu))
        } else {
            Err(invalid("nu", nu, "Bessel order must exceed -1"))
        }
    }

    /// Order valid as a Hankel transform order (`nu >= -1/2`).
    pub fn transform(nu: f64) -> Result<Self> {
        if nu >= -0.5 && nu.is_finite() {
            Ok(Self(nu))
        } else {
            Err(invalid("nu", nu, "transform order must be at least -1/2"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Precomputed series coefficients of both Bessel functions of one order.
///
/// Any real order is accepted; negative orders go through the reciprocal
/// Gamma function, which is entire.
#[derive(Debug, Clone)]
pub struct BesselKernel {
    nu: f64,
    q: f64,
    p: f64,
    scale1: f64,
    scale2: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    policy: SeriesPolicy,
}

impl BesselKernel {
    pub fn new(ctx: &QContext, nu: f64) -> Self {
        let q = ctx.q();
        let p = ctx.p();
        let n = ctx.policy().max_terms;
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        let mut rg = ctx.rgamma2(nu + 1.0);
        let mut fact = 1.0;
        for i in 0..n {
            let arg = i as f64 + nu + 1.0;
            if arg < 2.0 {
                rg = ctx.rgamma2(arg);
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let a = sign * rg / fact;
            first.push(a);
            second.push(a * pow(q, 2.0 * i as f64 * (i as f64 + nu)));
            rg /= bracket(p, arg);
            fact *= bracket(p, i as f64 + 1.0);
        }
        Self {
            nu,
            q,
            p,
            scale1: (1.0 + q).powf(-nu),
            scale2: pow(q, nu * nu) * (1.0 + q).powf(-nu),
            first,
            second,
            policy: *ctx.policy(),
        }
    }

    pub fn order(&self) -> f64 {
        self.nu
    }

    /// Edge of the region where the first function is summed directly.
    pub fn branch_point(&self) -> f64 {
        0.95 / (1.0 - self.q)
    }

    fn sum(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        let z = (x / (1.0 + self.q)).powi(2);
        let mut zz: f64 = 1.0;
        let policy = SeriesPolicy {
            max_terms: coeffs.len(),
            ..self.policy
        };
        sum_series(&policy, |i| {
            let c = coeffs[i];
            let t = if zz.is_finite() {
                c * zz
            } else if c == 0.0 {
                0.0
            } else {
                c.signum() * (c.abs().ln() + i as f64 * z.ln()).exp()
            };
            zz *= z;
            t
        })
    }

    /// First function by its power series; valid for `|x| < 1/(1-q)`.
    pub fn j1_series(&self, x: f64) -> Result<f64> {
        if x.abs() >= 1.0 / (1.0 - self.q) {
            return Err(invalid("x", x, "outside the disc of the first Bessel series"));
        }
        Ok(self.scale1 * self.sum(&self.first, x)?)
    }

    /// First function through the second one and an `e_{q^2}` factor.
    pub fn j1_continued(&self, x: f64) -> Result<f64> {
        let g = exp_small_in(self.p, -(1.0 - self.q) / (1.0 + self.q) * x * x, &self.policy)?;
        if g == 0.0 {
            return Ok(0.0);
        }
        Ok(pow(self.q, -self.nu * self.nu) * g * self.j2(x)?)
    }

    /// `x^(-nu) J^(1)_nu(x | q^2)` for real `x`.
    pub fn j1(&self, x: f64) -> Result<f64> {
        if x.abs() < self.branch_point() {
            self.j1_series(x)
        } else {
            self.j1_continued(x)
        }
    }

    /// `x^(-nu) J^(2)_nu(x | q^2)`, entire.
    pub fn j2(&self, x: f64) -> Result<f64> {
        Ok(self.scale2 * self.sum(&self.second, x)?)
    }
}

/// `x^(-nu) J^(1)_nu(x | q^2)`.
pub fn bessel_j1_scaled(ctx: &QContext, nu: f64, x: f64) -> Result<f64> {
    BesselKernel::new(ctx, nu).j1(x)
}

/// `x^(-nu) J^(2)_nu(x | q^2)`.
pub fn bessel_j2_scaled(ctx: &QContext, nu: f64, x: f64) -> Result<f64> {
    BesselKernel::new(ctx, nu).j2(x)
}

/// `J^(1)_nu(x | q^2)` for `x > 0`.
pub fn bessel_j1(ctx: &QContext, nu: f64, x: f64) -> Result<f64> {
    Ok(x.powf(nu) * bessel_j1_scaled(ctx, nu, x)?)
}

/// `J^(2)_nu(x | q^2)` for `x > 0`.
pub fn bessel_j2(ctx: &QContext, nu: f64, x: f64) -> Result<f64> {
    Ok(x.powf(nu) * bessel_j2_scaled(ctx, nu, x)?)
}

/// Power series of the scaled first function in the variable `(x/(1+q))^2`,
/// including the `(1+q)^(-nu)` prefactor. Used for coefficient comparisons.
pub fn bessel_j1_taylor(ctx: &QContext, nu: f64, terms: usize) -> Vec<f64> {
    let k = BesselKernel::new(ctx, nu);
    k.first.iter().take(terms).map(|a| a * k.scale1).collect()
}

fn multi_term(lhs: &[f64], rhs: &[f64]) -> f64 {
    let diff = (lhs.iter().sum::<f64>() - rhs.iter().sum::<f64>()).abs();
    let scale = lhs.iter().chain(rhs).fold(0.0f64, |m, x| m.max(x.abs()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Pointwise residuals at `u > 0` of the derivative, three-term and
/// index-lowering relations for both functions, and of the extra relation
/// for the second one. Each is `|LHS - RHS|` over the largest term.
pub fn recurrence_residuals(ctx: &QContext, nu: f64, u: f64) -> Result<[(&'static str, f64); 7]> {
    if !(u > 0.0) {
        return Err(invalid("u", u, "recurrences are checked at positive points"));
    }
    let q = ctx.q();
    let (lo, mid, hi) = (BesselKernel::new(ctx, nu - 1.0), BesselKernel::new(ctx, nu), BesselKernel::new(ctx, nu + 1.0));
    let two_nu = bracket(q, 2.0 * nu);
    let d = |a: f64, b: f64, base: f64| [b / ((base - 1.0) * u), -a / ((base - 1.0) * u)];
    let w = |s: f64| s.powf(2.0 * nu);
    let w1 = |s: f64| s.powf(2.0 * nu - 1.0);

    let first_derivative = multi_term(&d(mid.j1(u)?, mid.j1(q * u)?, q), &[-u * hi.j1(u)?]);
    let second_derivative = multi_term(
        &d(pow(q, nu) * mid.j2(q * u)?, pow(q, nu) * mid.j2(u)?, 1.0 / q),
        &[-pow(q, nu + 2.0) * u * hi.j2(q * u)?],
    );
    let first_three_term = multi_term(&[u * u * hi.j1(u)?, lo.j1(u)?], &[two_nu * mid.j1(q * u)?]);
    let second_three_term = multi_term(
        &[pow(q, nu + 1.0) * u * u * hi.j2(q * u)?, pow(q, nu - 1.0) * lo.j2(q * u)?],
        &[two_nu * pow(q, -nu) * mid.j2(u)?],
    );
    let first_lowering = multi_term(&d(w(u) * mid.j1(u)?, w(q * u) * mid.j1(q * u)?, q), &[w1(u) * lo.j1(u)?]);
    let second_lowering = multi_term(
        &d(w(u) * mid.j2(u)?, w(q * u) * mid.j2(q * u)?, q),
        &[pow(q, 2.0 * nu - 1.0) * w1(u) * lo.j2(q * u)?],
    );
    let second_extra = multi_term(
        &d(w(u) * lo.j2(u)?, w(q * u) * lo.j2(q * u)?, q),
        &[two_nu * w1(u) * lo.j2(u)?, -pow(q, 2.0 * nu + 1.0) * u * w(u) * mid.j2(q * u)?],
    );
    Ok([
        ("first_derivative", first_derivative),
        ("second_derivative", second_derivative),
        ("first_three_term", first_three_term),
        ("second_three_term", second_three_term),
        ("first_lowering", first_lowering),
        ("second_lowering", second_lowering),
        ("second_extra", second_extra),
    ])
}

/// A Bessel value against a truncated Laguerre generating sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratingCheck {
    pub bessel: f64,
    pub partial: f64,
    /// Size of the first term left out.
    pub first_omitted: f64,
    /// Sum of the sizes of the omitted terms, up to 150 past the cut or the
    /// first term that overflows.
    pub omitted_sum: f64,
}

impl GeneratingCheck {
    pub fn error(&self) -> f64 {
        (self.bessel - self.partial).abs()
    }
}

fn generating(terms: usize, bessel: f64, term: impl Fn(u32) -> Result<f64>) -> Result<GeneratingCheck> {
    let mut parts = Vec::with_capacity(terms + 151);
    for j in 0..=terms + 150 {
        let a = term(j as u32)?;
        if !a.is_finite() {
            if j <= terms {
                return Err(QError::Truncation { terms: j, last: a });
            }
            break;
        }
        parts.push(a);
    }
    Ok(GeneratingCheck {
        bessel,
        partial: crate::qcore::sum_compensated(parts[..terms].iter().copied()),
        first_omitted: parts[terms].abs(),
        omitted_sum: parts[terms..].iter().map(|a| a.abs()).sum(),
    })
}

/// `(rt)^(-alpha) J^(1)_alpha(rt)` against the first `terms` terms of its
/// expansion in `L_j^(alpha)(r^2/(1+q) | q^2) t^(2j) e_{q^2}(-q^2 t^2/(1+q))`.
pub fn generating_first(ctx: &QContext, alpha: f64, r: f64, t: f64, terms: usize) -> Result<GeneratingCheck> {
    let q = ctx.q();
    let p = ctx.p();
    let g = exp_small_in(p, -p * t * t / (1.0 + q), ctx.policy())?;
    let lead = (1.0 + q).powf(-alpha);
    generating(terms, BesselKernel::new(ctx, alpha).j1(r * t)?, |j| {
        let jf = j as f64;
        Ok(lead * laguerre_q2(ctx, j, alpha, r * r / (1.0 + q))? * ctx.rgamma2(alpha + jf + 1.0) * t.powi(2 * j as i32)
            / (1.0 + q).powi(j as i32)
            * g)
    })
}

/// `(rt)^(-alpha) J^(2)_alpha(qrt)` against the first `terms` terms of its
/// expansion in `L_j^(alpha)(q^2 t^2/(1+q) | q^-2) r^(2j) E_{q^2}(-r^2/(1+q))`.
pub fn generating_second(ctx: &QContext, alpha: f64, r: f64, t: f64, terms: usize) -> Result<GeneratingCheck> {
    let q = ctx.q();
    let p = ctx.p();
    let g = exp_big_in(p, -r * r / (1.0 + q));
    let lead = (1.0 + q).powf(-alpha);
    let bessel = pow(q, alpha) * BesselKernel::new(ctx, alpha).j2(q * r * t)?;
    generating(terms, bessel, |j| {
        let jf = j as f64;
        let x = p * t * t / (1.0 + q);
        let scaled = laguerre_q2inv_coeffs_scaled(ctx, j, alpha)?.iter().rev().fold(0.0, |acc, c| acc * x + c);
        // q^((j+alpha)(j+1+alpha)) L_j(x | q^-2) = q^(alpha(alpha+1)) * scaled
        Ok(lead * pow(q, alpha * (alpha + 1.0))
            * scaled
            * ctx.rgamma2(alpha + jf + 1.0)
            * r.powi(2 * j as i32)
            / (1.0 + q).powi(j as i32)
            * g)
    })
}
