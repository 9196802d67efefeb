//! Integration on the quantum sphere and on the whole space, Funk-Hecke
//! coefficients and the reproducing-kernel identity.

use crate::error::{invalid, QError, Result};
use crate::fischer::{FischerElement, Gauss, RadialSeries, L_EXPAND};
use crate::qbessel::bessel_j1_taylor;
use crate::qcore::{
    binomial, bracket, factorial, jackson_finite, jackson_infinite_auto, jackson_infinite_fixed, pow, JacksonSpec,
    QContext,
};
use crate::qhankel::guarded;
use crate::qpolys::gegenbauer_coeffs;

/// Sphere integral of an element, through both the `k = 0` mass and the
/// Pizzetti series in powers of the Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereIntegralResult {
    pub value: f64,
    /// Sum of the `k = 0` radial coefficients.
    pub k0_mass: f64,
    pub pizzetti: f64,
    pub nonzero_blocks_dropped: usize,
}

/// `int_S 1 = 2 Gamma_{q^2}(1/2)^m / Gamma_{q^2}(m/2)`.
pub fn sphere_norm(ctx: &QContext) -> f64 {
    2.0 * half_gamma_power(ctx) * ctx.rgamma2(ctx.half_m())
}

fn half_gamma_power(ctx: &QContext) -> f64 {
    ctx.gamma2(0.5).expect("Gamma(1/2) is finite").powi(ctx.m() as i32)
}

fn k0_polynomial(e: &FischerElement) -> Option<RadialSeries> {
    e.block(0).map(|b| {
        let exp = b.radial.expand(e.ctx(), L_EXPAND);
        let sign = if b.phase.turns() == 2 { -1.0 } else { 1.0 };
        RadialSeries::polynomial(exp.coeffs.iter().map(|c| sign * c).collect()).expect("finite coefficients")
    })
}

/// Sphere integral. Blocks with `k >= 1` integrate to zero. A `k = 0`
/// block must have a real phase.
pub fn sphere_integrate(e: &FischerElement) -> Result<SphereIntegralResult> {
    let ctx = e.ctx();
    if let Some(b) = e.block(0) {
        if b.phase.turns() % 2 == 1 {
            return Err(QError::Domain("k = 0 block with imaginary phase".into()));
        }
    }
    let dropped = e.blocks().filter(|(k, _)| *k > 0).count();
    let Some(r) = k0_polynomial(e) else {
        return Ok(SphereIntegralResult {
            value: 0.0,
            k0_mass: 0.0,
            pizzetti: 0.0,
            nonzero_blocks_dropped: dropped,
        });
    };
    let k0_mass: f64 = r.coeffs().iter().sum();
    let nu = ctx.half_m() - 1.0;
    let b = bessel_j1_taylor(ctx, nu, r.coeffs().len());
    let mu2 = ctx.mu() * ctx.mu();
    let mut current = FischerElement::new(ctx).with_block(0, r);
    let mut series = 0.0;
    for (i, bi) in b.iter().enumerate() {
        let at_zero = current.block(0).map_or(0.0, |b| b.radial.coeffs()[0]);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        series += sign * bi * at_zero / mu2.powi(i as i32);
        current = current.op_laplace();
    }
    Ok(SphereIntegralResult {
        value: sphere_norm(ctx) * k0_mass,
        k0_mass,
        pizzetti: 2.0 * half_gamma_power(ctx) * (1.0 + ctx.q()).powf(nu) * series,
        nonzero_blocks_dropped: dropped,
    })
}

/// How the radial part of a whole-space integral is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrationMode {
    /// Infinite Jackson integral on the grid `{gamma q^k}`, for `e`-type Gaussians.
    Infinite(f64),
    /// Finite Jackson integral on `[0, lambda]`, for `E`-type Gaussians.
    Ball(f64),
}

/// Natural ball radius `sqrt(mu/((1-q^2) beta))` for `E_{q^2}(-beta x^2/mu)`.
pub fn ball_radius(ctx: &QContext, beta: f64) -> f64 {
    (ctx.mu() / ((1.0 - ctx.p()) * beta)).sqrt()
}

fn check_tags(e: &FischerElement, mode: IntegrationMode) -> Result<()> {
    for (k, b) in e.blocks() {
        match (b.radial.gauss(), mode) {
            (Gauss::Small(_), IntegrationMode::Infinite(_)) | (Gauss::Big(_), IntegrationMode::Ball(_)) => {}
            (g, _) => return Err(QError::Domain(format!("block {k} with {g:?} cannot be integrated in {mode:?}"))),
        }
    }
    Ok(())
}

fn radial_integrand(e: &FischerElement) -> Result<Option<impl Fn(i64, f64) -> Result<f64> + '_>> {
    let Some(b) = e.block(0) else {
        return Ok(None);
    };
    if b.phase.turns() % 2 == 1 {
        return Err(QError::Domain("k = 0 block with imaginary phase".into()));
    }
    let sign = if b.phase.turns() == 2 { -1.0 } else { 1.0 };
    let m = e.ctx().m() as i32;
    Ok(Some(move |_: i64, r: f64| Ok(sign * r.powi(m - 1) * b.radial.eval(e.ctx(), r * r)?)))
}

/// `int_S 1` times the radial Jackson integral of `r^(m-1) f_0(r^2)`.
pub fn space_integrate(e: &FischerElement, mode: IntegrationMode) -> Result<f64> {
    check_tags(e, mode)?;
    let ctx = e.ctx();
    let Some(f) = radial_integrand(e)? else {
        return Ok(0.0);
    };
    let q = ctx.q();
    let policy = *ctx.policy();
    let radial = match mode {
        IntegrationMode::Infinite(gamma) => {
            guarded(|g| jackson_infinite_auto(q, gamma, g, &policy), f)?.value
        }
        IntegrationMode::Ball(lambda) => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(invalid("lambda", lambda, "ball radius must be positive"));
            }
            guarded(|g| jackson_finite(q, lambda, |t| g(0, t), &policy), f)?
        }
    };
    Ok(sphere_norm(ctx) * radial)
}

/// [`space_integrate`] in infinite mode on the explicit grid `k_lo..=k_hi`.
pub fn space_integrate_on_grid(e: &FischerElement, gamma: f64, k_lo: i64, k_hi: i64) -> Result<f64> {
    check_tags(e, IntegrationMode::Infinite(gamma))?;
    let ctx = e.ctx();
    let Some(f) = radial_integrand(e)? else {
        return Ok(0.0);
    };
    let spec = JacksonSpec::new(gamma, k_lo, k_hi)?;
    let policy = *ctx.policy();
    Ok(sphere_norm(ctx) * guarded(|g| jackson_infinite_fixed(ctx.q(), &spec, g, &policy), f)?.value)
}

/// Boundary term `lambda^m f_k(lambda^2/q^2)` of the ball integral at the
/// natural radius, largest over the blocks, relative to the largest block
/// value on the ball grid.
pub fn stokes_boundary(e: &FischerElement) -> Result<f64> {
    let ctx = e.ctx();
    let p = ctx.p();
    let m = ctx.m() as i32;
    let mut boundary: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (k, b) in e.blocks() {
        let Gauss::Big(beta) = b.radial.gauss() else {
            return Err(QError::Domain(format!("block {k}: boundary term needs an E-type Gaussian")));
        };
        let lambda = ball_radius(ctx, beta);
        boundary = boundary.max((lambda.powi(m) * b.radial.eval(ctx, lambda * lambda / p)?).abs());
        for n in 0..40 {
            let r = lambda * ctx.q().powi(n);
            scale = scale.max((r.powi(m) * b.radial.eval(ctx, r * r)?).abs());
        }
    }
    Ok(if boundary == 0.0 { 0.0 } else { boundary / scale })
}

/// Funk-Hecke coefficient `alpha_{k,l}`; zero unless `k + l` is even and `l >= k`.
pub fn funk_hecke_alpha(ctx: &QContext, k: u32, l: u32) -> f64 {
    if l < k || (k + l) % 2 == 1 {
        return 0.0;
    }
    let p = ctx.p();
    2.0 * half_gamma_power(ctx) * factorial(ctx.q(), l) * ctx.rgamma2((k + l) as f64 / 2.0 + ctx.half_m())
        / (ctx.mu().powi(l as i32) * factorial(p, (l - k) / 2))
}

/// `alpha_{k,l}` read off the Taylor series of the first q-Bessel function
/// of order `m/2+k-1`.
pub fn funk_hecke_from_bessel(ctx: &QContext, k: u32, l: u32) -> f64 {
    if l < k || (k + l) % 2 == 1 {
        return 0.0;
    }
    let i = ((l - k) / 2) as usize;
    let nu = ctx.half_m() + k as f64 - 1.0;
    let mu = ctx.mu();
    let b = bessel_j1_taylor(ctx, nu, i + 1)[i];
    let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
    factorial(ctx.q(), l) * sign * 2.0 * mu.powf(ctx.half_m() - 1.0) * half_gamma_power(ctx)
        * ((1.0 + ctx.q()) / mu).powf(nu)
        * b
        / mu.powi(2 * i as i32)
}

/// `sum_j (-1)^j q^(j(j-1)) [l choose j]_{q^2} Gamma(alpha+l-j)/Gamma(alpha+1-j)`,
/// with the Gamma ratio taken as a product of brackets.
pub fn techgamma_sum(ctx: &QContext, l: u32, alpha: f64) -> Result<f64> {
    let p = ctx.p();
    if l == 0 {
        let b = bracket(p, alpha);
        if b == 0.0 {
            return Err(QError::Pole { t: alpha });
        }
        return Ok(1.0 / b);
    }
    let terms = (0..=l).map(|j| {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let ratio: f64 = (1..l).map(|i| bracket(p, alpha + (i as f64) - j as f64)).product();
        sign * pow(ctx.q(), (j * j.saturating_sub(1)) as f64) * binomial(p, l, j) * ratio
    });
    Ok(crate::qcore::sum_compensated(terms))
}

/// Largest term of [`techgamma_sum`], the scale of its cancellation.
pub fn techgamma_scale(ctx: &QContext, l: u32, alpha: f64) -> f64 {
    let p = ctx.p();
    (0..=l)
        .map(|j| {
            let ratio: f64 = (1..l).map(|i| bracket(p, alpha + (i as f64) - j as f64)).product();
            (pow(ctx.q(), (j * j.saturating_sub(1)) as f64) * binomial(p, l, j) * ratio).abs()
        })
        .fold(0.0, f64::max)
}

/// `C_n = [m/2+n-1]_{q^2} Gamma_{q^2}(m/2-1) / (2 Gamma_{q^2}(1/2)^m)`.
pub fn reproducing_constant(ctx: &QContext, n: u32) -> Result<f64> {
    if ctx.m() <= 2 {
        return Err(QError::Domain(format!("reproducing kernel needs m >= 3, got m = {}", ctx.m())));
    }
    Ok(bracket(ctx.p(), ctx.half_m() + n as f64 - 1.0) * ctx.gamma2(ctx.half_m() - 1.0)?
        / (2.0 * half_gamma_power(ctx)))
}

/// `sum_j c_j alpha_{k,n-2j} - delta_{kn}/C_n`, relative to the largest term.
pub fn reproducing_check(ctx: &QContext, n: u32, k: u32) -> Result<f64> {
    let cn = reproducing_constant(ctx, n)?;
    let c = gegenbauer_coeffs(ctx, n, ctx.half_m() - 1.0);
    let terms: Vec<f64> = c
        .iter()
        .enumerate()
        .filter(|(j, _)| 2 * *j as u32 <= n)
        .map(|(j, cj)| cj * funk_hecke_alpha(ctx, k, n - 2 * j as u32))
        .collect();
    let delta = if k == n { 1.0 / cn } else { 0.0 };
    let scale = terms.iter().fold(delta.abs(), |m, t| m.max(t.abs()));
    let residual = crate::qcore::sum_compensated(terms.iter().copied()) - delta;
    Ok(if residual == 0.0 { 0.0 } else { residual.abs() / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fischer::random_elements;
    use proptest::prelude::*;

    fn ctx() -> QContext {
        QContext::new(0.5, 3).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    fn poly(c: &QContext, k: u32, coeffs: Vec<f64>) -> FischerElement {
        FischerElement::new(c).with_block(k, RadialSeries::polynomial(coeffs).unwrap())
    }

    #[test]
    fn constant_integrates_to_norm() {
        let c = ctx();
        let r = sphere_integrate(&poly(&c, 0, vec![1.0])).unwrap();
        let want = 2.0 * c.gamma2(0.5).unwrap().powi(3) / c.gamma2(1.5).unwrap();
        assert!(rel(r.value, want) < 1e-15);
        assert!(rel(r.pizzetti, want) < 1e-14);
    }

    #[test]
    fn norm_square_powers_integrate_like_one() {
        for m in [2, 3, 5] {
            let c = QContext::new(0.5, m).unwrap();
            let one = sphere_norm(&c);
            for l in 0..=6 {
                let mut coeffs = vec![0.0; l + 1];
                coeffs[l] = 1.0;
                let r = sphere_integrate(&poly(&c, 0, coeffs)).unwrap();
                assert!(rel(r.value, one) < 1e-12);
                assert!(rel(r.pizzetti, one) < 1e-12, "m={m} l={l} {} {}", r.pizzetti, one);
            }
        }
    }

    #[test]
    fn harmonic_blocks_vanish() {
        let c = ctx();
        let r = sphere_integrate(&poly(&c, 3, vec![1.0, 2.0])).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.nonzero_blocks_dropped, 1);
    }

    #[test]
    fn pizzetti_matches_mass_on_random_elements() {
        let c = ctx();
        for e in random_elements(&c, 7, 20) {
            let r = sphere_integrate(&e).unwrap();
            let scale = sphere_norm(&c) * e.block(0).map_or(0.0, |b| b.radial.coeffs().iter().map(|x| x.abs()).sum());
            assert!((r.value - r.pizzetti).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn gaussian_against_refined_grid() {
        let c = ctx();
        let e = FischerElement::new(&c).with_block(0, RadialSeries::new(vec![1.0], Gauss::Small(c.mu() / c.p())).unwrap());
        let v = space_integrate(&e, IntegrationMode::Infinite(1.0)).unwrap();
        let fine = space_integrate_on_grid(&e, 1.0, -160, 160).unwrap();
        assert!(rel(v, fine) < 1e-10);
        assert!(v > 0.0);
    }

    #[test]
    fn pure_harmonics_integrate_to_zero() {
        let c = ctx();
        let e = FischerElement::new(&c).with_block(2, RadialSeries::new(vec![1.0, 0.5], Gauss::Small(1.0)).unwrap());
        assert_eq!(space_integrate(&e, IntegrationMode::Infinite(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn tag_must_match_mode() {
        let c = ctx();
        let e = FischerElement::new(&c).with_block(0, RadialSeries::new(vec![1.0], Gauss::Big(1.0)).unwrap());
        assert!(matches!(space_integrate(&e, IntegrationMode::Infinite(1.0)), Err(QError::Domain(_))));
        assert!(space_integrate(&e, IntegrationMode::Ball(ball_radius(&c, 1.0))).unwrap() > 0.0);
        assert!(space_integrate(&poly(&c, 0, vec![1.0]), IntegrationMode::Infinite(1.0)).is_err());
    }

    #[test]
    fn grid_anchor_changes_values_by_a_common_factor() {
        let c = ctx();
        let ratio = |l: usize| {
            let mut coeffs = vec![0.0; l + 1];
            coeffs[l] = 1.0;
            let e = FischerElement::new(&c).with_block(0, RadialSeries::new(coeffs, Gauss::Small(1.0)).unwrap());
            space_integrate(&e, IntegrationMode::Infinite(0.7)).unwrap() / space_integrate(&e, IntegrationMode::Infinite(1.3)).unwrap()
        };
        let r0 = ratio(0);
        assert!((r0 - 1.0).abs() > 1e-8, "{r0}");
        for l in 1..=4 {
            assert!(rel(ratio(l), r0) < 1e-10, "l={l}");
        }
    }

    #[test]
    fn boundary_term_vanishes_at_natural_radius() {
        let c = ctx();
        let e = FischerElement::new(&c)
            .with_block(0, RadialSeries::new(vec![1.0, -0.5, 2.0], Gauss::Big(1.0)).unwrap())
            .with_block(1, RadialSeries::new(vec![0.3, 1.0], Gauss::Big(2.5)).unwrap());
        assert_eq!(stokes_boundary(&e).unwrap(), 0.0);
    }

    #[test]
    fn funk_hecke_cases() {
        let c = ctx();
        assert_eq!(funk_hecke_alpha(&c, 2, 1), 0.0);
        assert_eq!(funk_hecke_alpha(&c, 1, 4), 0.0);
        assert!(rel(funk_hecke_alpha(&c, 0, 0), sphere_norm(&c)) < 1e-15);
        for k in 0..=3 {
            for l in k..=k + 6 {
                let a = funk_hecke_alpha(&c, k, l);
                let b = funk_hecke_from_bessel(&c, k, l);
                if a == 0.0 {
                    assert_eq!(b, 0.0);
                } else {
                    assert!(rel(a, b) < 1e-12, "k={k} l={l}");
                }
            }
        }
    }

    #[test]
    fn techgamma_examples() {
        let c = ctx();
        assert!(techgamma_sum(&c, 1, 2.3).unwrap().abs() < 1e-12);
        assert!(techgamma_sum(&c, 3, 4.1).unwrap().abs() < 1e-10);
        assert!(rel(techgamma_sum(&c, 0, 2.3).unwrap(), c.gamma2(2.3).unwrap() / c.gamma2(3.3).unwrap()) < 1e-14);
        // Gamma poles at alpha + 1 - j <= 0 are harmless in product form
        assert!(techgamma_sum(&c, 4, -1.0).unwrap().abs() < 1e-10);
        assert!(techgamma_sum(&c, 0, 0.0).is_err());
    }

    #[test]
    fn reproducing_examples() {
        let c = ctx();
        assert!(reproducing_check(&c, 0, 0).unwrap() < 1e-10);
        assert!(reproducing_check(&c, 3, 1).unwrap() < 1e-10);
        assert_eq!(reproducing_check(&c, 1, 2).unwrap(), 0.0);
        let flat = QContext::new(0.5, 2).unwrap();
        assert!(matches!(reproducing_check(&flat, 1, 1), Err(QError::Domain(_))));
    }

    #[test]
    fn reproducing_grid() {
        for m in 3..=5 {
            let c = QContext::new(0.5, m).unwrap();
            for n in 0..=8 {
                for k in 0..=8 {
                    let r = reproducing_check(&c, n, k).unwrap();
                    assert!(r < 1e-10, "m={m} n={n} k={k} r={r:e}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn techgamma_vanishes(l in 1u32..=6, alpha in -3.0f64..6.0, q in 0.2f64..0.8) {
            let c = QContext::new(q, 3).unwrap();
            let v = techgamma_sum(&c, l, alpha).unwrap();
            prop_assert!(v.abs() <= 1e-12 * techgamma_scale(&c, l, alpha).max(1.0));
        }
    }
}
