//! Property checks over every module, collected into a deterministic report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fischer::{random_elements, sl2_residuals, FischerElement, Gauss, RadialSeries, Sign};
use crate::oscillator::{
    arcsinh_exponent, double_fourier_residual, eigen_residual, eigen_residual_expanded, eigenvalue, fourier_eigencheck,
    intertwining_residuals,
};
use crate::qbessel::{generating_first, generating_second, recurrence_residuals, BesselKernel};
use crate::qcore::{
    exp_big, exp_big2, exp_small, q_derivative, q_gamma2, q_integrate_finite, q_integrate_infinite_auto, QContext,
    SeriesPolicy,
};
use crate::qhankel::{
    braided_residuals, closed_form_residuals, d_const, inversion_residuals, operational_residuals,
    pair_identity_residuals,
};
use crate::qpolys::{orthogonality_finite, orthogonality_finite_norm, orthogonality_infinite, orthogonality_infinite_norm};
use crate::sphere::{
    funk_hecke_alpha, funk_hecke_from_bessel, reproducing_check, space_integrate, space_integrate_on_grid,
    sphere_integrate, sphere_norm, stokes_boundary, techgamma_scale, techgamma_sum, IntegrationMode,
};

/// Parameters shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub q: f64,
    pub m: u32,
    pub rel_tol: f64,
    pub max_terms: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            q: 0.5,
            m: 3,
            rel_tol: 1e-10,
            max_terms: 500,
            gamma: 1.0,
            seed: 42,
        }
    }
}

impl RunConfig {
    /// Context with the configured truncation tolerance.
    pub fn context(&self) -> Result<QContext> {
        self.context_with_tol(self.rel_tol)
    }

    /// Context used by the suite: series are truncated at `min(rel_tol, 1e-14)`
    /// so that the tightest checks are not limited by truncation.
    pub fn suite_context(&self) -> Result<QContext> {
        self.context_with_tol(self.rel_tol.min(1e-14))
    }

    fn context_with_tol(&self, tol: f64) -> Result<QContext> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", self.gamma, "grid anchor must be positive"));
        }
        QContext::with_policy(self.q, self.m, SeriesPolicy::new(tol, self.max_terms, 3)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Qcore,
    Qpolys,
    Qbessel,
    Qhankel,
    Fischer,
    Sphere,
    Oscillator,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: Option<f64>,
    pub tol: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub suite: Suite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: ReportConfig,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

enum Outcome {
    Residual(f64),
    Skip(String),
}

type Body = Box<dyn Fn(&RunConfig, &QContext) -> Result<Outcome> + Send + Sync>;

struct CheckSpec {
    name: &'static str,
    tol: f64,
    body: Body,
}

fn check(
    name: &'static str,
    tol: f64,
    body: impl Fn(&RunConfig, &QContext) -> Result<f64> + Send + Sync + 'static,
) -> CheckSpec {
    CheckSpec {
        name,
        tol,
        body: Box::new(move |cfg, ctx| body(cfg, ctx).map(Outcome::Residual)),
    }
}

/// Largest value, with NaN winning so that a broken case cannot hide.
fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |acc, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x) })
}

fn try_worst(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    let v: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(worst(v))
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if a == b {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
}

fn random_poly(rng: &mut ChaCha8Rng, max_degree: usize) -> Vec<f64> {
    let degree = rng.gen_range(0..=max_degree);
    (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn nan_on_err(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

/// Runs the selected suite. Checks run in parallel; the report is sorted by
/// check name.
pub fn run(config: &RunConfig, suite: Suite) -> Result<Report> {
    let ctx = config.suite_context()?;
    let specs: Vec<CheckSpec> = [
        (Suite::Qcore, qcore_checks as fn() -> Vec<CheckSpec>),
        (Suite::Qpolys, qpolys_checks),
        (Suite::Qbessel, qbessel_checks),
        (Suite::Qhankel, qhankel_checks),
        (Suite::Fischer, fischer_checks),
        (Suite::Sphere, sphere_checks),
        (Suite::Oscillator, oscillator_checks),
    ]
    .into_iter()
    .filter(|(s, _)| suite.includes(*s))
    .flat_map(|(_, f)| f())
    .collect();

    let mut checks = crate::par::map(&specs, |spec| {
        let (residual, status, reason) = match (spec.body)(config, &ctx) {
            Ok(Outcome::Residual(r)) => (Some(r), if r <= spec.tol { Status::Pass } else { Status::Fail }, None),
            Ok(Outcome::Skip(why)) => (None, Status::Skip, Some(why)),
            Err(e) => (None, Status::Fail, Some(e.to_string())),
        };
        Check {
            name: spec.name.to_string(),
            residual: residual.filter(|r| r.is_finite()),
            tol: spec.tol,
            status,
            reason: reason.or_else(|| residual.filter(|r| !r.is_finite()).map(|r| format!("non-finite residual {r}"))),
        }
    });
    checks.sort_by(|a, b| a.name.cmp(&b.name));

    let mut summary = Summary::default();
    for c in &checks {
        match c.status {
            Status::Pass => summary.passed += 1,
            Status::Fail => summary.failed += 1,
            Status::Skip => summary.skipped += 1,
        }
    }
    Ok(Report {
        config: ReportConfig { run: *config, suite },
        checks,
        summary,
    })
}

fn qcore_checks() -> Vec<CheckSpec> {
    vec![
        check("qcore.exp_inverse", 1e-12, |_, c| {
            let edge = 0.95 / (1.0 - c.q());
            try_worst((0..20).map(|i| {
                let t = -edge + 2.0 * edge * i as f64 / 19.0;
                Ok((exp_small(c, t)? * exp_big(c, -t) - 1.0).abs())
            }))
        }),
        check("qcore.exp_derivatives", 1e-12, |_, c| {
            let ts = (1..=9).flat_map(|i| [0.1 * i as f64, -0.1 * i as f64]);
            try_worst(ts.map(|t| {
                let small = q_derivative(c, |s| nan_on_err(exp_small(c, s)), t)?;
                let big = q_derivative(c, |s| exp_big(c, s), t)?;
                Ok(rel(small, exp_small(c, t)?).max(rel(big, exp_big(c, c.q() * t))))
            }))
        }),
        check("qcore.exp_big_zeros", 1e-12, |_, c| {
            Ok(worst((0..=3).map(|k| exp_big(c, -c.q().powi(-k) / (1.0 - c.q())).abs())))
        }),
        check("qcore.gamma_recurrence", 1e-12, |_, c| {
            try_worst((0..24).map(|i| {
                let t = 0.13 + 0.25 * i as f64;
                Ok(rel(q_gamma2(c, t + 1.0)?, c.bracket2(t) * q_gamma2(c, t)?))
            }))
        }),
        check("qcore.leibniz", 1e-12, |cfg, c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            try_worst((0..32).map(|_| {
                let a = random_poly(&mut rng, 5);
                let b = random_poly(&mut rng, 5);
                let t = rng.gen_range(0.05..1.5);
                let f = |x: f64| poly(&a, x);
                let g = |x: f64| poly(&b, x);
                let lhs = q_derivative(c, |x| f(x) * g(x), t)?;
                let rhs = q_derivative(c, f, t)? * g(t) + f(c.q() * t) * q_derivative(c, g, t)?;
                Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0))
            }))
        }),
        check("qcore.fundamental_theorem", 1e-12, |cfg, c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
            try_worst((0..32).map(|_| {
                let a = random_poly(&mut rng, 8);
                let x = rng.gen_range(0.1..2.0);
                let g = |t: f64| poly(&a, t);
                let integral = q_integrate_finite(c, |t| nan_on_err(q_derivative(c, g, t)), x)?;
                let scale = a.iter().map(|v| v.abs()).sum::<f64>() * x.max(1.0).powi(a.len() as i32);
                Ok((integral - (g(x) - g(0.0))).abs() / scale.max(1.0))
            }))
        }),
        check("qcore.finite_reduction", 1e-12, |cfg, c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
            let q = c.q();
            let top = 1.0 / (1.0 - q).sqrt();
            try_worst((0..16).map(|_| {
                let a = random_poly(&mut rng, 8);
                let f = |t: f64| poly(&a, t) * exp_big2(c, -t * t / (1.0 + q));
                let inf = q_integrate_infinite_auto(c, f, top)?.value;
                let fin = q_integrate_finite(c, f, top)?;
                let abs = q_integrate_finite(c, |t| f(t).abs(), top)?;
                Ok(if inf == fin { 0.0 } else { (inf - fin).abs() / abs })
            }))
        }),
    ]
}

const LAGUERRE_ALPHAS: [f64; 3] = [-0.5, 0.0, 1.5];

fn qpolys_checks() -> Vec<CheckSpec> {
    vec![
        check("qpolys.orthogonality_finite.diagonal", 1e-10, |_, c| {
            try_worst(LAGUERRE_ALPHAS.iter().flat_map(|&a| {
                (0..=5).map(move |j| Ok(rel(orthogonality_finite(c, j, j, a)?, orthogonality_finite_norm(c, j, a))))
            }))
        }),
        check("qpolys.orthogonality_finite.off_diagonal", 1e-10, |_, c| {
            try_worst(LAGUERRE_ALPHAS.iter().flat_map(|&a| {
                (0..=5u32).flat_map(move |j| {
                    (0..j).map(move |k| {
                        let scale = (orthogonality_finite_norm(c, j, a) * orthogonality_finite_norm(c, k, a)).sqrt();
                        Ok(orthogonality_finite(c, j, k, a)?.abs() / scale)
                    })
                })
            }))
        }),
        check("qpolys.orthogonality_infinite.diagonal", 1e-10, |cfg, c| {
            let g = cfg.gamma;
            try_worst(LAGUERRE_ALPHAS.iter().flat_map(|&a| {
                (0..=5).map(move |j| Ok(rel(orthogonality_infinite(c, j, j, a, g)?, orthogonality_infinite_norm(c, j, a, g)?)))
            }))
        }),
        check("qpolys.orthogonality_infinite.off_diagonal", 1e-10, |cfg, c| {
            let g = cfg.gamma;
            try_worst(LAGUERRE_ALPHAS.iter().flat_map(|&a| {
                (0..=5u32).flat_map(move |j| {
                    (0..j).map(move |k| {
                        let scale =
                            (orthogonality_infinite_norm(c, j, a, g)? * orthogonality_infinite_norm(c, k, a, g)?).abs().sqrt();
                        Ok(orthogonality_infinite(c, j, k, a, g)?.abs() / scale)
                    })
                })
            }))
        }),
        check("qpolys.d_invariance", 1e-10, |_, c| {
            try_worst([0.5, 1.0, 2.0].iter().flat_map(|&lambda| {
                [-0.5, 0.0, 0.3, 1.5].iter().map(move |&a| Ok(rel(d_const(c, lambda, a + 1.0)?, d_const(c, lambda, a)?)))
            }))
        }),
    ]
}

const BESSEL_ORDERS: [f64; 4] = [-0.5, 0.0, 0.5, 1.5];

fn recurrence_check(name: &'static str, index: usize) -> CheckSpec {
    check(name, 1e-10, move |_, c| {
        try_worst(BESSEL_ORDERS.iter().flat_map(|&nu| {
            (0..12).map(move |i| Ok(recurrence_residuals(c, nu, 0.1 * 1.35f64.powi(i))?[index].1))
        }))
    })
}

/// Generating sums: converged partial sums against the Bessel side, and short
/// truncations whose error must not exceed the sum of the omitted terms.
fn generating_check(
    name: &'static str,
    f: fn(&QContext, f64, f64, f64, usize) -> Result<crate::qbessel::GeneratingCheck>,
    converged: usize,
) -> CheckSpec {
    check(name, 1e-12, move |_, c| {
        let mut out = Vec::new();
        for &alpha in &[-0.5, 0.0, 1.5] {
            for &(r, t) in &[(0.3, 0.5), (1.0, 1.2), (0.9, 1.6)] {
                let g = f(c, alpha, r, t, converged)?;
                let scale = g.bessel.abs().max(1e-3);
                out.push(g.error() / scale);
                for terms in [2, 4, 6, 10] {
                    let g = f(c, alpha, r, t, terms)?;
                    out.push((g.error() - g.omitted_sum).max(0.0) / scale);
                }
            }
        }
        Ok(worst(out))
    })
}

fn qbessel_checks() -> Vec<CheckSpec> {
    vec![
        recurrence_check("qbessel.first_derivative", 0),
        recurrence_check("qbessel.second_derivative", 1),
        recurrence_check("qbessel.first_three_term", 2),
        recurrence_check("qbessel.second_three_term", 3),
        recurrence_check("qbessel.first_lowering", 4),
        recurrence_check("qbessel.second_lowering", 5),
        recurrence_check("qbessel.second_extra", 6),
        check("qbessel.branch_overlap", 1e-10, |_, c| {
            try_worst(BESSEL_ORDERS.iter().chain(&[1.0, 2.5]).flat_map(|&nu| {
                let k = BesselKernel::new(c, nu);
                let b = k.branch_point();
                [0.8, 0.9, 0.99].map(move |s| Ok(rel(k.j1_series(s * b)?, k.j1_continued(s * b)?)))
            }))
        }),
        generating_check("qbessel.generating_first", generating_first, 120),
        generating_check("qbessel.generating_second", generating_second, 60),
    ]
}

fn hankel_orders(c: &QContext) -> Vec<f64> {
    let mut nus = vec![-0.5, 0.5];
    let half = c.half_m() - 1.0;
    if !nus.contains(&half) && half >= -0.5 {
        nus.push(half);
    }
    nus
}

fn qhankel_checks() -> Vec<CheckSpec> {
    vec![
        check("qhankel.inversion", 1e-8, |_, c| {
            let mut out = Vec::new();
            for nu in hankel_orders(c) {
                for j in 0..=4 {
                    for gamma in [0.7, 1.0, 1.3] {
                        out.extend(inversion_residuals(c, nu, j, 1.0, gamma)?);
                    }
                }
            }
            Ok(worst(out))
        }),
        check("qhankel.closed_form", 1e-10, |cfg, c| {
            let mut out = Vec::new();
            for nu in hankel_orders(c) {
                for j in 0..=4 {
                    out.extend(closed_form_residuals(c, nu, j, 1.0, cfg.gamma)?);
                }
            }
            Ok(worst(out))
        }),
        check("qhankel.operational", 1e-10, |_, c| {
            let mut out = Vec::new();
            for nu in [0.0, 0.5, 1.5] {
                out.extend(operational_residuals(c, nu, 2)?.into_iter().map(|(_, r)| r));
            }
            Ok(worst(out))
        }),
        check("qhankel.pair_identities", 1e-10, |cfg, c| {
            let mut out = Vec::new();
            for nu in [-0.5, 0.0, 1.5] {
                for j in [0, 2, 4] {
                    out.extend(pair_identity_residuals(c, nu, j, cfg.gamma)?);
                }
            }
            Ok(worst(out))
        }),
        check("qhankel.braided_forward", 1e-9, |_, c| try_worst((0..=4).map(|k| Ok(braided_residuals(c, k)?[0])))),
        check("qhankel.braided_inverse", 1e-9, |_, c| try_worst((0..=4).map(|k| Ok(braided_residuals(c, k)?[1])))),
        check("qhankel.braided_round_trip", 1e-8, |_, c| try_worst((0..=4).map(|k| Ok(braided_residuals(c, k)?[2])))),
    ]
}

fn fischer_sample(c: &QContext) -> Result<FischerElement> {
    Ok(FischerElement::new(c)
        .with_block(0, RadialSeries::new(vec![1.0, -0.4], Gauss::Big(1.0))?)
        .with_block(1, RadialSeries::new(vec![0.5], Gauss::Big(1.0))?)
        .with_block(2, RadialSeries::new(vec![0.2, 0.3, -0.1], Gauss::Big(1.0))?))
}

const FISCHER_TS: [f64; 5] = [0.2, 0.7, 1.5, 3.0, 6.0];
const FISCHER_RS: [f64; 4] = [0.1, 0.5, 1.0, 1.8];

fn sl2_check(name: &'static str, index: usize) -> CheckSpec {
    check(name, 1e-12, move |cfg, c| {
        try_worst(random_elements(c, cfg.seed, 50).iter().map(|e| Ok(sl2_residuals(e)?[index])))
    })
}

fn fischer_checks() -> Vec<CheckSpec> {
    vec![
        sl2_check("fischer.sl2_laplace_norm", 0),
        sl2_check("fischer.sl2_euler_norm", 1),
        sl2_check("fischer.sl2_laplace_euler", 2),
        check("fischer.euler_on_harmonics", 1e-13, |_, c| {
            try_worst((0..=6).map(|k| {
                let e = FischerElement::new(c).with_block(k, RadialSeries::polynomial(vec![1.0])?).op_euler();
                let got = e.block(k).map_or(0.0, |b| b.radial.coeffs()[0]);
                Ok(rel(got, c.bracket2(c.half_m() + k as f64)))
            }))
        }),
        check("fischer.intertwining", 1e-8, |_, c| {
            let mut out = Vec::new();
            for k in 0..=3 {
                for j in 0..=3 {
                    for sign in [Sign::Plus, Sign::Minus] {
                        out.extend(intertwining_residuals(c, k, j, sign)?);
                    }
                }
            }
            Ok(worst(out))
        }),
        check("fischer.forward_quadrature", 1e-10, |_, c| {
            let e = fischer_sample(c)?;
            try_worst([Sign::Plus, Sign::Minus].map(|sign| {
                let quad = e.fourier_forward_sampled(sign, &FISCHER_TS)?;
                quad.distance(&e.fourier_forward(sign)?.sample(&FISCHER_TS)?)
            }))
        }),
        check("fischer.inverse_of_forward", 1e-12, |_, c| {
            let e = fischer_sample(c)?;
            try_worst([Sign::Plus, Sign::Minus].map(|sign| {
                let back = e.fourier_forward(sign)?.fourier_inverse(sign.flip())?;
                Ok(back.max_difference(&e)? / e.max_coeff())
            }))
        }),
        check("fischer.gamma_independence", 1e-8, |_, c| {
            let closed = fischer_sample(c)?.fourier_forward(Sign::Plus)?;
            let reference = closed.fourier_inverse_sampled(Sign::Minus, 1.0, &FISCHER_RS)?;
            let target = closed.fourier_inverse(Sign::Minus)?.sample(&FISCHER_RS)?;
            let mut out = vec![reference.distance(&target)?];
            for gamma in [0.7, 1.3] {
                out.push(closed.fourier_inverse_sampled(Sign::Minus, gamma, &FISCHER_RS)?.distance(&reference)?);
            }
            Ok(worst(out))
        }),
        check("fischer.json_round_trip", 0.0, |cfg, c| {
            try_worst(random_elements(c, cfg.seed, 20).iter().map(|e| {
                let back = FischerElement::from_json_with(&e.to_json(), *c.policy())?;
                Ok(if &back == e { 0.0 } else { 1.0 })
            }))
        }),
    ]
}

fn power_of_norm(c: &QContext, k: u32, l: usize) -> Result<FischerElement> {
    let mut coeffs = vec![0.0; l + 1];
    coeffs[l] = 1.0;
    Ok(FischerElement::new(c).with_block(k, RadialSeries::polynomial(coeffs)?))
}

/// Orders at which the terms of the sum are of moderate size, so the sum
/// itself can be compared with zero.
pub const TECHGAMMA_ALPHAS: [f64; 5] = [-0.3, 0.7, 1.5, 2.3, 4.1];

fn sphere_checks() -> Vec<CheckSpec> {
    vec![
        check("sphere.pizzetti_powers", 1e-12, |_, c| {
            let one = sphere_norm(c);
            try_worst((0..=6).map(|l| {
                let r = sphere_integrate(&power_of_norm(c, 0, l)?)?;
                Ok(rel(r.value, one).max(rel(r.pizzetti, one)))
            }))
        }),
        check("sphere.pizzetti_random", 1e-12, |cfg, c| {
            try_worst(random_elements(c, cfg.seed, 20).iter().map(|e| {
                let r = sphere_integrate(e)?;
                let mass = e.block(0).map_or(0.0, |b| b.radial.coeffs().iter().map(|x| x.abs()).sum());
                let scale = sphere_norm(c) * mass;
                Ok(if r.value == r.pizzetti { 0.0 } else { (r.value - r.pizzetti).abs() / scale })
            }))
        }),
        check("sphere.harmonic_zero", 0.0, |_, c| {
            let mut out = Vec::new();
            for k in 1..=4 {
                out.push(sphere_integrate(&power_of_norm(c, k, 2)?)?.value.abs());
                let e = FischerElement::new(c).with_block(k, RadialSeries::new(vec![1.0, 0.5], Gauss::Small(1.0))?);
                out.push(space_integrate(&e, IntegrationMode::Infinite(1.0))?.abs());
            }
            Ok(worst(out))
        }),
        CheckSpec {
            name: "sphere.reproducing",
            tol: 1e-10,
            body: Box::new(|_, c| {
                if c.m() <= 2 {
                    return Ok(Outcome::Skip(format!(
                        "reproducing constant has a Gamma pole at m = {}",
                        c.m()
                    )));
                }
                let mut out = Vec::new();
                for n in 0..=8 {
                    for k in 0..=8 {
                        out.push(reproducing_check(c, n, k)?);
                    }
                }
                Ok(Outcome::Residual(worst(out)))
            }),
        },
        check("sphere.techgamma", 1e-10, |_, c| {
            try_worst((1..=6).flat_map(|l| TECHGAMMA_ALPHAS.map(move |a| Ok(techgamma_sum(c, l, a)?.abs()))))
        }),
        check("sphere.techgamma_cancellation", 1e-13, |_, c| {
            try_worst((1..=6).flat_map(|l| {
                [-3.7, -2.5, -1.0, -0.3, 0.0, 0.7, 2.3, 4.1, 7.5]
                    .map(move |a| Ok(techgamma_sum(c, l, a)?.abs() / techgamma_scale(c, l, a)))
            }))
        }),
        check("sphere.funk_hecke_bessel", 1e-12, |_, c| {
            Ok(worst((0..=3).flat_map(|k| {
                (k..=k + 6).map(move |l| {
                    let (a, b) = (funk_hecke_alpha(c, k, l), funk_hecke_from_bessel(c, k, l));
                    if a == 0.0 || b == 0.0 {
                        a.abs().max(b.abs())
                    } else {
                        rel(a, b)
                    }
                })
            })))
        }),
        check("sphere.stokes", 0.0, |_, c| {
            try_worst([0.5, 1.0, 2.5].map(|beta| {
                let e = FischerElement::new(c)
                    .with_block(0, RadialSeries::new(vec![1.0, -0.5, 2.0], Gauss::Big(beta))?)
                    .with_block(1, RadialSeries::new(vec![0.3, 1.0], Gauss::Big(beta))?);
                stokes_boundary(&e)
            }))
        }),
        check("sphere.grid_refinement", 1e-10, |cfg, c| {
            let e = FischerElement::new(c).with_block(0, RadialSeries::new(vec![1.0, 0.3], Gauss::Small(c.mu() / c.p()))?);
            let v = space_integrate(&e, IntegrationMode::Infinite(cfg.gamma))?;
            Ok(rel(v, space_integrate_on_grid(&e, cfg.gamma, -160, 160)?))
        }),
        check("sphere.gamma_proportionality", 1e-10, |_, c| {
            let ratio = |l: usize| -> Result<f64> {
                let mut coeffs = vec![0.0; l + 1];
                coeffs[l] = 1.0;
                let e = FischerElement::new(c).with_block(0, RadialSeries::new(coeffs, Gauss::Small(1.0))?);
                Ok(space_integrate(&e, IntegrationMode::Infinite(0.7))? / space_integrate(&e, IntegrationMode::Infinite(1.3))?)
            };
            let r0 = ratio(0)?;
            try_worst((1..=4).map(|l| Ok(rel(ratio(l)?, r0))))
        }),
    ]
}

fn splits(max_n: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=max_n).flat_map(|n| (0..=n / 2).map(move |j| (n - 2 * j, j)))
}

fn oscillator_checks() -> Vec<CheckSpec> {
    vec![
        check("oscillator.eigen_law", 1e-10, |_, c| {
            try_worst(splits(8).flat_map(|(k, j)| [false, true].map(|b| eigen_residual(c, k, j, b))))
        }),
        check("oscillator.eigen_law_expanded", 1e-10, |_, c| {
            try_worst(splits(8).flat_map(|(k, j)| [false, true].map(|b| eigen_residual_expanded(c, k, j, b))))
        }),
        check("oscillator.fourier_phase", 0.0, |cfg, c| {
            try_worst(splits(6).flat_map(|(k, j)| {
                [Sign::Plus, Sign::Minus].map(|s| Ok(if fourier_eigencheck(c, k, j, s, cfg.gamma)?.phase_exact() { 0.0 } else { 1.0 }))
            }))
        }),
        check("oscillator.fourier_coefficients", 1e-10, |cfg, c| {
            try_worst(splits(6).flat_map(|(k, j)| {
                [Sign::Plus, Sign::Minus].map(|s| Ok(fourier_eigencheck(c, k, j, s, cfg.gamma)?.coeff_residual))
            }))
        }),
        check("oscillator.fourier_radial", 1e-8, |cfg, c| {
            try_worst(splits(6).flat_map(|(k, j)| {
                [Sign::Plus, Sign::Minus].map(|s| Ok(fourier_eigencheck(c, k, j, s, cfg.gamma)?.radial_residual))
            }))
        }),
        check("oscillator.arcsinh_exponent", 1e-10, |_, c| {
            Ok(worst((0..=8).map(|n| (arcsinh_exponent(c, eigenvalue(c, n)) - n as f64).abs())))
        }),
        check("oscillator.double_fourier", 1e-12, |_, c| {
            try_worst(splits(6).flat_map(|(k, j)| [Sign::Plus, Sign::Minus].map(|s| double_fourier_residual(c, k, j, s))))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qcore_suite_passes_at_defaults() {
        let r = run(&RunConfig::default(), Suite::Qcore).unwrap();
        assert!(r.passed(), "{}", r.to_json());
        assert!(r.checks.windows(2).all(|w| w[0].name < w[1].name));
    }

    #[test]
    fn flat_space_skips_reproducing() {
        let cfg = RunConfig { m: 2, ..RunConfig::default() };
        let r = run(&cfg, Suite::Sphere).unwrap();
        let c = r.checks.iter().find(|c| c.name == "sphere.reproducing").unwrap();
        assert_eq!(c.status, Status::Skip);
        assert!(c.reason.is_some());
    }

    #[test]
    fn invalid_q_is_rejected() {
        let cfg = RunConfig { q: 1.0, ..RunConfig::default() };
        assert!(run(&cfg, Suite::Qcore).is_err());
    }
}
