//! Acceptance criteria, one line per criterion.

use std::process::Command;

use qharmonic::fischer::{random_elements, sl2_residuals, FischerElement, Gauss, RadialSeries, Sign};
use qharmonic::oscillator::{
    arcsinh_exponent, eigen_residual, eigen_residual_expanded, eigenvalue, fourier_eigencheck, intertwining_residuals,
    monomial_block,
};
use qharmonic::qbessel::{recurrence_residuals, BesselKernel};
use qharmonic::qcore::{exp_big, exp_small, q_derivative};
use qharmonic::qhankel::{braided_residuals, inversion_residuals};
use qharmonic::qpolys::{orthogonality_finite, orthogonality_finite_norm, orthogonality_infinite, orthogonality_infinite_norm};
use qharmonic::sphere::{reproducing_check, space_integrate, sphere_integrate, sphere_norm, techgamma_sum, IntegrationMode};
use qharmonic::verify::TECHGAMMA_ALPHAS;
use qharmonic::{QContext, Result};

/// One measured quantity of a criterion.
struct Part {
    label: &'static str,
    value: f64,
    tol: f64,
}

impl Part {
    fn new(label: &'static str, value: f64, tol: f64) -> Self {
        Self { label, value, tol }
    }

    fn ok(&self) -> bool {
        self.value <= self.tol
    }
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |acc, x| if x.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(x) })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn ctx() -> QContext {
    QContext::new(0.5, 3).unwrap()
}

fn exponentials() -> Result<Vec<Part>> {
    let c = ctx();
    let edge = 0.95 / (1.0 - c.q());
    let mut inverse = Vec::new();
    for i in 0..20 {
        let t = -edge + 2.0 * edge * i as f64 / 19.0;
        inverse.push((exp_small(&c, t)? * exp_big(&c, -t) - 1.0).abs());
    }
    let mut deriv = Vec::new();
    for i in 1..=9 {
        for t in [0.1 * i as f64, -0.1 * i as f64] {
            let ds = q_derivative(&c, |s| exp_small(&c, s).unwrap_or(f64::NAN), t)?;
            let db = q_derivative(&c, |s| exp_big(&c, s), t)?;
            deriv.push(rel(ds, exp_small(&c, t)?).max(rel(db, exp_big(&c, c.q() * t))));
        }
    }
    let zeros = worst((0..=3).map(|k| exp_big(&c, -c.q().powi(-k) / (1.0 - c.q())).abs()));
    Ok(vec![
        Part::new("e*E=1", worst(inverse), 1e-12),
        Part::new("derivatives", worst(deriv), 1e-12),
        Part::new("E zeros", zeros, 1e-12),
    ])
}

fn laguerre() -> Result<Vec<Part>> {
    let c = ctx();
    let (mut diag, mut off) = (Vec::new(), Vec::new());
    for alpha in [-0.5, 0.0, 1.5] {
        for j in 0..=5 {
            for k in 0..=5 {
                let (nf_j, nf_k) = (orthogonality_finite_norm(&c, j, alpha), orthogonality_finite_norm(&c, k, alpha));
                let (ni_j, ni_k) = (orthogonality_infinite_norm(&c, j, alpha, 1.0)?, orthogonality_infinite_norm(&c, k, alpha, 1.0)?);
                let f = orthogonality_finite(&c, j, k, alpha)?;
                let i = orthogonality_infinite(&c, j, k, alpha, 1.0)?;
                if j == k {
                    diag.push(rel(f, nf_j));
                    diag.push(rel(i, ni_j));
                } else {
                    off.push(f.abs() / (nf_j * nf_k).sqrt());
                    off.push(i.abs() / (ni_j * ni_k).abs().sqrt());
                }
            }
        }
    }
    Ok(vec![
        Part::new("diagonal", worst(diag), 1e-10),
        Part::new("off-diagonal", worst(off), 1e-10),
    ])
}

fn bessel() -> Result<Vec<Part>> {
    let c = ctx();
    let mut rec = Vec::new();
    let mut overlap = Vec::new();
    for nu in [-0.5, 0.0, 0.5, 1.5] {
        for i in 0..16 {
            let u = 0.05 * 1.3f64.powi(i);
            rec.extend(recurrence_residuals(&c, nu, u)?.iter().map(|(_, r)| *r));
        }
        let k = BesselKernel::new(&c, nu);
        for s in [0.8, 0.9, 0.99] {
            let x = s * k.branch_point();
            overlap.push(rel(k.j1_series(x)?, k.j1_continued(x)?));
        }
    }
    Ok(vec![
        Part::new("recurrences", worst(rec), 1e-10),
        Part::new("branch overlap", worst(overlap), 1e-10),
    ])
}

fn hankel() -> Result<Vec<Part>> {
    let c = ctx();
    let mut inv = Vec::new();
    for nu in [-0.5, 0.5, c.half_m() - 1.0] {
        for j in 0..=4 {
            inv.extend(inversion_residuals(&c, nu, j, 1.0, 1.0)?);
        }
    }
    let rs = [0.1, 0.4, 0.9, 1.6, 2.5];
    let mut gamma = Vec::new();
    for k in 0..=2 {
        for j in 0..=4 {
            let e = monomial_block(&c, k, j, 1.0)?;
            let reference = e.fourier_inverse_sampled(Sign::Plus, 1.0, &rs)?;
            for g in [0.7, 1.3] {
                gamma.push(e.fourier_inverse_sampled(Sign::Plus, g, &rs)?.distance(&reference)?);
            }
        }
    }
    Ok(vec![
        Part::new("inversion", worst(inv), 1e-8),
        Part::new("gamma independence", worst(gamma), 1e-8),
    ])
}

fn braided() -> Result<Vec<Part>> {
    let c = ctx();
    let r: Vec<[f64; 3]> = (0..=4).map(|k| braided_residuals(&c, k)).collect::<Result<_>>()?;
    Ok(vec![
        Part::new("forward closed form", worst(r.iter().map(|x| x[0])), 1e-9),
        Part::new("inverse closed form", worst(r.iter().map(|x| x[1])), 1e-9),
        Part::new("inverse after forward", worst(r.iter().map(|x| x[2])), 1e-8),
    ])
}

fn sl2() -> Result<Vec<Part>> {
    let c = ctx();
    let mut out = Vec::new();
    for e in random_elements(&c, 42, 50) {
        out.extend(sl2_residuals(&e)?);
    }
    Ok(vec![Part::new("three relations", worst(out), 1e-12)])
}

fn pizzetti() -> Result<Vec<Part>> {
    let c = ctx();
    let one = sphere_norm(&c);
    let mut powers = Vec::new();
    for l in 0..=6 {
        let mut coeffs = vec![0.0; l + 1];
        coeffs[l] = 1.0;
        let r = sphere_integrate(&FischerElement::new(&c).with_block(0, RadialSeries::polynomial(coeffs)?))?;
        powers.push(rel(r.value, one).max(rel(r.pizzetti, one)));
    }
    let mut harmonic = Vec::new();
    for k in 1..=4 {
        let e = FischerElement::new(&c).with_block(k, RadialSeries::polynomial(vec![1.0, -2.0, 0.5])?);
        harmonic.push(sphere_integrate(&e)?.value.abs());
        let g = FischerElement::new(&c).with_block(k, RadialSeries::new(vec![1.0, 0.5], Gauss::Small(1.0))?);
        harmonic.push(space_integrate(&g, IntegrationMode::Infinite(1.0))?.abs());
    }
    let mut forms = Vec::new();
    for e in random_elements(&c, 42, 30) {
        let r = sphere_integrate(&e)?;
        let mass: f64 = e.block(0).map_or(0.0, |b| b.radial.coeffs().iter().map(|x| x.abs()).sum());
        if mass > 0.0 {
            forms.push((r.value - r.pizzetti).abs() / (one * mass));
        }
    }
    Ok(vec![
        Part::new("powers of x^2", worst(powers), 1e-12),
        Part::new("harmonic blocks", worst(harmonic), 0.0),
        Part::new("Laplacian-power vs direct", worst(forms), 1e-12),
    ])
}

fn reproducing() -> Result<Vec<Part>> {
    let mut repro = Vec::new();
    for m in 3..=5 {
        let c = QContext::new(0.5, m)?;
        for n in 0..=8 {
            for k in 0..=8 {
                repro.push(reproducing_check(&c, n, k)?);
            }
        }
    }
    let c = ctx();
    let mut tech = Vec::new();
    for l in 1..=6 {
        for alpha in TECHGAMMA_ALPHAS {
            tech.push(techgamma_sum(&c, l, alpha)?.abs());
        }
    }
    Ok(vec![
        Part::new("reproducing identity", worst(repro), 1e-10),
        Part::new("cancellation sum", worst(tech), 1e-10),
    ])
}

fn oscillator() -> Result<Vec<Part>> {
    let c = ctx();
    let mut law = Vec::new();
    for n in 0..=8u32 {
        for j in 0..=n / 2 {
            for barred in [false, true] {
                law.push(eigen_residual(&c, n - 2 * j, j, barred)?);
                law.push(eigen_residual_expanded(&c, n - 2 * j, j, barred)?);
            }
        }
    }
    let (mut phase, mut radial) = (Vec::new(), Vec::new());
    for n in 0..=6u32 {
        for j in 0..=n / 2 {
            for sign in [Sign::Plus, Sign::Minus] {
                let r = fourier_eigencheck(&c, n - 2 * j, j, sign, 1.0)?;
                phase.push(if r.phase_exact() && r.expected.unit().norm() == 1.0 { 0.0 } else { 1.0 });
                radial.push(r.radial_residual);
            }
        }
    }
    let exponent = worst((0..=8).map(|n| (arcsinh_exponent(&c, eigenvalue(&c, n)) - n as f64).abs()));
    Ok(vec![
        Part::new("eigenvalue law", worst(law), 1e-10),
        Part::new("phase (+-i)^n", worst(phase), 0.0),
        Part::new("radial eigen residual", worst(radial), 1e-8),
        Part::new("arcsinh exponent", exponent, 1e-10),
    ])
}

fn intertwining() -> Result<Vec<Part>> {
    let c = ctx();
    let mut out = Vec::new();
    for k in 0..=3 {
        for j in 0..=3 {
            for sign in [Sign::Plus, Sign::Minus] {
                out.extend(intertwining_residuals(&c, k, j, sign)?);
            }
        }
    }
    Ok(vec![Part::new("hamiltonians", worst(out), 1e-8)])
}

fn cli_determinism() -> Result<Vec<Part>> {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qh"))
            .args(["verify", "--suite", "all", "--seed", "42"])
            .output()
            .expect("qh runs")
    };
    let (a, b) = (run(), run());
    let identical = a.stdout == b.stdout && !a.stdout.is_empty();
    Ok(vec![
        Part::new("byte-identical reports", if identical { 0.0 } else { 1.0 }, 0.0),
        Part::new("exit code at defaults", a.status.code().unwrap_or(-1).abs() as f64, 0.0),
    ])
}

type Criterion = (&'static str, fn() -> Result<Vec<Part>>);

fn main() {
    let criteria: [Criterion; 11] = [
        ("q-exponential axioms", exponentials),
        ("Laguerre orthogonality", laguerre),
        ("Bessel recurrences", bessel),
        ("Hankel inversion", hankel),
        ("braided-line pair", braided),
        ("sl2 relations", sl2),
        ("Pizzetti formula", pizzetti),
        ("reproducing kernel", reproducing),
        ("oscillator spectrum", oscillator),
        ("Hamiltonian intertwining", intertwining),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(parts) => {
                let detail: Vec<String> = parts
                    .iter()
                    .map(|p| format!("{} {:.3e} (tol {:.0e}){}", p.label, p.value, p.tol, if p.ok() { "" } else { " FAILED" }))
                    .collect();
                (parts.iter().all(Part::ok), detail.join("; "))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:2} {}: {}", if ok { "PASS" } else { "FAIL" }, i + 1, name, detail);
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
