//! Harmonic-oscillator eigenblocks, the eigenvalue law and the Fourier
//! eigenstructure on block representatives.

use crate::error::{QError, Result};
use crate::fischer::{add_into, derivative, dilate, times_u, FischerElement, Gauss, Phase, RadialSeries, Sign, L_EXPAND};
use crate::qcore::{bracket, geometric_grid, pow, QContext};
use crate::qpolys::laguerre_q2_coeffs;

/// Which Hamiltonian a block belongs to: `h` with `e`-type Gaussians or
/// `h*` with `E`-type ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Unbarred,
    Barred,
}

impl Species {
    pub fn from_barred(barred: bool) -> Self {
        if barred {
            Species::Barred
        } else {
            Species::Unbarred
        }
    }

    pub fn is_barred(self) -> bool {
        self == Species::Barred
    }
}

/// Harmonic degree `k` and Laguerre index `j` of an eigenblock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OscBlock {
    pub k: u32,
    pub j: u32,
    pub species: Species,
}

impl OscBlock {
    pub fn new(k: u32, j: u32, species: Species) -> Self {
        Self { k, j, species }
    }

    /// Total degree `k + 2j`.
    pub fn n(&self) -> u32 {
        self.k + 2 * self.j
    }

    /// Gaussian after `n` raising steps: `e`-type with `alpha = q^(-m/2-2-n)`
    /// or `E`-type with `beta = q^(m/2+2+n)`.
    pub fn gauss(&self, ctx: &QContext) -> Gauss {
        let e = ctx.half_m() + 2.0 + self.n() as f64;
        match self.species {
            Species::Unbarred => Gauss::Small(pow(ctx.q(), -e)),
            Species::Barred => Gauss::Big(pow(ctx.q(), e)),
        }
    }

    pub fn element(&self, ctx: &QContext) -> Result<FischerElement> {
        let mut k = 0u32;
        let mut poly = vec![1.0];
        let mut rate = match self.species {
            Species::Unbarred => 1.0 / (pow(ctx.q(), ctx.half_m()) * ctx.mu()),
            Species::Barred => pow(ctx.q(), ctx.half_m() + 2.0) / ctx.mu(),
        };
        let steps = (0..self.k).map(|_| true).chain((0..self.j).flat_map(|_| [true, false]));
        for (i, up) in steps.enumerate() {
            let (next, r) = raise(ctx, self.species, i as u32 + 1, k, &poly, rate, up);
            poly = next;
            rate = r;
            k = if up { k + 1 } else { k - 1 };
        }
        let radial = RadialSeries::new(poly, self.gauss(ctx))?;
        Ok(FischerElement::new(ctx).with_block(self.k, radial))
    }
}

/// One raising step `n` from a block of harmonic degree `k`. Returns the
/// new radial polynomial (toward `k+1` if `up`, else `k-1`) and Gaussian rate.
fn raise(ctx: &QContext, species: Species, n: u32, k: u32, poly: &[f64], rate: f64, up: bool) -> (Vec<f64>, f64) {
    let q = ctx.q();
    let p = ctx.p();
    let nf = n as f64;
    let half_m = ctx.half_m();
    let a = k as f64 + half_m - 1.0;
    let (poly, c, b, s, base, mu, tail) = match species {
        Species::Unbarred => {
            let s = rate / q;
            let poly: Vec<f64> = dilate(poly, 1.0 / q).iter().map(|x| x * pow(q, -(k as f64) / 2.0)).collect();
            (poly, pow(q, 2.0 - nf - half_m), 1.0, s, p, ctx.mu(), (1.0 - p) * s)
        }
        Species::Barred => {
            let s = rate * q;
            let poly: Vec<f64> = dilate(poly, q).iter().map(|x| x * pow(q, k as f64 / 2.0)).collect();
            (poly, pow(q, nf - 2.0 - half_m), pow(q, 2.0 - nf), s, 1.0 / p, ctx.mu_bar(), -(1.0 - p) * s / p)
        }
    };
    let mut dg = derivative(&poly, base);
    add_into(&mut dg, &dilate(&poly, base), -s);
    let out = if up {
        let mut out = poly.clone();
        add_into(&mut out, &dg, -c * mu);
        out
    } else {
        let shifted = dilate(&poly, base);
        let mut out = times_u(&poly);
        add_into(&mut out, &times_u(&dg), -c * mu);
        let w = -c * mu * bracket(base, a);
        add_into(&mut out, &shifted, w);
        add_into(&mut out, &times_u(&shifted), w * tail);
        out
    };
    (out.iter().map(|x| b * x).collect(), s)
}

/// `psi_0 = e_{q^2}(-x^2/(q^(m/2) mu))`, or its barred partner
/// `E_{q^2}(-q^(m/2+2) x^2/mu)`.
pub fn ground_state(ctx: &QContext, barred: bool) -> FischerElement {
    eigen_block(ctx, 0, 0, barred).expect("ground state is well formed")
}

/// Laguerre-block representative with harmonic degree `k` and index `j`.
pub fn eigen_block(ctx: &QContext, k: u32, j: u32, barred: bool) -> Result<FischerElement> {
    OscBlock::new(k, j, Species::from_barred(barred)).element(ctx)
}

/// `E_n = (mu/2) [n+m/2]_{q^2} q^(-(n+m/2))`.
pub fn eigenvalue(ctx: &QContext, n: u32) -> f64 {
    let e = n as f64 + ctx.half_m();
    ctx.mu() / 2.0 * bracket(ctx.p(), e) * pow(ctx.q(), -e)
}

/// `asinh((1-q^2) E / mu) / ln(1/q) - m/2`, which recovers `n` from `E_n`.
pub fn arcsinh_exponent(ctx: &QContext, energy: f64) -> f64 {
    ((1.0 - ctx.p()) / ctx.mu() * energy).asinh() / (1.0 / ctx.q()).ln() - ctx.half_m()
}

fn relative(lhs: &FischerElement, rhs: &FischerElement) -> Result<f64> {
    let d = lhs.max_difference(rhs)?;
    Ok(if d == 0.0 { 0.0 } else { d / lhs.max_coeff().max(rhs.max_coeff()) })
}

/// `h psi - E_n psi` (or with `h*`) on the tagged block, where both
/// Hamiltonians act exactly.
pub fn eigen_residual(ctx: &QContext, k: u32, j: u32, barred: bool) -> Result<f64> {
    let psi = eigen_block(ctx, k, j, barred)?;
    relative(&psi.op_hamiltonian(barred), &psi.scale(eigenvalue(ctx, k + 2 * j)))
}

/// The eigenrelation on the polynomial view: the block expanded to
/// [`L_EXPAND`] terms, compared on the coefficients the truncation leaves
/// intact and whose inputs lie above the subnormal range. Each is measured
/// against its contributions, built from the expansion's absolute convolution.
pub fn eigen_residual_expanded(ctx: &QContext, k: u32, j: u32, barred: bool) -> Result<f64> {
    let psi = eigen_block(ctx, k, j, barred)?;
    let block = psi.block(k).expect("nonzero block");
    let exp = block.radial.expand(ctx, L_EXPAND);
    let as_element = |c: Vec<f64>| -> Result<FischerElement> {
        Ok(FischerElement::new(ctx).with_block(k, RadialSeries::polynomial(c)?))
    };
    let poly = as_element(exp.coeffs)?;
    let mag = as_element(exp.magnitude)?;
    let energy = eigenvalue(ctx, k + 2 * j);
    let residual = poly.op_hamiltonian(barred).sub(&poly.scale(energy))?;
    let lap = if barred {
        mag.op_laplace_bar().scale(pow(ctx.q(), -2.0 * ctx.m() as f64))
    } else {
        mag.op_laplace()
    };
    let scale = mag.scale(energy).add(&mag.op_norm_sq().scale(0.5))?.add(&lap.scale(0.5))?;
    let coeffs = |e: &FischerElement| e.block(k).map_or_else(Vec::new, |b| b.radial.coeffs().to_vec());
    let (r, s, m) = (coeffs(&residual), coeffs(&scale), coeffs(&mag));
    let normal = |l: usize| m.get(l).is_some_and(|x| *x >= f64::MIN_POSITIVE / f64::EPSILON);
    Ok((0..L_EXPAND - 1)
        .filter(|&l| (l.saturating_sub(1)..=l + 1).all(normal))
        .fold(0.0, |acc, l| acc.max(r.get(l).map_or(0.0, |x| x.abs()) / s[l])))
}

/// Outcome of applying the normalized transform to an eigenblock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierEigen {
    /// Phase carried by the transformed block, with the sign of its
    /// coefficients folded in.
    pub phase: Phase,
    /// `(+-i)^n`.
    pub expected: Phase,
    /// Coefficientwise residual of the closed-form transform.
    pub coeff_residual: f64,
    /// Residual of the quadrature transform on sampled radii.
    pub radial_residual: f64,
}

impl FourierEigen {
    pub fn phase_exact(&self) -> bool {
        self.phase == self.expected
    }
}

/// Applies `q^(-m^2/4) F^(+-)` to the unbarred block `(k, j)` and compares
/// it with `(+-i)^n` times the barred block.
pub fn fourier_eigencheck(ctx: &QContext, k: u32, j: u32, sign: Sign, gamma: f64) -> Result<FourierEigen> {
    let norm = pow(ctx.q(), -((ctx.m() * ctx.m()) as f64) / 4.0);
    let psi = eigen_block(ctx, k, j, false)?;
    let image = psi.fourier_inverse(sign)?.scale(norm);
    let block = image
        .block(k)
        .ok_or_else(|| QError::Domain(format!("transform of block ({k}, {j}) vanished")))?;
    let bar = eigen_block(ctx, k, j, true)?;
    let parity = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let bar_block = bar.block(k).expect("nonzero block");
    let target = FischerElement::new(ctx).with_phased_block(
        k,
        RadialSeries::new(bar_block.radial.coeffs().iter().map(|c| parity * c).collect(), bar_block.radial.gauss())?,
        block.phase,
    );
    let coeff_residual = relative(&image, &target)?;
    let radii = geometric_grid(0.1, 3.0, 8);
    let sampled = psi.fourier_inverse_sampled(sign, gamma, &radii)?;
    let mut scaled = sampled.clone();
    for (_, v) in scaled.blocks.values_mut() {
        v.iter_mut().for_each(|x| *x *= norm);
    }
    let radial_residual = scaled.distance(&target.sample(&radii)?)?;
    Ok(FourierEigen {
        phase: block.phase.then(Phase::quarter_turns(2 * j as i64)),
        expected: sign.phase(k + 2 * j),
        coeff_residual,
        radial_residual,
    })
}

/// `F^(-+)` after `F^(+-)` on the unbarred block `(k, j)`, against the block.
pub fn double_fourier_residual(ctx: &QContext, k: u32, j: u32, sign: Sign) -> Result<f64> {
    let psi = eigen_block(ctx, k, j, false)?;
    let back = psi.fourier_inverse(sign)?.fourier_forward(sign.flip())?;
    relative(&back, &psi)
}

/// `L_j^(m/2+k-1)(beta u/mu | q^2) E_{q^2}(-beta u/mu)` in block `k`.
pub fn laguerre_block(ctx: &QContext, k: u32, j: u32, beta: f64) -> Result<FischerElement> {
    let nu = ctx.half_m() + k as f64 - 1.0;
    let l = laguerre_q2_coeffs(ctx, j, nu)?;
    let radial = RadialSeries::new(dilate(&l, beta / ctx.mu()), Gauss::Big(beta))?;
    Ok(FischerElement::new(ctx).with_block(k, radial))
}

/// `u^j e_{q^2}(-alpha q^2 u/mu)` in block `k`.
pub fn monomial_block(ctx: &QContext, k: u32, j: u32, alpha: f64) -> Result<FischerElement> {
    let mut c = vec![0.0; j as usize + 1];
    c[j as usize] = 1.0;
    Ok(FischerElement::new(ctx).with_block(k, RadialSeries::new(c, Gauss::Small(alpha))?))
}

/// Residuals of the intertwining relations on a Laguerre block and on a
/// monomial block.
///
/// `F_bar h* = h F_bar` is compared after mapping both sides back with the
/// inverse transform, where the coefficients are well scaled. The third entry
/// compares the quadrature transform of `h* L` with its closed form on
/// sampled radii.
pub fn intertwining_residuals(ctx: &QContext, k: u32, j: u32, sign: Sign) -> Result<[f64; 3]> {
    let lag = laguerre_block(ctx, k, j, 1.0)?;
    let right = lag.fourier_forward(sign)?.op_hamiltonian(false);
    let first = relative(&right.fourier_inverse(sign.flip())?, &lag.op_hamiltonian(true))?;
    let mono = monomial_block(ctx, k, j, 1.0)?;
    let second = relative(
        &mono.op_hamiltonian(false).fourier_inverse(sign)?,
        &mono.fourier_inverse(sign)?.op_hamiltonian(true),
    )?;
    let points = geometric_grid(0.2, 4.0, 6);
    let hl = lag.op_hamiltonian(true);
    let quad = hl.fourier_forward_sampled(sign, &points)?;
    let third = quad.distance(&hl.fourier_forward(sign)?.sample(&points)?)?;
    Ok([first, second, third])
}
