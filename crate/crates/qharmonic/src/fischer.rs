//! Radial-harmonic model of functions on quantum Euclidean space.
//!
//! An element is a finite sum over harmonic degrees `k` of `S_k` times a
//! radial series in `u = x^2`, optionally carrying a q-Gaussian factor. The
//! harmonics themselves are never materialised.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QError, Result};
use crate::lattice::LatticeBlock;
use crate::par;
use crate::qcore::{bracket, exp_big_in, exp_small_in, pow, QContext, SeriesPolicy};
use crate::qhankel::{d_const, hankel1_at, hankel2_at, hankel_c, HankelSpec, Lattice, RadialFunction};
use crate::qpolys::laguerre_q2_coeffs;

/// Gaussian terms kept when a tagged series is expanded into a polynomial.
pub const L_EXPAND: usize = 40;

/// Gaussian factor of a radial series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gauss {
    None,
    /// `e_{q^2}(-alpha q^2 u/mu)`.
    Small(f64),
    /// `E_{q^2}(-beta u/mu)`.
    Big(f64),
}

impl Gauss {
    /// `s` such that the factor is `e_{q^2}(-s u)` or `E_{q^2}(-s u)`.
    pub fn rate(self, ctx: &QContext) -> f64 {
        match self {
            Gauss::None => 0.0,
            Gauss::Small(alpha) => alpha * ctx.p() / ctx.mu(),
            Gauss::Big(beta) => beta / ctx.mu(),
        }
    }

    pub fn scale(self) -> Option<f64> {
        match self {
            Gauss::None => None,
            Gauss::Small(s) | Gauss::Big(s) => Some(s),
        }
    }

    /// Same species and scales equal up to rounding.
    pub fn matches(self, other: Gauss) -> bool {
        match (self, other) {
            (Gauss::None, Gauss::None) => true,
            (Gauss::Small(a), Gauss::Small(b)) | (Gauss::Big(a), Gauss::Big(b)) => {
                (a - b).abs() <= 1e-13 * a.abs().max(b.abs())
            }
            _ => false,
        }
    }

    fn validate(self) -> Result<Self> {
        match self.scale() {
            Some(s) if !(s > 0.0 && s.is_finite()) => Err(invalid("scale", s, "Gaussian scale must be positive")),
            _ => Ok(self),
        }
    }

    /// The first `n` Taylor coefficients in `u`.
    pub fn series(self, ctx: &QContext, n: usize) -> Vec<f64> {
        let p = ctx.p();
        let s = self.rate(ctx);
        let mut out = Vec::with_capacity(n);
        let mut c = 1.0;
        for l in 0..n {
            if l > 0 {
                c *= -s / bracket(p, l as f64);
                if let Gauss::Big(_) = self {
                    c *= p.powi(l as i32 - 1);
                }
            }
            out.push(c);
        }
        out
    }

    pub fn value(self, ctx: &QContext, u: f64) -> Result<f64> {
        let s = self.rate(ctx);
        match self {
            Gauss::None => Ok(1.0),
            Gauss::Small(_) => exp_small_in(ctx.p(), -s * u, ctx.policy()),
            Gauss::Big(_) => Ok(exp_big_in(ctx.p(), -s * u)),
        }
    }
}

/// A power of `i`, stored as a count of quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);

    pub fn quarter_turns(n: i64) -> Self {
        Phase(n.rem_euclid(4) as u8)
    }

    pub fn turns(self) -> u8 {
        self.0
    }

    pub fn unit(self) -> Complex64 {
        Complex64::i().powu(self.0 as u32)
    }

    pub fn then(self, other: Phase) -> Self {
        Self::quarter_turns(self.0 as i64 + other.0 as i64)
    }
}

/// The sign in `(+-i)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// `(+-i)^k`.
    pub fn phase(self, k: u32) -> Phase {
        Phase::quarter_turns(self.value() * k as i64)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn trimmed(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    coeffs
}

pub(crate) fn add_into(acc: &mut Vec<f64>, other: &[f64], w: f64) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += w * b;
    }
}

/// q-derivative in base `b` of a polynomial.
pub(crate) fn derivative(coeffs: &[f64], b: f64) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * bracket(b, i as f64))
        .collect()
}

/// `P(f u)`.
pub(crate) fn dilate(coeffs: &[f64], f: f64) -> Vec<f64> {
    coeffs.iter().enumerate().map(|(i, c)| c * f.powi(i as i32)).collect()
}

pub(crate) fn times_u(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.is_empty() {
        return Vec::new();
    }
    std::iter::once(0.0).chain(coeffs.iter().copied()).collect()
}

/// A polynomial in `u = x^2` times an optional q-Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSeries {
    coeffs: Vec<f64>,
    gauss: Gauss,
}

/// Gaussian expanded into the series up to a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub coeffs: Vec<f64>,
    /// `sum |P_i g_(l-i)|` for every coefficient, the scale of its rounding.
    pub magnitude: Vec<f64>,
    /// Size of the first dropped coefficient.
    pub tail: f64,
}

impl RadialSeries {
    pub fn new(coeffs: Vec<f64>, gauss: Gauss) -> Result<Self> {
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(invalid("coeffs", *c, "coefficients must be finite"));
        }
        Ok(Self::from_parts(coeffs, gauss.validate()?))
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, Gauss::None)
    }

    fn from_parts(coeffs: Vec<f64>, gauss: Gauss) -> Self {
        Self {
            coeffs: trimmed(coeffs),
            gauss,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn gauss(&self) -> Gauss {
        self.gauss
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Value at `u`.
    pub fn eval(&self, ctx: &QContext, u: f64) -> Result<f64> {
        let p = horner(&self.coeffs, u);
        if p == 0.0 {
            return Ok(0.0);
        }
        Ok(p * self.gauss.value(ctx, u)?)
    }

    /// Polynomial view with the Gaussian expanded to `terms` coefficients
    /// (or the full polynomial, if longer).
    pub fn expand(&self, ctx: &QContext, terms: usize) -> Expansion {
        if self.gauss == Gauss::None {
            return Expansion {
                magnitude: self.coeffs.iter().map(|c| c.abs()).collect(),
                coeffs: self.coeffs.clone(),
                tail: 0.0,
            };
        }
        let n = terms.max(self.coeffs.len());
        let g = self.gauss.series(ctx, n + 1);
        let conv = |l: usize, abs: bool| {
            self.coeffs
                .iter()
                .enumerate()
                .take(l + 1)
                .map(|(i, c)| if abs { (c * g[l - i]).abs() } else { c * g[l - i] })
                .sum::<f64>()
        };
        Expansion {
            coeffs: (0..n).map(|l| conv(l, false)).collect(),
            magnitude: (0..n).map(|l| conv(l, true)).collect(),
            tail: conv(n, true),
        }
    }

    fn expanded(&self, ctx: &QContext, terms: usize) -> Self {
        Self::from_parts(self.expand(ctx, terms).coeffs, Gauss::None)
    }

    fn with_coeffs(&self, coeffs: Vec<f64>) -> Self {
        Self::from_parts(coeffs, self.gauss)
    }
}

/// One harmonic block: radial series and a phase `i^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub radial: RadialSeries,
    pub phase: Phase,
}

/// A finite sum `sum_k i^(n_k) S_k f_k(x^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FischerElement {
    ctx: QContext,
    blocks: BTreeMap<u32, Block>,
}

/// Radial profiles of every block sampled at common radii.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledElement {
    pub points: Vec<f64>,
    pub blocks: BTreeMap<u32, (Phase, Vec<f64>)>,
}

impl SampledElement {
    /// `max |a - b| / max |b|` over all blocks; phases must agree.
    pub fn distance(&self, reference: &SampledElement) -> Result<f64> {
        let diff = self.max_difference(reference)?;
        Ok(if diff == 0.0 { 0.0 } else { diff / reference.max_abs() })
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.values().flat_map(|(_, v)| v.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest pointwise difference over all blocks; phases must agree.
    pub fn max_difference(&self, other: &SampledElement) -> Result<f64> {
        let keys: Vec<u32> = self.blocks.keys().chain(other.blocks.keys()).copied().collect();
        let mut diff: f64 = 0.0;
        for k in keys {
            let empty = (Phase::ONE, vec![0.0; self.points.len()]);
            let a = self.blocks.get(&k).unwrap_or(&empty);
            let b = other.blocks.get(&k).unwrap_or(&empty);
            let zero = |v: &[f64]| v.iter().all(|x| *x == 0.0);
            if a.0 != b.0 && !zero(&a.1) && !zero(&b.1) {
                return Err(QError::Domain(format!("block {k}: phases differ")));
            }
            for (x, y) in a.1.iter().zip(&b.1) {
                diff = diff.max((x - y).abs());
            }
        }
        Ok(diff)
    }
}

fn laguerre_basis(ctx: &QContext, degree: usize, nu: f64) -> Result<Vec<Vec<f64>>> {
    (0..=degree as u32).map(|j| laguerre_q2_coeffs(ctx, j, nu)).collect()
}

/// Coefficients of `Q(v)` in the Laguerre basis `L_j^(nu)(v | q^2)`.
fn laguerre_decompose(ctx: &QContext, q_of_v: &[f64], nu: f64) -> Result<Vec<f64>> {
    if q_of_v.is_empty() {
        return Ok(Vec::new());
    }
    let basis = laguerre_basis(ctx, q_of_v.len() - 1, nu)?;
    let mut rest = q_of_v.to_vec();
    let mut c = vec![0.0; q_of_v.len()];
    for j in (0..q_of_v.len()).rev() {
        c[j] = rest[j] / basis[j][j];
        for (r, b) in rest.iter_mut().zip(&basis[j]) {
            *r -= c[j] * b;
        }
    }
    Ok(c)
}

impl FischerElement {
    pub fn new(ctx: &QContext) -> Self {
        Self {
            ctx: *ctx,
            blocks: BTreeMap::new(),
        }
    }

    pub fn ctx(&self) -> &QContext {
        &self.ctx
    }

    /// Adds (or replaces) block `k`; empty series are dropped.
    pub fn with_block(self, k: u32, radial: RadialSeries) -> Self {
        self.with_phased_block(k, radial, Phase::ONE)
    }

    pub fn with_phased_block(mut self, k: u32, radial: RadialSeries, phase: Phase) -> Self {
        if radial.is_zero() {
            self.blocks.remove(&k);
        } else {
            self.blocks.insert(k, Block { radial, phase });
        }
        self
    }

    pub fn block(&self, k: u32) -> Option<&Block> {
        self.blocks.get(&k)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (u32, &Block)> {
        self.blocks.iter().map(|(k, b)| (*k, b))
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    fn map_radial(&self, f: impl Fn(u32, &RadialSeries) -> Result<RadialSeries>) -> Result<Self> {
        let mut out = Self::new(&self.ctx);
        for (k, b) in self.blocks() {
            out = out.with_phased_block(k, f(k, &b.radial)?, b.phase);
        }
        Ok(out)
    }

    fn map_infallible(&self, f: impl Fn(u32, &RadialSeries) -> RadialSeries) -> Self {
        self.map_radial(|k, r| Ok(f(k, r))).expect("infallible block map")
    }

    /// Sum of two elements. Matching blocks must carry the same Gaussian
    /// and phases that agree up to sign.
    pub fn add(&self, other: &FischerElement) -> Result<Self> {
        let mut out = self.clone();
        for (k, b) in other.blocks() {
            let merged = match out.blocks.get(&k) {
                None => b.clone(),
                Some(a) => {
                    if !a.radial.gauss.matches(b.radial.gauss) {
                        return Err(QError::TagMismatch(format!("block {k}: {:?} + {:?}", a.radial.gauss, b.radial.gauss)));
                    }
                    let w = match (b.phase.turns() + 4 - a.phase.turns()) % 4 {
                        0 => 1.0,
                        2 => -1.0,
                        _ => return Err(QError::Domain(format!("block {k}: phases differ by a quarter turn"))),
                    };
                    let mut c = a.radial.coeffs.clone();
                    add_into(&mut c, &b.radial.coeffs, w);
                    Block {
                        radial: a.radial.with_coeffs(c),
                        phase: a.phase,
                    }
                }
            };
            out = out.with_phased_block(k, merged.radial, merged.phase);
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_infallible(|_, r| r.with_coeffs(r.coeffs.iter().map(|x| c * x).collect()))
    }

    pub fn sub(&self, other: &FischerElement) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Polynomial view: every Gaussian expanded to `terms` coefficients.
    pub fn expanded(&self, terms: usize) -> Self {
        self.map_infallible(|_, r| r.expanded(&self.ctx, terms))
    }

    /// Expands the blocks whose Gaussian the (barred) Laplacian does not
    /// preserve: `E`-type for the plain calculus, `e`-type for the barred one.
    fn native(&self, barred: bool) -> Self {
        self.map_infallible(|_, r| match (r.gauss, barred) {
            (Gauss::Big(_), false) | (Gauss::Small(_), true) => r.expanded(&self.ctx, L_EXPAND),
            _ => r.clone(),
        })
    }

    /// Multiplication by `x^2`.
    pub fn op_norm_sq(&self) -> Self {
        self.map_infallible(|_, r| r.with_coeffs(times_u(&r.coeffs)))
    }

    fn laplace_radial(&self, k: u32, r: &RadialSeries, barred: bool) -> RadialSeries {
        let ctx = &self.ctx;
        let p = ctx.p();
        let a = k as f64 + ctx.half_m() - 1.0;
        let s = r.gauss.rate(ctx);
        let (b, mu) = if barred { (1.0 / p, ctx.mu_bar()) } else { (p, ctx.mu()) };
        // derivative of P G, divided by G
        let d = |c: &[f64]| {
            let mut out = derivative(c, b);
            add_into(&mut out, &dilate(c, b), -s);
            out
        };
        let first = d(&r.coeffs);
        let mut out: Vec<f64> = first.iter().map(|c| mu * mu * bracket(b, a) * c).collect();
        add_into(&mut out, &d(&times_u(&first)), mu * mu * pow(b, a));
        r.with_coeffs(out)
    }

    /// The Laplacian. Exact on polynomials and on `e`-type blocks; `E`-type
    /// blocks are expanded to [`L_EXPAND`] terms first.
    pub fn op_laplace(&self) -> Self {
        let v = self.native(false);
        v.map_infallible(|k, r| v.laplace_radial(k, r, false))
    }

    /// The barred Laplacian, with monomial rule
    /// `mu_bar^2 [l+k+m/2-1]_{q^-2} [l]_{q^-2}`. Exact on polynomials and on
    /// `E`-type blocks; `e`-type blocks are expanded first.
    pub fn op_laplace_bar(&self) -> Self {
        let v = self.native(true);
        v.map_infallible(|k, r| v.laplace_radial(k, r, true))
    }

    /// The Euler operator, `([m/2+k+l]_{q^2} + q^2 [l]_{q^2})` on `x^(2l) S_k`.
    pub fn op_euler(&self) -> Self {
        let ctx = self.ctx;
        let p = ctx.p();
        self.expanded(L_EXPAND).map_infallible(|k, r| {
            let c = r
                .coeffs
                .iter()
                .enumerate()
                .map(|(l, c)| {
                    let l = l as f64;
                    c * (bracket(p, ctx.half_m() + k as f64 + l) + p * bracket(p, l))
                })
                .collect();
            r.with_coeffs(c)
        })
    }

    /// `Lambda^power`: `x^(2l) S_k` scales by `q^(2 power (k+2l))`. Gaussian
    /// blocks stay tagged with a rescaled Gaussian.
    pub fn op_dilation(&self, power: f64) -> Self {
        let q = self.ctx.q();
        let f = pow(q, 4.0 * power);
        self.map_infallible(|k, r| {
            let lead = pow(q, 2.0 * power * k as f64);
            let coeffs = dilate(&r.coeffs, f).iter().map(|c| lead * c).collect();
            let gauss = match r.gauss {
                Gauss::None => Gauss::None,
                Gauss::Small(a) => Gauss::Small(a * f),
                Gauss::Big(b) => Gauss::Big(b * f),
            };
            RadialSeries::from_parts(coeffs, gauss)
        })
    }

    /// `h = (-Delta + x^2)/2`, or `h* = (-q^(-2m) Delta_bar + x^2)/2`.
    pub fn op_hamiltonian(&self, starred: bool) -> Self {
        let v = self.native(starred);
        let lap = if starred {
            v.op_laplace_bar().scale(pow(self.ctx.q(), -2.0 * self.ctx.m() as f64))
        } else {
            v.op_laplace()
        };
        v.op_norm_sq()
            .sub(&lap)
            .expect("same tags and phases")
            .scale(0.5)
    }

    fn order(&self, k: u32) -> f64 {
        self.ctx.half_m() + k as f64 - 1.0
    }

    /// The forward transform on `E`-tagged blocks, through the closed form of
    /// the finite Hankel transform of order `m/2+k-1`.
    pub fn fourier_forward(&self, sign: Sign) -> Result<Self> {
        let ctx = self.ctx;
        let mu = ctx.mu();
        let mut out = Self::new(&ctx);
        for (k, b) in self.blocks() {
            let Gauss::Big(beta) = b.radial.gauss else {
                return Err(QError::TagMismatch(format!("forward transform needs an E-type block, block {k} is {:?}", b.radial.gauss)));
            };
            let nu = self.order(k);
            let in_v = dilate(&b.radial.coeffs, mu / beta);
            let c = laguerre_decompose(&ctx, &in_v, nu)?;
            let coeffs = c
                .iter()
                .enumerate()
                .map(|(j, cj)| cj * beta.powf(-(nu + 1.0 + j as f64)) * hankel_c(&ctx, j as u32, nu))
                .collect();
            out = out.with_phased_block(
                k,
                RadialSeries::from_parts(coeffs, Gauss::Small(1.0 / beta)),
                b.phase.then(sign.phase(k)),
            );
        }
        Ok(out)
    }

    /// The inverse-direction transform on `e`-tagged blocks, through the
    /// closed form of the infinite Hankel transform divided by `c`.
    pub fn fourier_inverse(&self, sign: Sign) -> Result<Self> {
        let ctx = self.ctx;
        let mu = ctx.mu();
        let mut out = Self::new(&ctx);
        for (k, b) in self.blocks() {
            let Gauss::Small(alpha) = b.radial.gauss else {
                return Err(QError::TagMismatch(format!("inverse transform needs an e-type block, block {k} is {:?}", b.radial.gauss)));
            };
            let nu = self.order(k);
            let basis = laguerre_basis(&ctx, b.radial.coeffs.len().saturating_sub(1), nu)?;
            let mut in_v = Vec::new();
            for (i, pi) in b.radial.coeffs.iter().enumerate() {
                let w = pi / hankel_c(&ctx, i as u32, nu) * alpha.powf(-(nu + 1.0 + i as f64));
                add_into(&mut in_v, &basis[i], w);
            }
            let coeffs = dilate(&in_v, 1.0 / (alpha * mu));
            out = out.with_phased_block(
                k,
                RadialSeries::from_parts(coeffs, Gauss::Big(1.0 / alpha)),
                b.phase.then(sign.phase(k)),
            );
        }
        Ok(out)
    }

    /// Radial profile `f_k(r^2)` of block `k`.
    pub fn radial_profile(&self, k: u32, r: f64) -> Result<f64> {
        match self.block(k) {
            Some(b) => b.radial.eval(&self.ctx, r * r),
            None => Ok(0.0),
        }
    }

    pub fn sample(&self, points: &[f64]) -> Result<SampledElement> {
        let mut blocks = BTreeMap::new();
        for (k, b) in self.blocks() {
            let v = points.iter().map(|&r| self.radial_profile(k, r)).collect::<Result<_>>()?;
            blocks.insert(k, (b.phase, v));
        }
        Ok(SampledElement {
            points: points.to_vec(),
            blocks,
        })
    }

    /// The forward transform by quadrature: each block goes through the
    /// finite Hankel transform, with integrand values on its lattice taken
    /// from the Laguerre decomposition.
    pub fn fourier_forward_sampled(&self, sign: Sign, points: &[f64]) -> Result<SampledElement> {
        let ctx = self.ctx;
        let mu = ctx.mu();
        let mut blocks = BTreeMap::new();
        for (k, b) in self.blocks() {
            let Gauss::Big(beta) = b.radial.gauss else {
                return Err(QError::TagMismatch(format!("forward transform needs an E-type block, block {k} is {:?}", b.radial.gauss)));
            };
            let nu = self.order(k);
            let c = laguerre_decompose(&ctx, &dilate(&b.radial.coeffs, mu / beta), nu)?;
            let parts: Vec<(f64, LatticeBlock)> = c
                .iter()
                .enumerate()
                .map(|(j, cj)| (*cj, LatticeBlock::new(ctx.q(), j as u32, nu)))
                .collect();
            let radial = b.radial.clone();
            let f = RadialFunction::opaque(&ctx, move |r| radial.eval(&ctx, r * r))
                .with_lattice(Lattice::new(beta, move |n| parts.iter().map(|(c, l)| c * l.value(n)).sum()));
            let spec = HankelSpec::new(nu, beta)?;
            let v = par::map(points, |&t| hankel1_at(&ctx, &spec, &f, t))
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            blocks.insert(k, (b.phase.then(sign.phase(k)), v));
        }
        Ok(SampledElement {
            points: points.to_vec(),
            blocks,
        })
    }

    /// The inverse-direction transform by quadrature on the grid anchored at
    /// `gamma`, divided by `c = d(gamma sqrt(alpha/mu), m/2-1)`.
    pub fn fourier_inverse_sampled(&self, sign: Sign, gamma: f64, points: &[f64]) -> Result<SampledElement> {
        let ctx = self.ctx;
        let mut blocks = BTreeMap::new();
        for (k, b) in self.blocks() {
            let Gauss::Small(alpha) = b.radial.gauss else {
                return Err(QError::TagMismatch(format!("inverse transform needs an e-type block, block {k} is {:?}", b.radial.gauss)));
            };
            let nu = self.order(k);
            let c = d_const(&ctx, gamma * (alpha / ctx.mu()).sqrt(), ctx.half_m() - 1.0)?;
            let radial = b.radial.clone();
            let f = RadialFunction::opaque(&ctx, move |t| radial.eval(&ctx, t * t));
            let spec = HankelSpec::new(nu, gamma)?;
            let v = par::map(points, |&r| Ok(hankel2_at(&ctx, &spec, &f, r)? / c))
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
            blocks.insert(k, (b.phase.then(sign.phase(k)), v));
        }
        Ok(SampledElement {
            points: points.to_vec(),
            blocks,
        })
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.blocks
            .values()
            .flat_map(|b| b.radial.coeffs.iter())
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Largest coefficient of `self - other`; tags and phases must agree.
    pub fn max_difference(&self, other: &FischerElement) -> Result<f64> {
        Ok(self.sub(other)?.max_coeff())
    }

    /// A random polynomial element with blocks `k <= max_k` and radial
    /// degree `<= max_l`, coefficients uniform in `[-1, 1]`.
    pub fn random(ctx: &QContext, rng: &mut ChaCha8Rng, max_k: u32, max_l: usize) -> Self {
        let mut out = Self::new(ctx);
        let count = rng.gen_range(1..=max_k + 1);
        for _ in 0..count {
            let k = rng.gen_range(0..=max_k);
            let len = rng.gen_range(1..=max_l + 1);
            let coeffs = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            out = out.with_block(k, RadialSeries::from_parts(coeffs, Gauss::None));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ElementDoc::from(self)).expect("element serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with(text, SeriesPolicy::default())
    }

    pub fn from_json_with(text: &str, policy: SeriesPolicy) -> Result<Self> {
        let doc: ElementDoc = serde_json::from_str(text).map_err(|e| QError::Parse(e.to_string()))?;
        doc.into_element(policy)
    }
}

/// Residuals of the three `U_q(sl2)` relations on `e`, each relative to the
/// largest coefficient among its terms.
pub fn sl2_residuals(e: &FischerElement) -> Result<[f64; 3]> {
    let ctx = e.ctx();
    let mu = ctx.mu();
    let p = ctx.p();
    let two = bracket(p, 2.0);
    let rel = |lhs: &FischerElement, rhs: &FischerElement, terms: &[&FischerElement]| -> Result<f64> {
        let scale = terms.iter().map(|t| t.max_coeff()).fold(rhs.max_coeff(), f64::max);
        let d = lhs.max_difference(rhs)?;
        Ok(if d == 0.0 { 0.0 } else { d / scale })
    };
    let a = e.op_norm_sq().op_laplace().scale(1.0 / (mu * mu));
    let b = e.op_laplace().op_norm_sq().scale(p * p / (mu * mu));
    let first = rel(&a.sub(&b)?, &e.op_euler(), &[&a, &b])?;
    let a = e.op_norm_sq().op_euler().scale(1.0 / mu);
    let b = e.op_euler().op_norm_sq().scale(p / mu);
    let second = rel(&a.sub(&b)?, &e.op_norm_sq().scale(two / mu), &[&a, &b])?;
    let a = e.op_euler().op_laplace().scale(1.0 / mu);
    let b = e.op_laplace().op_euler().scale(p / mu);
    let third = rel(&a.sub(&b)?, &e.op_laplace().scale(two / mu), &[&a, &b])?;
    Ok([first, second, third])
}

/// `count` seeded random elements with `k, l <= 4`.
pub fn random_elements(ctx: &QContext, seed: u64, count: usize) -> Vec<FischerElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| FischerElement::random(ctx, &mut rng, 4, 4)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GaussKind {
    None,
    ESmall,
    EBig,
}

#[derive(Debug, Serialize, Deserialize)]
struct GaussDoc {
    #[serde(rename = "type")]
    kind: GaussKind,
    #[serde(default)]
    scale: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockDoc {
    k: u32,
    gauss: GaussDoc,
    coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero_phase")]
    phase: u8,
}

fn is_zero_phase(p: &u8) -> bool {
    *p == 0
}

#[derive(Debug, Serialize, Deserialize)]
struct ElementDoc {
    m: u32,
    q: f64,
    blocks: Vec<BlockDoc>,
}

impl From<&FischerElement> for ElementDoc {
    fn from(e: &FischerElement) -> Self {
        let blocks = e
            .blocks()
            .map(|(k, b)| {
                let (kind, scale) = match b.radial.gauss {
                    Gauss::None => (GaussKind::None, None),
                    Gauss::Small(s) => (GaussKind::ESmall, Some(s)),
                    Gauss::Big(s) => (GaussKind::EBig, Some(s)),
                };
                BlockDoc {
                    k,
                    gauss: GaussDoc { kind, scale },
                    coeffs: b.radial.coeffs.clone(),
                    phase: b.phase.turns(),
                }
            })
            .collect();
        Self {
            m: e.ctx.m(),
            q: e.ctx.q(),
            blocks,
        }
    }
}

impl ElementDoc {
    fn into_element(self, policy: SeriesPolicy) -> Result<FischerElement> {
        let ctx = QContext::with_policy(self.q, self.m, policy)?;
        let mut out = FischerElement::new(&ctx);
        for b in self.blocks {
            if out.block(b.k).is_some() {
                return Err(QError::Parse(format!("duplicate block k = {}", b.k)));
            }
            let scale = || {
                b.gauss
                    .scale
                    .ok_or_else(|| QError::Parse(format!("block {}: Gaussian without scale", b.k)))
            };
            let gauss = match b.gauss.kind {
                GaussKind::None => Gauss::None,
                GaussKind::ESmall => Gauss::Small(scale()?),
                GaussKind::EBig => Gauss::Big(scale()?),
            };
            if b.phase > 3 {
                return Err(QError::Parse(format!("block {}: phase must be 0..=3", b.k)));
            }
            let radial = RadialSeries::new(b.coeffs, gauss)?;
            out = out.with_phased_block(b.k, radial, Phase(b.phase));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> QContext {
        QContext::new(0.5, 3).unwrap()
    }

    fn poly(c: &QContext, k: u32, coeffs: &[f64]) -> FischerElement {
        FischerElement::new(c).with_block(k, RadialSeries::polynomial(coeffs.to_vec()).unwrap())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn norm_square_shifts() {
        let c = ctx();
        assert_eq!(poly(&c, 0, &[1.0]).op_norm_sq(), poly(&c, 0, &[0.0, 1.0]));
        assert_eq!(poly(&c, 2, &[1.0, 2.0]).op_norm_sq().op_norm_sq(), poly(&c, 2, &[0.0, 0.0, 1.0, 2.0]));
    }

    #[test]
    fn laplace_monomial_rule() {
        let c = ctx();
        let (p, mu) = (c.p(), c.mu());
        let v = poly(&c, 0, &[0.0, 1.0]).op_laplace();
        assert!(rel(v.block(0).unwrap().radial.coeffs()[0], mu * mu * bracket(p, 1.5)) < 1e-15);
        for k in 0..4 {
            assert!(poly(&c, k, &[2.5]).op_laplace().is_zero());
        }
        // l = 2, k = 1, m = 3: mu^2 [l+k+m/2-1] [l] = mu^2 [3.5] [2]
        let v = poly(&c, 1, &[0.0, 0.0, 1.0]).op_laplace();
        let want = mu * mu * bracket(p, 3.5) * bracket(p, 2.0);
        assert_eq!(v.block(1).unwrap().radial.coeffs().len(), 2);
        assert!(rel(v.block(1).unwrap().radial.coeffs()[1], want) < 1e-15);
    }

    #[test]
    fn euler_on_harmonics_and_monomials() {
        let c = ctx();
        let p = c.p();
        for k in 0..4 {
            let v = poly(&c, k, &[1.0]).op_euler();
            assert!(rel(v.block(k).unwrap().radial.coeffs()[0], bracket(p, 1.5 + k as f64)) < 1e-15);
        }
        let v = poly(&c, 0, &[0.0, 1.0]).op_euler();
        assert!(rel(v.block(0).unwrap().radial.coeffs()[1], bracket(p, 2.5) + p) < 1e-15);
    }

    #[test]
    fn dilation_rules() {
        let c = ctx();
        assert_eq!(poly(&c, 0, &[3.0]).op_dilation(1.0), poly(&c, 0, &[3.0]));
        let v = poly(&c, 1, &[0.0, 1.0]).op_dilation(1.0);
        assert!(rel(v.block(1).unwrap().radial.coeffs()[1], 0.5f64.powi(6)) < 1e-15);
        let e = poly(&c, 2, &[1.0, -2.0, 0.5]);
        let twice = e.op_dilation(0.5).op_dilation(0.5);
        assert!(twice.max_difference(&e.op_dilation(1.0)).unwrap() < 1e-15);
    }

    #[test]
    fn hamiltonian_of_constant() {
        let c = ctx();
        let v = poly(&c, 0, &[1.0]).op_hamiltonian(false);
        assert_eq!(v, poly(&c, 0, &[0.0, 0.5]));
    }

    #[test]
    fn tagged_laplacian_matches_expansion() {
        let c = ctx();
        for (g, barred) in [(Gauss::Small(1.3), false), (Gauss::Big(0.7), true)] {
            let e = FischerElement::new(&c).with_block(2, RadialSeries::new(vec![0.5, -1.0, 0.25], g).unwrap());
            let exact = if barred { e.op_laplace_bar() } else { e.op_laplace() };
            let a = exact.expanded(30);
            let b = e.expanded(31);
            let b = if barred { b.op_laplace_bar() } else { b.op_laplace() };
            let ca = a.block(2).unwrap().radial.coeffs();
            let cb = b.block(2).unwrap().radial.coeffs();
            for l in 0..28 {
                assert!((ca[l] - cb[l]).abs() < 1e-13 * ca[l].abs().max(cb[l].abs()).max(1e-300), "l={l}");
            }
        }
    }

    #[test]
    fn sl2_on_seeded_elements() {
        let c = ctx();
        for e in random_elements(&c, 42, 10) {
            let r = sl2_residuals(&e).unwrap();
            assert!(r.iter().all(|x| *x < 1e-12), "{r:?}");
        }
        let forced = poly(&c, 0, &[1.0]).op_norm_sq().op_laplace().scale(1.0 / (c.mu() * c.mu()));
        assert!(rel(forced.block(0).unwrap().radial.coeffs()[0], bracket(c.p(), 1.5)) < 1e-15);
    }

    #[test]
    fn forward_maps_laguerre_block_to_monomial_gaussian() {
        let c = ctx();
        for k in 0..3 {
            let nu = 0.5 + k as f64;
            for j in 0..3u32 {
                let l = laguerre_q2_coeffs(&c, j, nu).unwrap();
                let block = RadialSeries::new(dilate(&l, 1.0 / c.mu()), Gauss::Big(1.0)).unwrap();
                let e = FischerElement::new(&c).with_block(k, block);
                for sign in [Sign::Plus, Sign::Minus] {
                    let f = e.fourier_forward(sign).unwrap();
                    let b = f.block(k).unwrap();
                    assert_eq!(b.phase, sign.phase(k));
                    assert_eq!(b.radial.gauss(), Gauss::Small(1.0));
                    let want = hankel_c(&c, j, nu);
                    let got = b.radial.coeffs();
                    assert_eq!(got.len(), j as usize + 1);
                    assert!(rel(got[j as usize], want) < 1e-12);
                    let scale = (0..=j).map(|i| hankel_c(&c, i, nu)).fold(0.0, f64::max);
                    assert!(got[..j as usize].iter().all(|x| x.abs() < 1e-14 * scale), "{got:?} {scale}");
                }
            }
        }
        assert!(FischerElement::new(&c).fourier_forward(Sign::Plus).unwrap().is_zero());
    }

    #[test]
    fn transforms_need_matching_tags() {
        let c = ctx();
        let e = poly(&c, 0, &[1.0]);
        assert!(matches!(e.fourier_forward(Sign::Plus), Err(QError::TagMismatch(_))));
        assert!(matches!(e.fourier_inverse(Sign::Plus), Err(QError::TagMismatch(_))));
    }

    #[test]
    fn inverse_undoes_forward() {
        let c = ctx();
        let e = FischerElement::new(&c)
            .with_block(1, RadialSeries::new(vec![1.0, -0.5, 0.2], Gauss::Big(1.0)).unwrap())
            .with_block(3, RadialSeries::new(vec![0.3, 0.1], Gauss::Big(1.0)).unwrap());
        let back = e.fourier_forward(Sign::Plus).unwrap().fourier_inverse(Sign::Minus).unwrap();
        let d = back.max_difference(&e).unwrap();
        assert!(d < 1e-12 * e.max_coeff(), "{d:e}");
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        let c = ctx();
        let e = FischerElement::new(&c)
            .with_block(0, RadialSeries::new(vec![1.0, -0.4], Gauss::Big(1.0)).unwrap())
            .with_block(2, RadialSeries::new(vec![0.2, 0.3, -0.1], Gauss::Big(1.0)).unwrap());
        let ts = [0.2, 0.7, 1.5, 3.0, 6.0];
        let quad = e.fourier_forward_sampled(Sign::Plus, &ts).unwrap();
        let closed = e.fourier_forward(Sign::Plus).unwrap();
        assert!(quad.distance(&closed.sample(&ts).unwrap()).unwrap() < 1e-12);
        let rs = [0.1, 0.5, 1.0, 1.8];
        let back_closed = closed.fourier_inverse(Sign::Minus).unwrap();
        for gamma in [0.7, 1.3] {
            let back = closed.fourier_inverse_sampled(Sign::Minus, gamma, &rs).unwrap();
            assert!(back.distance(&back_closed.sample(&rs).unwrap()).unwrap() < 1e-12);
            assert!(back.distance(&e.sample(&rs).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let c = ctx();
        let e = FischerElement::new(&c)
            .with_block(0, RadialSeries::new(vec![0.1, 1.0 / 3.0], Gauss::Small(2.0)).unwrap())
            .with_phased_block(2, RadialSeries::new(vec![-7.25e-9], Gauss::Big(0.5)).unwrap(), Phase::quarter_turns(3))
            .with_block(5, RadialSeries::polynomial(vec![1.0, 0.0, 2.0]).unwrap());
        let text = e.to_json();
        assert!(text.contains("\"type\":\"e_small\""));
        assert_eq!(FischerElement::from_json(&text).unwrap(), e);
        assert!(FischerElement::from_json("{\"m\":3,\"q\":1.0,\"blocks\":[]}").is_err());
        assert!(FischerElement::from_json("{\"m\":3,\"q\":0.5,\"blocks\":[{\"k\":0,\"gauss\":{\"type\":\"e_big\"},\"coeffs\":[1]}]}").is_err());
    }

    #[test]
    fn empty_blocks_are_dropped() {
        let c = ctx();
        let e = poly(&c, 1, &[1.0, 2.0]);
        assert!(e.sub(&e).unwrap().is_zero());
        assert!(poly(&c, 0, &[0.0, 0.0]).is_zero());
    }

    proptest! {
        #[test]
        fn euler_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
            let c = ctx();
            let mut es = random_elements(&c, seed, 2).into_iter();
            let (x, y) = (es.next().unwrap(), es.next().unwrap());
            let lhs = x.scale(a).add(&y.scale(b)).unwrap().op_euler();
            let rhs = x.op_euler().scale(a).add(&y.op_euler().scale(b)).unwrap();
            prop_assert!(lhs.max_difference(&rhs).unwrap() <= 1e-13 * rhs.max_coeff().max(1.0));
        }

        #[test]
        fn phases_compose(a in -8i64..8, b in -8i64..8) {
            let p = Phase::quarter_turns(a).then(Phase::quarter_turns(b));
            prop_assert_eq!(p, Phase::quarter_turns(a + b));
            prop_assert!((p.unit().norm() - 1.0).abs() == 0.0);
        }
    }
}
