//! The finite and infinite q-Hankel transforms, their closed forms on
//! Laguerre blocks, the normalising constant `d`, and the braided-line
//! Fourier pair.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{invalid, QError, Result};
use crate::lattice::LatticeBlock;
use crate::qbessel::{BesselKernel, BesselOrder};
use crate::qcore::{
    bracket, exp_big_complex_in, exp_big_in, exp_small_complex_in, exp_small_in, geometric_grid,
    jackson_finite, jackson_finite_indexed, jackson_infinite_auto, jackson_infinite_fixed, pow, sup_relative,
    JacksonSpec, QContext,
};
use crate::qpolys::{hermite, laguerre_q2, laguerre_q2inv};

/// Order, scale and grid of a q-Hankel transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelSpec {
    pub nu: f64,
    /// `beta` for the finite transform, `gamma` for the infinite one.
    pub scale: f64,
    /// Fixed grid for the infinite transform; adaptive when `None`.
    pub grid: Option<JacksonSpec>,
}

impl HankelSpec {
    pub fn new(nu: f64, scale: f64) -> Result<Self> {
        BesselOrder::transform(nu)?;
        Self::auxiliary(nu, scale)
    }

    /// Transform parameters for the shifted orders (`nu - 1`) that appear in recurrence
    /// identities; only `nu > -2` is required.
    pub fn auxiliary(nu: f64, scale: f64) -> Result<Self> {
        if !(nu > -2.0 && nu.is_finite()) {
            return Err(invalid("nu", nu, "order must exceed -2"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale", scale, "must be positive"));
        }
        Ok(Self {
            nu,
            scale,
            grid: None,
        })
    }

    pub fn with_grid(mut self, grid: JacksonSpec) -> Self {
        self.scale = grid.gamma;
        self.grid = Some(grid);
        self
    }
}

/// Closed form attached to a radial function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KnownForm {
    /// `L_j^(order)(scale r^2/mu | q^2) E_{q^2}(-scale r^2/mu)`.
    LaguerreBlock { j: u32, order: f64, scale: f64 },
    /// `C_j t^(2j) e_{q^2}(-scale q^2 t^2/mu)` with `C_j` taken at `order`.
    MonomialGaussian { j: u32, order: f64, scale: f64 },
    Opaque,
}

/// `C_j = q^(2(j+1)(j+nu+1)) / ([j]_{q^2}! mu^j)`.
pub fn hankel_c(ctx: &QContext, j: u32, nu: f64) -> f64 {
    let jf = j as f64;
    pow(ctx.q(), 2.0 * (jf + 1.0) * (jf + nu + 1.0)) / (ctx.factorial2(j) * ctx.mu().powi(j as i32))
}

/// Value of a closed form times `amplitude`.
pub fn known_value(ctx: &QContext, form: KnownForm, amplitude: f64, x: f64) -> Result<Option<f64>> {
    let mu = ctx.mu();
    let p = ctx.p();
    Ok(match form {
        KnownForm::LaguerreBlock { j, order, scale } => {
            let u = scale * x * x / mu;
            Some(amplitude * laguerre_q2(ctx, j, order, u)? * exp_big_in(p, -u))
        }
        KnownForm::MonomialGaussian { j, order, scale } => {
            let g = exp_small_in(p, -scale * p * x * x / mu, ctx.policy())?;
            Some(amplitude * hankel_c(ctx, j, order) * x.powi(2 * j as i32) * g)
        }
        KnownForm::Opaque => None,
    })
}

/// Exact lattice values of a Laguerre block on its own lattice.
fn block_lattice(ctx: &QContext, form: KnownForm, amplitude: f64) -> Option<Lattice> {
    match form {
        KnownForm::LaguerreBlock { j, order, scale } => {
            let block = LatticeBlock::new(ctx.q(), j, order);
            Some(Lattice::new(scale, move |k| amplitude * block.value(k)))
        }
        _ => None,
    }
}

type Evaluator = dyn Fn(f64) -> Result<f64> + Send + Sync;
type NodeValues = dyn Fn(i64) -> f64 + Send + Sync;

/// Values of a function on the finite-transform lattice
/// `r_k = q^k sqrt(mu/((1-q^2) beta))`, indexed by `k`.
#[derive(Clone)]
pub struct Lattice {
    pub beta: f64,
    values: Arc<NodeValues>,
}

impl Lattice {
    pub fn new(beta: f64, values: impl Fn(i64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            beta,
            values: Arc::new(values),
        }
    }

    pub fn at(&self, k: i64) -> f64 {
        (self.values)(k)
    }

    fn matches(&self, beta: f64) -> bool {
        (self.beta - beta).abs() <= 4.0 * f64::EPSILON * beta
    }
}

/// Node `k` of the lattice with parameter `beta`.
pub fn lattice_node(ctx: &QContext, beta: f64, k: i64) -> f64 {
    (ctx.mu() / ((1.0 - ctx.p()) * beta)).sqrt() * pow(ctx.q(), k as f64)
}

/// A real function of one radial variable, optionally tagged with a closed
/// form and with exact values on a finite-transform lattice.
#[derive(Clone)]
pub struct RadialFunction {
    eval: Arc<Evaluator>,
    form: KnownForm,
    amplitude: f64,
    ctx: QContext,
    lattice: Option<Lattice>,
}

impl fmt::Debug for RadialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialFunction")
            .field("form", &self.form)
            .field("amplitude", &self.amplitude)
            .finish_non_exhaustive()
    }
}

const SAMPLE_GRID: [f64; 5] = [0.05, 0.3, 0.8, 1.4, 2.2];

impl RadialFunction {
    pub fn opaque(ctx: &QContext, f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            form: KnownForm::Opaque,
            amplitude: 1.0,
            ctx: *ctx,
            lattice: None,
        }
    }

    /// Function given by its closed form.
    pub fn known(ctx: &QContext, form: KnownForm, amplitude: f64) -> Self {
        let c = *ctx;
        Self {
            eval: Arc::new(move |x| Ok(known_value(&c, form, amplitude, x)?.unwrap_or(f64::NAN))),
            form,
            amplitude,
            ctx: *ctx,
            lattice: block_lattice(ctx, form, amplitude),
        }
    }

    /// Attaches a closed form to an evaluator after checking that both agree
    /// on a sample grid.
    pub fn with_known(
        ctx: &QContext,
        f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
        form: KnownForm,
        amplitude: f64,
    ) -> Result<Self> {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &x in &SAMPLE_GRID {
            let a = f(x)?;
            let b = known_value(ctx, form, amplitude, x)?.unwrap_or(a);
            worst = worst.max((a - b).abs());
            scale = scale.max(a.abs()).max(b.abs());
        }
        if worst > 1e-8 * scale.max(1e-300) {
            return Err(QError::Domain(format!(
                "evaluator disagrees with its closed form by {worst:e}"
            )));
        }
        Ok(Self {
            eval: Arc::new(f),
            form,
            amplitude,
            ctx: *ctx,
            lattice: block_lattice(ctx, form, amplitude),
        })
    }

    /// Attaches lattice values, replacing any present.
    pub fn with_lattice(mut self, lattice: Lattice) -> Self {
        self.lattice = Some(lattice);
        self
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    /// `r^2 f(r)`.
    pub fn times_square(&self) -> Self {
        let g = self.clone();
        let ctx = self.ctx;
        let mut out = Self::opaque(&ctx, move |r| Ok(r * r * g.eval(r)?));
        if let Some(l) = &self.lattice {
            let (l, beta) = (l.clone(), l.beta);
            out.lattice = Some(Lattice::new(beta, move |k| {
                lattice_node(&ctx, beta, k).powi(2) * l.at(k)
            }));
        }
        out
    }

    /// `(1/r) D^{1/q} f(r) = (f(r/q) - f(r)) / ((1/q - 1) r^2)`.
    pub fn inverse_derivative_over_r(&self) -> Self {
        let g = self.clone();
        let ctx = self.ctx;
        let q = ctx.q();
        let mut out = Self::opaque(&ctx, move |r| {
            Ok((g.eval(r / q)? - g.eval(r)?) / ((1.0 / q - 1.0) * r * r))
        });
        if let Some(l) = &self.lattice {
            let (l, beta) = (l.clone(), l.beta);
            out.lattice = Some(Lattice::new(beta, move |k| {
                let r = lattice_node(&ctx, beta, k);
                (l.at(k - 1) - l.at(k)) / ((1.0 / q - 1.0) * r * r)
            }));
        }
        out
    }

    /// `(1/t) D^q f(t) = (f(t) - f(q t)) / ((1 - q) t^2)`.
    pub fn derivative_over_r(&self) -> Self {
        let g = self.clone();
        let q = self.ctx.q();
        Self::opaque(&self.ctx, move |t| {
            Ok((g.eval(t)? - g.eval(q * t)?) / ((1.0 - q) * t * t))
        })
    }

    /// `t D^q f(t) = (f(t) - f(q t)) / (1 - q)`.
    pub fn euler_derivative(&self) -> Self {
        let g = self.clone();
        let q = self.ctx.q();
        Self::opaque(&self.ctx, move |t| Ok((g.eval(t)? - g.eval(q * t)?) / (1.0 - q)))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        (self.eval)(x)
    }

    pub fn form(&self) -> KnownForm {
        self.form
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Closed-form value, when a closed form is attached.
    pub fn closed_form(&self, x: f64) -> Result<Option<f64>> {
        known_value(&self.ctx, self.form, self.amplitude, x)
    }

    /// Same evaluator, with results cached per argument.
    fn memoized(self) -> Self {
        let cache: Arc<Mutex<HashMap<u64, f64>>> = Arc::default();
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |x| {
                let key = x.to_bits();
                if let Some(v) = cache.lock().expect("cache poisoned").get(&key) {
                    return Ok(*v);
                }
                let v = inner(x)?;
                cache.lock().expect("cache poisoned").insert(key, v);
                Ok(v)
            }),
            ..self
        }
    }
}

/// Runs a Jackson sum whose integrand may fail, keeping the first error.
pub(crate) fn guarded<T>(
    run: impl FnOnce(&dyn Fn(i64, f64) -> f64) -> Result<T>,
    integrand: impl Fn(i64, f64) -> Result<f64>,
) -> Result<T> {
    let err: RefCell<Option<QError>> = RefCell::new(None);
    let f = |k: i64, t: f64| match integrand(k, t) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let out = run(&f);
    match err.into_inner() {
        Some(e) => Err(e),
        None => out,
    }
}

type NodeFn = dyn Fn(i64, f64) -> Result<f64> + Send + Sync;

/// Integrand values of `f` on the grid of a transform.
///
/// Lattice values matching the finite grid come first, then an attached
/// closed form, then the evaluator.
fn nodes(f: &RadialFunction, finite_scale: Option<f64>) -> Arc<NodeFn> {
    if let (Some(l), Some(beta)) = (f.lattice(), finite_scale) {
        if l.matches(beta) {
            let l = l.clone();
            return Arc::new(move |k, _| Ok(l.at(k)));
        }
    }
    let g = f.clone();
    match f.form() {
        KnownForm::Opaque => Arc::new(move |_, x| g.eval(x)),
        _ => Arc::new(move |_, x| Ok(g.closed_form(x)?.unwrap_or(f64::NAN))),
    }
}

/// Finite transform of `f` at one point `t`.
pub fn hankel1_at(ctx: &QContext, spec: &HankelSpec, f: &RadialFunction, t: f64) -> Result<f64> {
    let kernel = BesselKernel::new(ctx, spec.nu);
    hankel1_with(ctx, spec, &kernel, &*nodes(f, Some(spec.scale)), t)
}

fn hankel1_with(
    ctx: &QContext,
    spec: &HankelSpec,
    kernel: &BesselKernel,
    f: &NodeFn,
    t: f64,
) -> Result<f64> {
    let q = ctx.q();
    let c = (1.0 + q) / ctx.mu();
    let nu = spec.nu;
    let upper = (ctx.mu() / ((1.0 - ctx.p()) * spec.scale)).sqrt();
    let sum = guarded(
        |g| jackson_finite_indexed(q, upper, g, ctx.policy()),
        |k, r| {
            let v = f(k, r)?;
            if v == 0.0 {
                return Ok(0.0);
            }
            Ok(kernel.j1(c * r * t)? * r.powf(2.0 * nu + 1.0) * v)
        },
    )?;
    Ok(c * c.powf(nu) * sum)
}

/// Infinite transform of `f` at one point `r`.
pub fn hankel2_at(ctx: &QContext, spec: &HankelSpec, f: &RadialFunction, r: f64) -> Result<f64> {
    let kernel = BesselKernel::new(ctx, spec.nu);
    hankel2_with(ctx, spec, &kernel, &*nodes(f, None), r)
}

fn hankel2_with(
    ctx: &QContext,
    spec: &HankelSpec,
    kernel: &BesselKernel,
    f: &NodeFn,
    r: f64,
) -> Result<f64> {
    let q = ctx.q();
    let c = q * (1.0 + q) / ctx.mu();
    let nu = spec.nu;
    let integrand = |k: i64, t: f64| -> Result<f64> {
        let v = f(k, t)?;
        if v == 0.0 {
            return Ok(0.0);
        }
        Ok(kernel.j2(c * r * t)? * t.powf(2.0 * nu + 1.0) * v)
    };
    let sum = match spec.grid {
        Some(grid) => guarded(
            |g| jackson_infinite_fixed(q, &grid, g, ctx.policy()),
            integrand,
        )?,
        None => guarded(
            |g| jackson_infinite_auto(q, spec.scale, g, ctx.policy()),
            integrand,
        )?,
    };
    Ok((1.0 + q) / ctx.mu() * c.powf(nu) * sum.value)
}

/// The finite transform with parameter `beta = spec.scale`.
///
/// A Laguerre block of the same order maps to a monomial Gaussian, and that
/// closed form is attached to the result.
pub fn hankel1(ctx: &QContext, spec: &HankelSpec, f: &RadialFunction) -> Result<RadialFunction> {
    let beta = spec.scale;
    if !(beta > 0.0) {
        return Err(invalid("beta", beta, "must be positive"));
    }
    let (form, amplitude) = match f.form() {
        KnownForm::LaguerreBlock { j, order, scale }
            if order == spec.nu && scale == beta =>
        {
            (
                KnownForm::MonomialGaussian {
                    j,
                    order,
                    scale: 1.0 / beta,
                },
                f.amplitude() * beta.powf(-(order + 1.0 + j as f64)),
            )
        }
        _ => (KnownForm::Opaque, 1.0),
    };
    let c = *ctx;
    let s = *spec;
    let kernel = BesselKernel::new(ctx, spec.nu);
    let input = nodes(f, Some(beta));
    let out = RadialFunction {
        eval: Arc::new(move |t| hankel1_with(&c, &s, &kernel, &*input, t)),
        form,
        amplitude,
        ctx: *ctx,
        lattice: block_lattice(ctx, form, amplitude),
    };
    Ok(out.memoized())
}

/// The infinite transform with grid anchor `gamma = spec.scale`.
///
/// A monomial Gaussian of the same order maps to `d` times a Laguerre block.
pub fn hankel2(ctx: &QContext, spec: &HankelSpec, f: &RadialFunction) -> Result<RadialFunction> {
    let gamma = spec.scale;
    if !(gamma > 0.0) {
        return Err(invalid("gamma", gamma, "must be positive"));
    }
    let (form, amplitude) = match f.form() {
        KnownForm::MonomialGaussian { j, order, scale } if order == spec.nu => {
            let d = d_const(ctx, scale.sqrt() * gamma / ctx.mu().sqrt(), order)?;
            (
                KnownForm::LaguerreBlock {
                    j,
                    order,
                    scale: 1.0 / scale,
                },
                f.amplitude() * d * scale.powf(-(order + 1.0 + j as f64)),
            )
        }
        _ => (KnownForm::Opaque, 1.0),
    };
    let c = *ctx;
    let s = *spec;
    let kernel = BesselKernel::new(ctx, spec.nu);
    let input = nodes(f, None);
    let out = RadialFunction {
        eval: Arc::new(move |r| hankel2_with(&c, &s, &kernel, &*input, r)),
        form,
        amplitude,
        ctx: *ctx,
        lattice: block_lattice(ctx, form, amplitude),
    };
    Ok(out.memoized())
}

/// `d(lambda, alpha) = q^(alpha(alpha+1)) / Gamma_{q^2}(alpha+1)
///  * int_0^{lambda^2.inf} u^alpha e_{q^2}(-u) d_{q^2}u`.
pub fn d_const(ctx: &QContext, lambda: f64, alpha: f64) -> Result<f64> {
    if !(alpha > -1.0) {
        return Err(invalid("alpha", alpha, "d is defined for alpha > -1"));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda", lambda, "must be positive"));
    }
    let p = ctx.p();
    let policy = *ctx.policy();
    let sum = guarded(
        |g| jackson_infinite_auto(p, lambda * lambda, g, &policy),
        |_, u| Ok(u.powf(alpha) * exp_small_in(p, -u, &policy)?),
    )?;
    Ok(pow(ctx.q(), alpha * (alpha + 1.0)) * ctx.rgamma2(alpha + 1.0) * sum.value)
}

/// `d` on an explicitly given base `q^2` grid, used as a refinement oracle.
pub fn d_const_on_grid(ctx: &QContext, lambda: f64, alpha: f64, k_lo: i64, k_hi: i64) -> Result<f64> {
    let p = ctx.p();
    let policy = *ctx.policy();
    let grid = JacksonSpec::new(lambda * lambda, k_lo, k_hi)?;
    let sum = guarded(
        |g| jackson_infinite_fixed(p, &grid, g, &policy),
        |_, u| Ok(u.powf(alpha) * exp_small_in(p, -u, &policy)?),
    )?;
    Ok(pow(ctx.q(), alpha * (alpha + 1.0)) * ctx.rgamma2(alpha + 1.0) * sum.value)
}

fn sampled(grid: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
    grid.iter().map(|&x| f(x)).collect()
}

/// Sup-norm distance of the two sides of an identity, each a sum of sampled
/// terms, relative to the largest term.
fn identity_residual(lhs: &[&[f64]], rhs: &[&[f64]]) -> f64 {
    let n = lhs[0].len();
    let total = |side: &[&[f64]], i: usize| side.iter().map(|v| v[i]).sum::<f64>();
    let diff = (0..n)
        .map(|i| (total(lhs, i) - total(rhs, i)).abs())
        .fold(0.0, f64::max);
    let scale = lhs
        .iter()
        .chain(rhs)
        .flat_map(|v| v.iter())
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn scaled(a: &[f64], w: impl Fn(usize) -> f64) -> Vec<f64> {
    a.iter().enumerate().map(|(i, x)| w(i) * x).collect()
}

/// Residuals of the operational identities of both transforms, applied to
/// a Laguerre block (first transform) and a monomial Gaussian (second) of
/// index `j` and order `nu`, with `beta = gamma = 1`.
pub fn operational_residuals(ctx: &QContext, nu: f64, j: u32) -> Result<Vec<(&'static str, f64)>> {
    let q = ctx.q();
    let mu = ctx.mu();
    let p = ctx.p();
    let c = (1.0 + q) / mu;
    let mut out = Vec::new();

    let f = RadialFunction::known(ctx, KnownForm::LaguerreBlock { j, order: nu, scale: 1.0 }, 1.0);
    let ts = geometric_grid(0.1, 8.0, 12);
    let bar = |order: f64, g: &RadialFunction, s: f64| -> Result<Vec<f64>> {
        let spec = HankelSpec::auxiliary(order, 1.0)?;
        sampled(&ts, |t| hankel1_at(ctx, &spec, g, s * t))
    };
    let h = bar(nu, &f, 1.0)?;
    let h_q = bar(nu, &f, q)?;
    let h_up = bar(nu + 1.0, &f, 1.0)?;
    let h_dn = bar(nu - 1.0, &f, 1.0)?;
    let a = scaled(&h_up, |i| ts[i] * ts[i]);
    let b = bar(nu - 1.0, &f.times_square(), 1.0)?;
    let rhs = scaled(&h_q, |_| mu * bracket(p, nu));
    out.push(("hbar_shift", identity_residual(&[&a, &b], &[&rhs])));
    let lhs: Vec<f64> = (0..ts.len()).map(|i| (h[i] - h_q[i]) / ((1.0 - q) * ts[i])).collect();
    let rhs = scaled(&h_up, |i| -c * ts[i]);
    out.push(("hbar_difference", identity_residual(&[&lhs], &[&rhs])));
    let lhs = bar(nu, &f.inverse_derivative_over_r(), 1.0)?;
    let edge = if nu == 0.0 { f.eval(0.0)? } else { 0.0 };
    let rhs: Vec<f64> = h_dn.iter().map(|v| -q * c * (v + edge)).collect();
    out.push(("hbar_derivative", identity_residual(&[&lhs], &[&rhs])));

    let g = RadialFunction::known(ctx, KnownForm::MonomialGaussian { j, order: nu, scale: 1.0 }, 1.0);
    let rs = geometric_grid(0.05, 3.0, 12);
    let inf = |order: f64, g: &RadialFunction, s: f64| -> Result<Vec<f64>> {
        let spec = HankelSpec::auxiliary(order, 1.0)?;
        sampled(&rs, |r| hankel2_at(ctx, &spec, g, s * r))
    };
    let k = inf(nu, &g, 1.0)?;
    let k_q = inf(nu, &g, 1.0 / q)?;
    let k_up = inf(nu + 1.0, &g, 1.0)?;
    let k_dn = inf(nu - 1.0, &g, 1.0)?;
    let a = scaled(&k_up, |i| rs[i] * rs[i]);
    let b = inf(nu - 1.0, &g.times_square(), 1.0)?;
    let rhs = scaled(&k_q, |_| mu * bracket(p, nu) * pow(q, -2.0 * nu));
    out.push(("h_shift", identity_residual(&[&a, &b], &[&rhs])));
    let lhs: Vec<f64> = (0..rs.len()).map(|i| (k_q[i] - k[i]) / ((1.0 / q - 1.0) * rs[i])).collect();
    let rhs = scaled(&k_up, |i| -q * c * rs[i]);
    out.push(("h_difference", identity_residual(&[&lhs], &[&rhs])));
    let lhs = inf(nu, &g.derivative_over_r(), 1.0)?;
    let edge = if nu == 0.0 { g.eval(0.0)? } else { 0.0 };
    let rhs: Vec<f64> = k_dn.iter().map(|v| -c * (v + edge)).collect();
    out.push(("h_derivative", identity_residual(&[&lhs], &[&rhs])));
    let lhs = inf(nu - 1.0, &g.euler_derivative(), 1.0)?;
    let a = scaled(&k, |i| c * rs[i] * rs[i]);
    let b = scaled(&inf(nu - 1.0, &g, 1.0 / q)?, |_| -bracket(q, 2.0 * nu) * pow(q, -2.0 * nu));
    out.push(("h_euler", identity_residual(&[&lhs], &[&a, &b])));
    Ok(out)
}

/// Both compositions of the transforms on blocks of index `j`, divided by
/// `d`: `H(Hbar f) / d - f` for a Laguerre block `f` with parameter `beta`
/// and `Hbar(H g) / d - g` for a monomial Gaussian `g` with scale `1/beta`.
///
/// The inner transform is checked against its closed form separately; the
/// outer one integrates that closed form.
pub fn inversion_residuals(ctx: &QContext, nu: f64, j: u32, beta: f64, gamma: f64) -> Result<[f64; 2]> {
    let mu = ctx.mu();
    let d = d_const(ctx, gamma / (beta * mu).sqrt(), nu)?;

    let f = RadialFunction::known(ctx, KnownForm::LaguerreBlock { j, order: nu, scale: beta }, 1.0);
    let inner = hankel1(ctx, &HankelSpec::new(nu, beta)?, &f)?;
    let inner = RadialFunction::known(ctx, inner.form(), inner.amplitude());
    let outer = hankel2(ctx, &HankelSpec::new(nu, gamma)?, &inner)?;
    let radius = lattice_node(ctx, beta, 0);
    let rs = geometric_grid(0.02 * radius, radius, 14);
    let back = sampled(&rs, |r| Ok(outer.eval(r)? / d))?;
    let first = sup_relative(&back, &sampled(&rs, |r| f.eval(r))?);

    let g = RadialFunction::known(ctx, KnownForm::MonomialGaussian { j, order: nu, scale: 1.0 / beta }, 1.0);
    let inner = hankel2(ctx, &HankelSpec::new(nu, gamma)?, &g)?;
    let outer = hankel1(ctx, &HankelSpec::new(nu, beta)?, &inner)?;
    let ts: Vec<f64> = geometric_grid(0.1, 8.0, 14).iter().map(|t| t / beta.sqrt()).collect();
    let back = sampled(&ts, |t| Ok(outer.eval(t)? / d))?;
    let second = sup_relative(&back, &sampled(&ts, |t| g.eval(t))?);
    Ok([first, second])
}

/// Closed-form residuals of the finite and infinite transforms of index-`j`
/// blocks: the quadrature output against the attached image.
pub fn closed_form_residuals(ctx: &QContext, nu: f64, j: u32, beta: f64, gamma: f64) -> Result<[f64; 2]> {
    let f = RadialFunction::known(ctx, KnownForm::LaguerreBlock { j, order: nu, scale: beta }, 1.0);
    let h = hankel1(ctx, &HankelSpec::new(nu, beta)?, &f)?;
    let ts: Vec<f64> = geometric_grid(0.1, 30.0, 24).iter().map(|t| t / beta.sqrt()).collect();
    let first = sup_relative(
        &sampled(&ts, |t| h.eval(t))?,
        &sampled(&ts, |t| Ok(h.closed_form(t)?.unwrap_or(f64::NAN)))?,
    );
    let g = RadialFunction::known(ctx, KnownForm::MonomialGaussian { j, order: nu, scale: 1.0 / beta }, 1.0);
    let h = hankel2(ctx, &HankelSpec::new(nu, gamma)?, &g)?;
    let rs = geometric_grid(0.02 * lattice_node(ctx, beta, 0), 3.0 * lattice_node(ctx, beta, 0), 16);
    let second = sup_relative(
        &sampled(&rs, |r| h.eval(r))?,
        &sampled(&rs, |r| Ok(h.closed_form(r)?.unwrap_or(f64::NAN)))?,
    );
    Ok([first, second])
}

/// Residuals of the two one-dimensional pair identities behind the closed
/// forms, with `1+q` in place of `mu`: the finite integral of a Laguerre
/// block and the infinite integral of a base `q^(-2)` Laguerre block.
pub fn pair_identity_residuals(ctx: &QContext, nu: f64, j: u32, gamma: f64) -> Result<[f64; 2]> {
    let q = ctx.q();
    let p = ctx.p();
    let policy = *ctx.policy();
    let kernel = BesselKernel::new(ctx, nu);
    let jf = j as f64;
    let fact = ctx.factorial2(j) * (1.0 + q).powi(j as i32);

    let block = LatticeBlock::new(q, j, nu);
    let upper = 1.0 / (1.0 - q).sqrt();
    let ts = geometric_grid(0.1, 12.0, 16);
    let lhs = sampled(&ts, |t| {
        guarded(
            |g| jackson_finite_indexed(q, upper, g, &policy),
            |k, r| {
                let v = block.value(k);
                if v == 0.0 {
                    return Ok(0.0);
                }
                Ok(kernel.j1(r * t)? * r.powf(2.0 * nu + 1.0) * v)
            },
        )
    })?;
    let rhs = sampled(&ts, |t| {
        Ok(pow(q, 2.0 * (jf + 1.0) * (jf + nu + 1.0)) / fact
            * t.powi(2 * j as i32)
            * exp_small_in(p, -p * t * t / (1.0 + q), &policy)?)
    })?;
    let first = sup_relative(&lhs, &rhs);

    let d = d_const(ctx, gamma / (1.0 + q).sqrt(), nu)?;
    let rs = geometric_grid(0.05, 3.0, 14);
    let lhs = sampled(&rs, |r| {
        Ok(guarded(
            |g| jackson_infinite_auto(q, gamma, g, &policy),
            |_, t| {
                let u = p * t * t / (1.0 + q);
                let e = exp_small_in(p, -u, &policy)?;
                if e == 0.0 {
                    return Ok(0.0);
                }
                Ok(pow(q, nu) * kernel.j2(q * r * t)? * t.powf(2.0 * nu + 1.0) * laguerre_q2inv(ctx, j, nu, u)? * e)
            },
        )?
        .value)
    })?;
    let rhs = sampled(&rs, |r| {
        Ok(d * pow(q, -(jf + 1.0) * (jf + 2.0 * nu + 2.0)) / fact
            * r.powi(2 * j as i32)
            * exp_big_in(p, -r * r / (1.0 + q)))
    })?;
    Ok([first, sup_relative(&lhs, &rhs)])
}

/// Direction of the braided-line transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// The one-dimensional Fourier pair on the braided line.
///
/// The forward transform integrates over the finite interval
/// `[-1/sqrt(1-q), 1/sqrt(1-q)]` against `e_q(-ixy)`; the inverse integrates
/// over the infinite grid anchored at `delta` against `E_q(iqyx)`.
#[derive(Debug, Clone, Copy)]
pub struct BraidedLine {
    ctx: QContext,
    delta: f64,
}

pub type ComplexFn<'a> = dyn Fn(f64) -> Complex64 + Sync + 'a;

impl BraidedLine {
    pub fn new(ctx: &QContext, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("delta", delta, "must be positive"));
        }
        Ok(Self { ctx: *ctx, delta })
    }

    fn half_width(&self) -> f64 {
        1.0 / (1.0 - self.ctx.q()).sqrt()
    }

    pub fn forward(&self, f: &ComplexFn<'_>, y: f64) -> Result<Complex64> {
        let q = self.ctx.q();
        let policy = *self.ctx.policy();
        let a = self.half_width();
        let norm = 0.5 * self.ctx.rgamma2(0.5);
        let mut out = [0.0; 2];
        for (part, slot) in out.iter_mut().enumerate() {
            *slot = guarded(
                |g| jackson_finite(q, a, |x| g(0, x), &policy),
                |_, x| {
                    let z = Complex64::new(0.0, x * y);
                    let v = f(x) * exp_small_complex_in(q, -z, &policy)?
                        + f(-x) * exp_small_complex_in(q, z, &policy)?;
                    Ok(if part == 0 { v.re } else { v.im })
                },
            )?;
        }
        Ok(norm * Complex64::new(out[0], out[1]))
    }

    /// Inverse transform without the constant `C_delta`.
    pub fn inverse(&self, g: &ComplexFn<'_>, x: f64) -> Result<Complex64> {
        let q = self.ctx.q();
        let policy = *self.ctx.policy();
        let mut out = [0.0; 2];
        for (part, slot) in out.iter_mut().enumerate() {
            *slot = guarded(
                |h| jackson_infinite_auto(q, self.delta, h, &policy),
                |_, y| {
                    let (gp, gm) = (g(y), g(-y));
                    if gp == Complex64::new(0.0, 0.0) && gm == Complex64::new(0.0, 0.0) {
                        return Ok(0.0);
                    }
                    let z = Complex64::new(0.0, q * y * x);
                    let v = gp * exp_big_complex_in(q, z) + gm * exp_big_complex_in(q, -z);
                    Ok(if part == 0 { v.re } else { v.im })
                },
            )?
            .value;
        }
        Ok(Complex64::new(out[0], out[1]))
    }

    /// `H_k(x/sqrt(1+q)) E_{q^2}(-x^2/(1+q))`.
    pub fn hermite_gaussian(&self, k: u32, x: f64) -> f64 {
        let q = self.ctx.q();
        hermite(&self.ctx, k, x / (1.0 + q).sqrt()) * exp_big_in(self.ctx.p(), -x * x / (1.0 + q))
    }

    /// `y^k e_{q^2}(-q^2 y^2/(1+q))`.
    pub fn monomial_gaussian(&self, k: u32, y: f64) -> Result<f64> {
        let q = self.ctx.q();
        let p = self.ctx.p();
        Ok(y.powi(k as i32) * exp_small_in(p, -p * y * y / (1.0 + q), self.ctx.policy())?)
    }

    /// Closed-form forward image of [`Self::hermite_gaussian`].
    pub fn forward_image(&self, k: u32, y: f64) -> Result<Complex64> {
        let q = self.ctx.q();
        let kf = k as f64;
        let c = (q + 1.0).powf((kf - 1.0) / 2.0) * pow(q, (kf + 1.0) * (kf + 2.0) / 2.0);
        Ok(Complex64::i().powu(k).inv() * c * self.monomial_gaussian(k, y)?)
    }

    /// Closed-form inverse image of [`Self::monomial_gaussian`], without `C_delta`.
    pub fn inverse_image(&self, k: u32, x: f64) -> Complex64 {
        let q = self.ctx.q();
        let kf = k as f64;
        let c = 1.0 / (pow(q, (kf + 1.0) * (kf + 2.0) / 2.0) * (1.0 + q).powf((kf - 1.0) / 2.0));
        Complex64::i().powu(k) * c * self.hermite_gaussian(k, x)
    }

    /// `C_delta` from the `k = 0` pair evaluated at `x = 0`.
    pub fn c_delta(&self) -> Result<f64> {
        let g = |y: f64| Complex64::new(self.monomial_gaussian(0, y).unwrap_or(f64::NAN), 0.0);
        let v = self.inverse(&g, 0.0)?;
        Ok(v.re / self.inverse_image(0, 0.0).re)
    }
}

/// Braided-line transform of `f` in the given direction, as a function.
///
/// The inverse direction includes the `1/C_delta` normalisation with `delta = 1`.
pub fn fourier_braided_line<'a>(
    ctx: &QContext,
    f: &'a ComplexFn<'a>,
    direction: Direction,
) -> Result<impl Fn(f64) -> Result<Complex64> + 'a> {
    let line = BraidedLine::new(ctx, 1.0)?;
    let norm = match direction {
        Direction::Forward => 1.0,
        Direction::Inverse => 1.0 / line.c_delta()?,
    };
    Ok(move |x: f64| match direction {
        Direction::Forward => line.forward(f, x),
        Direction::Inverse => Ok(norm * line.inverse(f, x)?),
    })
}

/// Braided-line residuals for index `k`: forward quadrature against its
/// closed form, inverse quadrature against its closed form after `C_delta`,
/// and the inverse applied to the forward closed form against the input.
pub fn braided_residuals(ctx: &QContext, k: u32) -> Result<[f64; 3]> {
    let line = BraidedLine::new(ctx, 1.0)?;
    let cd = line.c_delta()?;
    let sup = |a: &[Complex64], b: &[Complex64]| {
        let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let scale = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
        if diff == 0.0 {
            0.0
        } else {
            diff / scale
        }
    };
    let ys = [0.0, 0.25, 0.5, 1.0, 1.7, 2.5, 4.0];
    let input = |x: f64| Complex64::new(line.hermite_gaussian(k, x), 0.0);
    let fwd: Vec<Complex64> = ys.iter().map(|&y| line.forward(&input, y)).collect::<Result<_>>()?;
    let image: Vec<Complex64> = ys.iter().map(|&y| line.forward_image(k, y)).collect::<Result<_>>()?;
    let xs = [0.0, 0.3, 0.7, 1.2, 2.0, 3.0];
    let mono = |y: f64| Complex64::new(line.monomial_gaussian(k, y).unwrap_or(f64::NAN), 0.0);
    let inv: Vec<Complex64> = xs.iter().map(|&x| Ok(line.inverse(&mono, x)? / cd)).collect::<Result<_>>()?;
    let inv_image: Vec<Complex64> = xs.iter().map(|&x| line.inverse_image(k, x)).collect();
    let closed = |y: f64| line.forward_image(k, y).unwrap_or(Complex64::new(f64::NAN, 0.0));
    let back: Vec<Complex64> = xs.iter().map(|&x| Ok(line.inverse(&closed, x)? / cd)).collect::<Result<_>>()?;
    let start: Vec<Complex64> = xs.iter().map(|&x| input(x)).collect();
    Ok([sup(&fwd, &image), sup(&inv, &inv_image), sup(&back, &start)])
}
