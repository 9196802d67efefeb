//! Scalar q-calculus: brackets, factorials, Pochhammer symbols, the base q^2
//! Gamma function, q-exponentials, the q-derivative and Jackson integrals.
//!
//! Most kernels come in two flavours. The `*_in` functions take an explicit
//! base `b` and a [`SeriesPolicy`]; the unsuffixed functions take a
//! [`QContext`] and work in base `q` (or `q^2` where the name says so).

use num_complex::Complex64;

use crate::error::{invalid, QError, Result};

/// Truncation rules shared by every series and Jackson sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPolicy {
    pub rel_tol: f64,
    pub max_terms: usize,
    pub consecutive_small: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            max_terms: 500,
            consecutive_small: 3,
        }
    }
}

impl SeriesPolicy {
    pub fn new(rel_tol: f64, max_terms: usize, consecutive_small: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(invalid("rel_tol", rel_tol, "must be positive"));
        }
        if max_terms == 0 {
            return Err(invalid("max_terms", 0.0, "must be at least 1"));
        }
        if consecutive_small == 0 {
            return Err(invalid("consecutive_small", 0.0, "must be at least 1"));
        }
        Ok(Self {
            rel_tol,
            max_terms,
            consecutive_small,
        })
    }
}

/// Deformation parameter, dimension and the derived constant `mu = 1 + q^(2-m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QContext {
    q: f64,
    m: u32,
    mu: f64,
    poch_p: f64,
    policy: SeriesPolicy,
}

impl QContext {
    pub fn new(q: f64, m: u32) -> Result<Self> {
        Self::with_policy(q, m, SeriesPolicy::default())
    }

    pub fn with_policy(q: f64, m: u32, policy: SeriesPolicy) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid("q", q, "must lie in the open interval (0, 1)"));
        }
        if m == 0 {
            return Err(invalid("m", 0.0, "dimension must be at least 1"));
        }
        let mu = 1.0 + q.powi(2 - m as i32);
        let p = q * q;
        Ok(Self {
            q,
            m,
            mu,
            poch_p: pochhammer_inf(p, p),
            policy,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The squared base `q^2`, used by all Gamma functions and Gaussians.
    pub fn p(&self) -> f64 {
        self.q * self.q
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn half_m(&self) -> f64 {
        self.m as f64 / 2.0
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `1 + q^(m-2)`, the constant of the barred calculus.
    pub fn mu_bar(&self) -> f64 {
        1.0 + self.q.powi(self.m as i32 - 2)
    }

    pub fn policy(&self) -> &SeriesPolicy {
        &self.policy
    }

    pub fn with_series_policy(mut self, policy: SeriesPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_dimension(&self, m: u32) -> Result<Self> {
        Self::with_policy(self.q, m, self.policy)
    }

    /// `[u]_{q^2}`.
    pub fn bracket2(&self, u: f64) -> f64 {
        bracket(self.p(), u)
    }

    /// `[n]_{q^2}!`.
    pub fn factorial2(&self, n: u32) -> f64 {
        factorial(self.p(), n)
    }

    /// `1/Gamma_{q^2}(t)`, entire in `t`.
    pub fn rgamma2(&self, t: f64) -> f64 {
        let p = self.p();
        pochhammer_inf(p, p.powf(t)) / (self.poch_p * (1.0 - p).powf(1.0 - t))
    }

    /// `Gamma_{q^2}(t)`; finite away from the non-positive integers.
    pub fn gamma2(&self, t: f64) -> Result<f64> {
        let r = self.rgamma2(t);
        if r == 0.0 || (t <= 0.0 && t.fract() == 0.0) {
            return Err(QError::Domain(format!("Gamma_q2 has a pole at {t}")));
        }
        Ok(1.0 / r)
    }
}

/// `b^u` with exact powers for integer exponents.
pub fn pow(b: f64, u: f64) -> f64 {
    if u.fract() == 0.0 && u.abs() < 1024.0 {
        b.powi(u as i32)
    } else {
        b.powf(u)
    }
}

/// `[u]_b = (b^u - 1)/(b - 1)`.
pub fn bracket(b: f64, u: f64) -> f64 {
    if u.fract() == 0.0 && u.abs() < 1024.0 {
        (b.powi(u as i32) - 1.0) / (b - 1.0)
    } else {
        (u * b.ln()).exp_m1() / (b - 1.0)
    }
}

/// `[n]_b! = [1]_b [2]_b ... [n]_b`.
pub fn factorial(b: f64, n: u32) -> f64 {
    (1..=n).map(|i| bracket(b, i as f64)).product()
}

/// Gaussian binomial coefficient `[n]_b! / ([k]_b! [n-k]_b!)`.
pub fn binomial(b: f64, n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(b, n) / (factorial(b, k) * factorial(b, n - k))
}

/// Finite Pochhammer symbol `(u; b)_k`.
pub fn pochhammer(b: f64, u: f64, k: usize) -> f64 {
    let mut r = 1.0;
    let mut f = u;
    for _ in 0..k {
        r *= 1.0 - f;
        f *= b;
    }
    r
}

/// `(u; b)_inf` for `0 < b < 1`, stopped once factors equal 1 to working precision.
pub fn pochhammer_inf(b: f64, u: f64) -> f64 {
    let mut r = 1.0;
    let mut f = u;
    while f.abs() > 1e-17 {
        r *= 1.0 - f;
        f *= b;
    }
    r
}

/// Length argument of [`q_pochhammer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Length {
    Finite(usize),
    Infinite,
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for Compensated {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Compensated::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sum of a compensated iterator.
pub fn sum_compensated<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<Compensated>().value()
}

/// Sums a series term by term under `policy`.
///
/// `term(j)` returns the `j`-th term. Summation stops after
/// `consecutive_small` successive terms with `|term| <= rel_tol * max(1, |S|)`.
pub fn sum_series(policy: &SeriesPolicy, mut term: impl FnMut(usize) -> f64) -> Result<f64> {
    let mut acc = Compensated::new();
    let mut small = 0;
    let mut last = f64::NAN;
    for j in 0..policy.max_terms {
        let t = term(j);
        if !t.is_finite() {
            return Err(QError::Truncation { terms: j, last: t });
        }
        acc.add(t);
        last = t;
        if t.abs() <= policy.rel_tol * acc.value().abs().max(1.0) {
            small += 1;
            if small >= policy.consecutive_small {
                return Ok(acc.value());
            }
        } else {
            small = 0;
        }
    }
    Err(QError::Truncation {
        terms: policy.max_terms,
        last,
    })
}

/// `E_b(t) = sum b^(j(j-1)/2) t^j / [j]_b!`, evaluated as `(-(1-b)t; b)_inf`.
///
/// Arguments within a few ulps of a zero `-b^(-k)/(1-b)` return exactly zero,
/// so Jackson grids built on those points see the zeros.
pub fn exp_big_in(b: f64, t: f64) -> f64 {
    if let Some(k) = pole_index(b, -t) {
        if ((1.0 - b) * -t * b.powi(k as i32) - 1.0).abs() < 16.0 * f64::EPSILON {
            return 0.0;
        }
    }
    pochhammer_inf(b, -(1.0 - b) * t)
}

/// `E_b(t)` by its power series.
pub fn exp_big_series_in(b: f64, t: f64, policy: &SeriesPolicy) -> Result<f64> {
    let mut term = 1.0;
    sum_series(policy, |j| {
        if j > 0 {
            term *= t * pow(b, (j - 1) as f64) / bracket(b, j as f64);
        }
        term
    })
}

/// Index `k >= 0` with `t = b^(-k)/(1-b)` if `t` is such a point.
fn pole_index(b: f64, t: f64) -> Option<i64> {
    let x = t * (1.0 - b);
    if x <= 0.0 {
        return None;
    }
    let k = -x.ln() / b.ln();
    let r = k.round();
    (r >= 0.0 && (k - r).abs() < 1e-11 * r.max(1.0)).then_some(r as i64)
}

/// `e_b(t)`: the series inside half its disc of convergence, `1/E_b(-t)` elsewhere.
pub fn exp_small_in(b: f64, t: f64, policy: &SeriesPolicy) -> Result<f64> {
    if t.abs() * (1.0 - b) < 0.5 {
        let mut term = 1.0;
        sum_series(policy, |j| {
            if j > 0 {
                term *= t / bracket(b, j as f64);
            }
            term
        })
    } else {
        if pole_index(b, t).is_some() {
            return Err(QError::Pole { t });
        }
        Ok(1.0 / exp_big_in(b, -t))
    }
}

/// `E_b(z)` for complex `z` by the product form.
pub fn exp_big_complex_in(b: f64, z: Complex64) -> Complex64 {
    let mut r = Complex64::new(1.0, 0.0);
    let mut f = z * (1.0 - b);
    while f.norm() > 1e-17 {
        r *= 1.0 + f;
        f *= b;
    }
    r
}

/// `e_b(z)` for complex `z`.
pub fn exp_small_complex_in(b: f64, z: Complex64, policy: &SeriesPolicy) -> Result<Complex64> {
    if z.norm() * (1.0 - b) < 0.5 {
        let mut acc_re = Compensated::new();
        let mut acc_im = Compensated::new();
        let mut term = Complex64::new(1.0, 0.0);
        let mut small = 0;
        for j in 0..policy.max_terms {
            if j > 0 {
                term *= z / bracket(b, j as f64);
            }
            acc_re.add(term.re);
            acc_im.add(term.im);
            let s = Complex64::new(acc_re.value(), acc_im.value());
            if term.norm() <= policy.rel_tol * s.norm().max(1.0) {
                small += 1;
                if small >= policy.consecutive_small {
                    return Ok(s);
                }
            } else {
                small = 0;
            }
        }
        Err(QError::Truncation {
            terms: policy.max_terms,
            last: term.norm(),
        })
    } else {
        let e = exp_big_complex_in(b, -z);
        if e == Complex64::new(0.0, 0.0) {
            return Err(QError::Pole { t: z.re });
        }
        Ok(1.0 / e)
    }
}

/// `D_b f(t) = (f(bt) - f(t)) / ((b - 1) t)`.
pub fn derivative_in(b: f64, f: impl Fn(f64) -> f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(QError::Domain(
            "q-derivative at 0 needs series coefficients".into(),
        ));
    }
    Ok((f(b * t) - f(t)) / ((b - 1.0) * t))
}

/// q-derivative of the power series `sum coeffs[k] t^k`, valid at `t = 0`.
pub fn derivative_series_in(b: f64, coeffs: &[f64], t: f64) -> f64 {
    let mut acc = Compensated::new();
    let mut tp = 1.0;
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        acc.add(c * bracket(b, k as f64) * tp);
        tp *= t;
    }
    acc.value()
}

fn shell_is_small(term: f64, acc: &Compensated, tol: f64) -> bool {
    term == 0.0 || term.abs() <= tol * acc.value().abs()
}

/// Minimum number of grid points visited before a Jackson sum may stop.
const MIN_SHELLS: usize = 8;

/// Finite Jackson integral `int_0^a f(t) d_b t = (1-b) a sum_k f(b^k a) b^k`.
///
/// The integrand receives the grid index `k` and the node `t = b^k a`.
pub fn jackson_finite_indexed(
    b: f64,
    a: f64,
    f: impl Fn(i64, f64) -> f64,
    policy: &SeriesPolicy,
) -> Result<f64> {
    let mut acc = Compensated::new();
    let mut small = 0;
    let mut w = 1.0;
    let mut last = 0.0;
    for k in 0..policy.max_terms {
        let term = f(k as i64, a * w) * w;
        if !term.is_finite() {
            return Err(QError::Truncation { terms: k, last: term });
        }
        acc.add(term);
        last = term;
        if shell_is_small(term, &acc, policy.rel_tol) {
            small += 1;
            if small >= policy.consecutive_small && k + 1 >= MIN_SHELLS {
                return Ok((1.0 - b) * a * acc.value());
            }
        } else {
            small = 0;
        }
        w *= b;
    }
    Err(QError::Truncation {
        terms: policy.max_terms,
        last,
    })
}

pub fn jackson_finite(
    b: f64,
    a: f64,
    f: impl Fn(f64) -> f64,
    policy: &SeriesPolicy,
) -> Result<f64> {
    jackson_finite_indexed(b, a, |_, t| f(t), policy)
}

/// Anchor and index range of an infinite Jackson grid `{b^k gamma}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacksonSpec {
    pub gamma: f64,
    pub k_lo: i64,
    pub k_hi: i64,
}

impl JacksonSpec {
    pub fn new(gamma: f64, k_lo: i64, k_hi: i64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", gamma, "grid anchor must be positive"));
        }
        if k_lo > k_hi {
            return Err(invalid("k_lo", k_lo as f64, "must not exceed k_hi"));
        }
        Ok(Self { gamma, k_lo, k_hi })
    }

    /// Default fine end `ceil(log(rel_tol)/log(b))`.
    pub fn default_k_hi(b: f64, rel_tol: f64) -> i64 {
        (rel_tol.ln() / b.ln()).ceil() as i64
    }
}

/// Value of an infinite Jackson sum with the index range actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacksonSum {
    pub value: f64,
    pub k_lo: i64,
    pub k_hi: i64,
    /// Magnitude of the outermost shells, an estimate of the neglected tail.
    pub tail: f64,
}

/// `(1-b) gamma sum_{k=k_lo}^{k_hi} f(b^k gamma) b^k` on a fixed grid.
///
/// Fails with [`QError::Divergence`] when the shells at `k_lo` have not decayed.
pub fn jackson_infinite_fixed(
    b: f64,
    spec: &JacksonSpec,
    f: impl Fn(i64, f64) -> f64,
    policy: &SeriesPolicy,
) -> Result<JacksonSum> {
    let mut acc = Compensated::new();
    let mut coarse = Vec::new();
    let mut fine_tail = 0.0;
    for k in spec.k_lo..=spec.k_hi {
        let w = b.powi(k as i32);
        let term = f(k, spec.gamma * w) * w;
        acc.add(term);
        if ((k - spec.k_lo) as usize) < policy.consecutive_small {
            coarse.push(term);
        }
        if spec.k_hi - k < policy.consecutive_small as i64 {
            fine_tail += term.abs();
        }
    }
    let scale = (1.0 - b) * spec.gamma;
    let head: f64 = coarse.iter().map(|t| t.abs()).sum();
    if !acc.value().is_finite() || head > policy.rel_tol * acc.value().abs() && head > 0.0 {
        return Err(QError::Divergence {
            index: spec.k_lo,
            shell: head * scale,
            partial: acc.value() * scale,
        });
    }
    Ok(JacksonSum {
        value: scale * acc.value(),
        k_lo: spec.k_lo,
        k_hi: spec.k_hi,
        tail: scale * (head + fine_tail),
    })
}

/// Infinite Jackson sum with both ends chosen adaptively.
///
/// The fine end runs at least to [`JacksonSpec::default_k_hi`]; each end
/// stops after `consecutive_small` negligible shells. Running into
/// `max_terms` shells on the coarse side is reported as divergence.
pub fn jackson_infinite_auto(
    b: f64,
    gamma: f64,
    f: impl Fn(i64, f64) -> f64,
    policy: &SeriesPolicy,
) -> Result<JacksonSum> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", gamma, "grid anchor must be positive"));
    }
    let min_hi = JacksonSpec::default_k_hi(b, policy.rel_tol).max(MIN_SHELLS as i64);
    let mut acc = Compensated::new();
    let mut small = 0;
    let mut k = 0i64;
    let mut tail = 0.0;
    let mut w = 1.0;
    loop {
        let term = f(k, gamma * w) * w;
        if !term.is_finite() {
            return Err(QError::Divergence {
                index: k,
                shell: term,
                partial: acc.value(),
            });
        }
        acc.add(term);
        if shell_is_small(term, &acc, policy.rel_tol) {
            small += 1;
            tail += term.abs();
        } else {
            small = 0;
            tail = 0.0;
        }
        if small >= policy.consecutive_small && k >= min_hi {
            break;
        }
        if k as usize >= policy.max_terms {
            return Err(QError::Truncation {
                terms: policy.max_terms,
                last: term,
            });
        }
        k += 1;
        w *= b;
    }
    let k_hi = k;
    let fine_tail = tail;
    small = 0;
    tail = 0.0;
    k = 0;
    let mut last = 0.0;
    let mut k_lo = 0;
    let mut shells = 0usize;
    while small < policy.consecutive_small {
        k -= 1;
        shells += 1;
        let w = b.powi(k as i32);
        let term = f(k, gamma * w) * w;
        if !term.is_finite() || shells > policy.max_terms {
            return Err(QError::Divergence {
                index: k,
                shell: last,
                partial: acc.value(),
            });
        }
        acc.add(term);
        last = term;
        if shell_is_small(term, &acc, policy.rel_tol) {
            small += 1;
            tail += term.abs();
        } else {
            small = 0;
            tail = 0.0;
        }
        k_lo = k;
    }
    let scale = (1.0 - b) * gamma;
    Ok(JacksonSum {
        value: scale * acc.value(),
        k_lo,
        k_hi,
        tail: scale * (tail + fine_tail),
    })
}

/// `[u]_q`.
pub fn q_bracket(ctx: &QContext, u: f64) -> f64 {
    bracket(ctx.q(), u)
}

/// `Gamma_{q^2}(t)` for `t > 0`.
pub fn q_gamma2(ctx: &QContext, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", t, "Gamma_q2 is evaluated for t > 0 only"));
    }
    ctx.gamma2(t)
}

/// `(u; q)_k`, finite or infinite.
pub fn q_pochhammer(ctx: &QContext, u: f64, k: Length) -> f64 {
    match k {
        Length::Finite(k) => pochhammer(ctx.q(), u, k),
        Length::Infinite => pochhammer_inf(ctx.q(), u),
    }
}

/// `D_q f(t)` for `t != 0`.
pub fn q_derivative(ctx: &QContext, f: impl Fn(f64) -> f64, t: f64) -> Result<f64> {
    derivative_in(ctx.q(), f, t)
}

/// `D_q` of a power series, defined at every `t` including 0.
pub fn q_derivative_series(ctx: &QContext, coeffs: &[f64], t: f64) -> f64 {
    derivative_series_in(ctx.q(), coeffs, t)
}

/// `int_0^a f(t) d_q t`.
pub fn q_integrate_finite(ctx: &QContext, f: impl Fn(f64) -> f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid("a", a, "upper limit must be positive"));
    }
    jackson_finite(ctx.q(), a, f, ctx.policy())
}

/// `int_0^{gamma.inf} f(t) d_q t` on the grid of `spec`.
pub fn q_integrate_infinite(
    ctx: &QContext,
    f: impl Fn(f64) -> f64,
    spec: &JacksonSpec,
) -> Result<JacksonSum> {
    jackson_infinite_fixed(ctx.q(), spec, |_, t| f(t), ctx.policy())
}

/// `int_0^{gamma.inf} f(t) d_q t` with adaptive bounds.
pub fn q_integrate_infinite_auto(
    ctx: &QContext,
    f: impl Fn(f64) -> f64,
    gamma: f64,
) -> Result<JacksonSum> {
    jackson_infinite_auto(ctx.q(), gamma, |_, t| f(t), ctx.policy())
}

/// `e_q(t)`.
pub fn exp_small(ctx: &QContext, t: f64) -> Result<f64> {
    exp_small_in(ctx.q(), t, ctx.policy())
}

/// `E_q(t)`.
pub fn exp_big(ctx: &QContext, t: f64) -> f64 {
    exp_big_in(ctx.q(), t)
}

/// `e_{q^2}(t)`.
pub fn exp_small2(ctx: &QContext, t: f64) -> Result<f64> {
    exp_small_in(ctx.p(), t, ctx.policy())
}

/// `E_{q^2}(t)`.
pub fn exp_big2(ctx: &QContext, t: f64) -> f64 {
    exp_big_in(ctx.p(), t)
}

/// `max |a_i - b_i| / max |b_i|`, the sup-norm relative distance of two
/// sampled functions.
pub fn sup_relative(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// `n >= 2` points from `lo` to `hi` in geometric progression.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * ratio.powi(i as i32)).collect()
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
    fn context_rejects_bad_q_and_m() {
        assert!(QContext::new(1.0, 3).is_err());
        assert!(QContext::new(0.0, 3).is_err());
        assert!(QContext::new(0.5, 0).is_err());
        assert!(SeriesPolicy::new(0.0, 10, 3).is_err());
        assert_eq!(ctx().mu(), 1.0 + 0.5f64.powi(-1));
    }

    #[test]
    fn bracket_values() {
        let c = ctx();
        assert_eq!(q_bracket(&c, 0.0), 0.0);
        assert_eq!(q_bracket(&c, 1.0), 1.0);
        assert_eq!(q_bracket(&c, 2.0), 1.5);
        assert!(rel(q_bracket(&c, 2.5), (0.5f64.powf(2.5) - 1.0) / -0.5) < 1e-15);
    }

    #[test]
    fn gamma_values() {
        let c = ctx();
        assert!(rel(q_gamma2(&c, 1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(q_gamma2(&c, 3.0).unwrap(), 1.25) < 1e-14);
        let lhs = q_gamma2(&c, 2.5).unwrap();
        let rhs = c.bracket2(1.5) * q_gamma2(&c, 1.5).unwrap();
        assert!(rel(lhs, rhs) < 1e-14);
        assert!(q_gamma2(&c, 0.0).is_err());
        assert!(q_gamma2(&c, -1.5).is_err());
    }

    #[test]
    fn pochhammer_values() {
        let c = ctx();
        assert_eq!(q_pochhammer(&c, 0.0, Length::Finite(5)), 1.0);
        assert_eq!(q_pochhammer(&c, 1.0, Length::Finite(3)), 0.0);
        assert_eq!(q_pochhammer(&c, 0.5, Length::Finite(2)), 0.375);
        let inf = q_pochhammer(&c, 0.5, Length::Infinite);
        let long = q_pochhammer(&c, 0.5, Length::Finite(200));
        assert!(rel(inf, long) < 1e-15);
    }

    #[test]
    fn derivative_values() {
        let c = ctx();
        assert_eq!(q_derivative(&c, |_| 3.0, 0.7).unwrap(), 0.0);
        assert!(rel(q_derivative(&c, |t| t * t, 1.0).unwrap(), 1.5) < 1e-15);
        let de = q_derivative(&c, |t| exp_small(&c, t).unwrap(), 0.3).unwrap();
        assert!(rel(de, exp_small(&c, 0.3).unwrap()) < 1e-13);
        assert!(q_derivative(&c, |t| t, 0.0).is_err());
        assert_eq!(q_derivative_series(&c, &[1.0, 2.0, 3.0], 0.0), 2.0);
    }

    #[test]
    fn finite_integrals() {
        let c = ctx();
        assert!(rel(q_integrate_finite(&c, |t| t, 1.0).unwrap(), 2.0 / 3.0) < 1e-14);
        let dg = |t: f64| q_derivative(&c, |s| s * s * s, t).unwrap();
        assert!(rel(q_integrate_finite(&c, dg, 1.0).unwrap(), 1.0) < 1e-14);
        assert_eq!(q_integrate_finite(&c, |_| 0.0, 1.0).unwrap(), 0.0);
    }

    fn gauss_integrand(c: &QContext) -> impl Fn(f64) -> f64 + '_ {
        move |t| t * exp_small2(c, -c.p() * t * t / (1.0 + c.q())).unwrap()
    }

    #[test]
    fn infinite_integral_matches_wide_grid() {
        let c = ctx();
        let f = gauss_integrand(&c);
        let auto = q_integrate_infinite_auto(&c, &f, 1.0).unwrap();
        let wide = q_integrate_infinite(&c, &f, &JacksonSpec::new(1.0, -60, 120).unwrap()).unwrap();
        assert!(rel(auto.value, wide.value) < 1e-13);
        let shifted = q_integrate_infinite_auto(&c, &f, 0.5).unwrap();
        assert!(rel(auto.value, shifted.value) < 1e-13);
        assert_eq!(q_integrate_infinite_auto(&c, |_| 0.0, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn infinite_integral_flags_non_decay() {
        let c = ctx();
        let r = q_integrate_infinite(&c, |t| t, &JacksonSpec::new(1.0, -10, 40).unwrap());
        assert!(matches!(r, Err(QError::Divergence { .. })));
        let r = q_integrate_infinite_auto(&c, |_| 1.0, 1.0);
        assert!(matches!(r, Err(QError::Divergence { .. })));
    }

    #[test]
    fn exponential_values() {
        let c = ctx();
        assert_eq!(exp_small(&c, 0.0).unwrap(), 1.0);
        assert_eq!(exp_big(&c, 0.0), 1.0);
        for k in 0..3 {
            let z = -c.q().powi(-k) / (1.0 - c.q());
            assert!(exp_big(&c, z).abs() < 1e-12);
        }
        let prod = exp_small(&c, 0.3).unwrap() * exp_big_series_in(0.5, -0.3, c.policy()).unwrap();
        assert!((prod - 1.0).abs() < 1e-12);
        assert!(matches!(exp_small(&c, 2.0), Err(QError::Pole { .. })));
        assert!(matches!(exp_small(&c, 8.0), Err(QError::Pole { .. })));
    }

    #[test]
    fn big_exponential_series_and_product_agree() {
        let c = ctx();
        for &t in &[-3.0, -0.7, 0.2, 1.9, 6.0] {
            let s = exp_big_series_in(c.q(), t, c.policy()).unwrap();
            assert!(rel(s, exp_big(&c, t)) < 1e-13, "t={t}");
        }
    }

    #[test]
    fn complex_exponentials_are_inverse() {
        let c = ctx();
        for &(re, im) in &[(0.1, 0.3), (0.0, 1.7), (-2.0, 4.0)] {
            let z = Complex64::new(re, im);
            let e = exp_small_complex_in(c.q(), z, c.policy()).unwrap();
            let big = exp_big_complex_in(c.q(), -z);
            assert!((e * big - 1.0).norm() < 1e-13);
            if z.norm() < 0.9 {
                assert!((e.re - exp_small(&c, re).unwrap()).abs() < 1e-15 || im != 0.0);
            }
        }
    }

    fn poly(c: &[f64], t: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, a| acc * t + a)
    }

    proptest! {
        #[test]
        fn leibniz_rule(
            a in prop::collection::vec(-2.0f64..2.0, 1..6),
            b in prop::collection::vec(-2.0f64..2.0, 1..6),
            t in 0.05f64..1.5,
        ) {
            let c = ctx();
            let f = |x: f64| poly(&a, x);
            let g = |x: f64| poly(&b, x);
            let lhs = q_derivative(&c, |x| f(x) * g(x), t).unwrap();
            let rhs = q_derivative(&c, f, t).unwrap() * g(t)
                + f(c.q() * t) * q_derivative(&c, g, t).unwrap();
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() / scale < 1e-12);
        }

        #[test]
        fn fundamental_theorem(a in prop::collection::vec(-3.0f64..3.0, 1..9), x in 0.1f64..2.0) {
            let c = ctx();
            let g = |t: f64| poly(&a, t);
            let integral = q_integrate_finite(&c, |t| q_derivative(&c, g, t).unwrap(), x).unwrap();
            let expected = g(x) - g(0.0);
            let scale = a.iter().map(|v| v.abs() * x.max(1.0).powi(8)).sum::<f64>().max(1.0);
            prop_assert!((integral - expected).abs() / scale < 1e-12);
        }

        #[test]
        fn gamma_recurrence(t in 0.05f64..6.0) {
            let c = ctx();
            let lhs = q_gamma2(&c, t + 1.0).unwrap();
            let rhs = c.bracket2(t) * q_gamma2(&c, t).unwrap();
            prop_assert!(rel(lhs, rhs) < 1e-13);
        }

        #[test]
        fn exponentials_are_inverse(t in -1.8f64..1.8) {
            let c = ctx();
            let prod = exp_small(&c, t).unwrap() * exp_big(&c, -t);
            prop_assert!((prod - 1.0).abs() < 1e-13);
        }
    }
}
