//! psi-fractional integrals and derivatives, left and right.
//!
//! Every integral is mapped onto `u in [0, 1]` through
//! `u = (psi(t) - psi(a)) / (psi(x) - psi(a))` (mirrored on the right), which turns
//! the kernel `psi'(t) (psi(x) - psi(t))^{mu}` into the Jacobi weight `(1 - u)^mu`.

use crate::error::{Error, Result};
use crate::function::{offset_of, Anchor, Point, SmoothFn};
use crate::kernels::{Interval, Kernel};
use crate::quadrature::{jacobi_weighted, log_weighted, QuadConfig};
use crate::special::{gamma, gen_binomial, mittag_leffler, rgamma, MLConfig, EULER_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn base(self, iv: &Interval) -> f64 {
        match self {
            Side::Left => iv.a,
            Side::Right => iv.b,
        }
    }

    fn sign(self, n: usize) -> f64 {
        if self == Side::Right && n % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Order, side and interval of a psi-Caputo derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeSpec {
    pub alpha: f64,
    pub side: Side,
    pub interval: Interval,
}

impl DerivativeSpec {
    pub fn new(alpha: f64, side: Side, interval: Interval) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("order must be positive and finite, got {alpha}")));
        }
        Ok(Self { alpha, side, interval })
    }

    pub fn left(alpha: f64, interval: Interval) -> Result<Self> {
        Self::new(alpha, Side::Left, interval)
    }

    pub fn right(alpha: f64, interval: Interval) -> Result<Self> {
        Self::new(alpha, Side::Right, interval)
    }

    pub fn is_integer(&self) -> bool {
        self.alpha == self.alpha.floor()
    }

    /// `floor(alpha) + 1`, or `alpha` itself for integer orders.
    pub fn n(&self) -> usize {
        order_n(self.alpha)
    }

    /// `a` on the left, `b` on the right.
    pub fn base(&self) -> f64 {
        self.side.base(&self.interval)
    }
}

pub(crate) fn order_n(alpha: f64) -> usize {
    if alpha == alpha.floor() {
        alpha as usize
    } else {
        alpha.floor() as usize + 1
    }
}

fn check_position(iv: &Interval, x: f64) -> Result<()> {
    if !iv.contains(x) {
        return Err(Error::Domain(format!("x={x} lies outside [{}, {}]", iv.a, iv.b)));
    }
    Ok(())
}

/// `S^? * int_0^1 (1 - u)^mu f^[order](t(u)) du`, returning `(S, integral)` with
/// `S = |psi(x) - psi(base)|` and `t(u)` at psi-offset `u S` from the base.
fn mapped_integral(
    kernel: &Kernel,
    side: Side,
    iv: &Interval,
    x: f64,
    q: &QuadConfig,
    mu: f64,
    order: usize,
    f: &SmoothFn,
) -> Result<(f64, f64)> {
    let base = side.base(iv);
    let psi_base = kernel.psi(base);
    let s_total = offset_of(kernel, side, base, x);
    let (lo, hi) = match side {
        Side::Left => (base, x),
        Side::Right => (x, base),
    };
    let integral = jacobi_weighted(q, mu, |u| {
        let offset = u * s_total;
        let y = match side {
            Side::Left => psi_base + offset,
            Side::Right => psi_base - offset,
        };
        let t = kernel.inverse(y, lo, hi)?;
        f.eval(
            kernel,
            order,
            Point {
                x: t,
                anchor: Some(Anchor { side, base, offset }),
            },
        )
    })?;
    Ok((s_total, integral))
}

/// `f^[order]_psi(x)`.
pub fn psi_weighted_derivative(kernel: &Kernel, f: &SmoothFn, order: usize, x: f64) -> Result<f64> {
    f.eval(kernel, order, Point::at(x))
}

/// Left or right psi-fractional integral of order `alpha` at `x`.
pub fn frac_integral(
    kernel: &Kernel,
    alpha: f64,
    side: Side,
    iv: &Interval,
    f: &SmoothFn,
    x: f64,
    q: &QuadConfig,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("integral order must be positive, got {alpha}")));
    }
    check_position(iv, x)?;
    if x == side.base(iv) {
        return Ok(0.0);
    }
    let (s, integral) = mapped_integral(kernel, side, iv, x, q, alpha - 1.0, 0, f)?;
    Ok(s.powf(alpha) * rgamma(alpha) * integral)
}

/// psi-Caputo derivative by direct quadrature of the weakly singular definition.
pub fn caputo_derivative(kernel: &Kernel, spec: &DerivativeSpec, f: &SmoothFn, x: f64, q: &QuadConfig) -> Result<f64> {
    let iv = &spec.interval;
    check_position(iv, x)?;
    let n = spec.n();
    if spec.is_integer() {
        return Ok(spec.side.sign(n) * f.eval(kernel, n, Point::at(x))?);
    }
    if x == spec.base() {
        return Ok(0.0);
    }
    let m = n as f64 - spec.alpha;
    let (s, integral) = mapped_integral(kernel, spec.side, iv, x, q, m - 1.0, n, f)?;
    Ok(spec.side.sign(n) * s.powf(m) * rgamma(m) * integral)
}

/// psi-Caputo derivative through its integration-by-parts form, whose integrand
/// is no longer singular. Needs `f^[n+1]`.
pub fn caputo_derivative_ibp(
    kernel: &Kernel,
    spec: &DerivativeSpec,
    f: &SmoothFn,
    x: f64,
    q: &QuadConfig,
) -> Result<f64> {
    let iv = &spec.interval;
    check_position(iv, x)?;
    let n = spec.n();
    if spec.is_integer() {
        return Ok(spec.side.sign(n) * f.eval(kernel, n, Point::at(x))?);
    }
    if x == spec.base() {
        return Ok(0.0);
    }
    let base = spec.base();
    let m = n as f64 - spec.alpha;
    let at_base = f.eval(
        kernel,
        n,
        Point {
            x: base,
            anchor: Some(Anchor {
                side: spec.side,
                base,
                offset: 0.0,
            }),
        },
    )?;
    let (s, integral) = mapped_integral(kernel, spec.side, iv, x, q, m, n + 1, f)?;
    let boundary = s.powf(m) * at_base;
    let body = s.powf(m + 1.0) * integral;
    let value = match spec.side {
        Side::Left => boundary + body,
        Side::Right => boundary - body,
    };
    Ok(spec.side.sign(n) * value * rgamma(m + 1.0))
}

/// Riemann–Liouville counterpart: `(1/psi' d/dx)^n I^{n-alpha} f` (with `(-1)^n`
/// on the right), differenced in psi-space with step `1e-4 (psi(b) - psi(a))`.
pub fn rl_derivative(kernel: &Kernel, spec: &DerivativeSpec, f: &SmoothFn, x: f64, q: &QuadConfig) -> Result<f64> {
    let iv = &spec.interval;
    check_position(iv, x)?;
    let n = spec.n();
    if spec.is_integer() {
        return Ok(spec.side.sign(n) * f.eval(kernel, n, Point::at(x))?);
    }
    let m = n as f64 - spec.alpha;
    let (ya, yb) = (kernel.psi(iv.a), kernel.psi(iv.b));
    let h = 1e-4 * (yb - ya);
    let y0 = kernel.psi(x);
    let mut acc = 0.0;
    for j in 0..=n {
        let y = y0 + (0.5 * n as f64 - j as f64) * h;
        if y < ya || y > yb {
            return Err(Error::StencilOutOfRange { x, a: iv.a, b: iv.b });
        }
        let t = kernel.inverse(y, iv.a, iv.b)?;
        let w = if j % 2 == 0 { 1.0 } else { -1.0 } * gen_binomial(n as f64, j);
        acc += w * frac_integral(kernel, m, spec.side, iv, f, t, q)?;
    }
    Ok(spec.side.sign(n) * acc / h.powi(n as i32))
}

/// Closed form for the derivative of `(psi(x) - psi(a))^{beta-1}` (mirrored on the right):
/// `Gamma(beta) / Gamma(beta - alpha) (psi(x) - psi(a))^{beta-alpha-1}`.
/// Monomials of integer degree below `n` are annihilated.
pub fn power_rule(kernel: &Kernel, alpha: f64, side: Side, iv: &Interval, beta: f64, x: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("order must be positive, got {alpha}")));
    }
    let n = order_n(alpha);
    let degree = beta - 1.0;
    if degree >= 0.0 && degree == degree.floor() && (degree as usize) < n {
        return Ok(0.0);
    }
    if !(beta > n as f64) {
        return Err(Error::Domain(format!("power rule needs beta > n = {n}, got {beta}")));
    }
    check_position(iv, x)?;
    let s = offset_of(kernel, side, side.base(iv), x);
    Ok(gamma(beta)? * rgamma(beta - alpha) * s.powf(beta - alpha - 1.0))
}

/// `f = E_alpha(lambda (psi(x) - psi(a))^alpha)` (mirrored on the right) and its
/// psi-Caputo derivative `lambda f`.
pub fn ml_eigen(
    kernel: &Kernel,
    alpha: f64,
    lambda: f64,
    side: Side,
    iv: &Interval,
    x: f64,
    cfg: &MLConfig,
) -> Result<(f64, f64)> {
    check_position(iv, x)?;
    let s = offset_of(kernel, side, side.base(iv), x);
    let f = mittag_leffler(alpha, lambda * s.powf(alpha), cfg)?;
    Ok((f, lambda * f))
}

/// Left derivative of `psi f` by the product rule
/// `psi D^alpha f + I^{1-alpha} f - (1 - alpha) I^{2-alpha} f^[1]`, `alpha in (0, 1)`.
pub fn product_rule_psi(
    kernel: &Kernel,
    alpha: f64,
    iv: &Interval,
    f: &SmoothFn,
    x: f64,
    q: &QuadConfig,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("product rule needs alpha in (0, 1), got {alpha}")));
    }
    let spec = DerivativeSpec::left(alpha, *iv)?;
    let d = caputo_derivative(kernel, &spec, f, x, q)?;
    let i1 = frac_integral(kernel, 1.0 - alpha, Side::Left, iv, f, x, q)?;
    let df = f.psi_derivative_fn(kernel, 1);
    let i2 = frac_integral(kernel, 2.0 - alpha, Side::Left, iv, &df, x, q)?;
    Ok(kernel.psi(x) * d + i1 - (1.0 - alpha) * i2)
}

/// First-order expansion of the left derivative of order `1 - epsilon`:
/// `f^[1](x) + eps [gamma f^[1](x) + f^[1](a) ln S + int_a^x (f^[1])'(t) ln(psi(x) - psi(t)) dt]`.
pub fn low_fractionality(
    kernel: &Kernel,
    f: &SmoothFn,
    epsilon: f64,
    iv: &Interval,
    x: f64,
    q: &QuadConfig,
) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    check_position(iv, x)?;
    if x == iv.a {
        return Err(Error::Domain("expansion needs x > a".into()));
    }
    let d1 = f.eval(kernel, 1, Point::at(x))?;
    let d1a = f.eval(
        kernel,
        1,
        Point {
            x: iv.a,
            anchor: Some(Anchor {
                side: Side::Left,
                base: iv.a,
                offset: 0.0,
            }),
        },
    )?;
    let (s, plain) = mapped_integral(kernel, Side::Left, iv, x, q, 0.0, 2, f)?;
    let ln_s = s.ln();
    let psi_a = kernel.psi(iv.a);
    let logged = log_weighted(q, |u| {
        let offset = u * s;
        let t = kernel.inverse(psi_a + offset, iv.a, x)?;
        f.eval(
            kernel,
            2,
            Point {
                x: t,
                anchor: Some(Anchor {
                    side: Side::Left,
                    base: iv.a,
                    offset,
                }),
            },
        )
    })?;
    // dt-integral with d/dt f^[1] = psi' f^[2], u-substituted
    let integral = s * (ln_s * plain + logged);
    Ok(d1 + epsilon * (EULER_GAMMA * d1 + d1a * ln_s + integral))
}

/// Operator-norm bound `(psi(b) - psi(a))^{n-alpha} / Gamma(n + 1 - alpha)`.
pub fn bound_constant(kernel: &Kernel, alpha: f64, iv: &Interval) -> f64 {
    let m = order_n(alpha) as f64 - alpha;
    (kernel.psi(iv.b) - kernel.psi(iv.a)).powf(m) * rgamma(m + 1.0)
}
