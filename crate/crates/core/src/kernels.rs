//! The "other function" psi that the fractional operators are taken with
//! respect to, the built-in kernel families and the admissibility check.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Shared real-valued map.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A finite interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// `n` Chebyshev points of the first kind, ascending.
    pub fn chebyshev_points(&self, n: usize) -> Vec<f64> {
        let mid = 0.5 * (self.a + self.b);
        let half = 0.5 * (self.b - self.a);
        let mut pts: Vec<f64> = (0..n)
            .map(|j| {
                let theta = (2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
                mid - half * theta.cos()
            })
            .collect();
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// `n` equally spaced points from `a` to `b` inclusive.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.a],
            _ => {
                let h = self.width() / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.b } else { self.a + i as f64 * h })
                    .collect()
            }
        }
    }
}

/// An increasing `C^1` function psi together with its derivative.
///
/// Higher derivatives and the inverse are optional. When they are missing,
/// `d2psi`/`d3psi` difference the supplied lower derivative and `inverse`
/// falls back to a safeguarded Newton iteration.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    params: Vec<(String, f64)>,
    psi: RealFn,
    dpsi: RealFn,
    d2psi: Option<RealFn>,
    d3psi: Option<RealFn>,
    inverse: Option<RealFn>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

fn arc<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> RealFn {
    Arc::new(f)
}

impl Kernel {
    /// A user-defined kernel from `psi` and its analytic derivative.
    pub fn custom<P, D>(name: impl Into<String>, psi: P, dpsi: D) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            params: Vec::new(),
            psi: arc(psi),
            dpsi: arc(dpsi),
            d2psi: None,
            d3psi: None,
            inverse: None,
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: f64) -> Self {
        self.params.push((key.into(), value));
        self
    }

    pub fn with_second_derivative<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.d2psi = Some(arc(f));
        self
    }

    pub fn with_third_derivative<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.d3psi = Some(arc(f));
        self
    }

    pub fn with_inverse<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.inverse = Some(arc(f));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        (self.psi)(x)
    }

    #[inline]
    pub fn dpsi(&self, x: f64) -> f64 {
        (self.dpsi)(x)
    }

    pub fn d2psi(&self, x: f64) -> f64 {
        match &self.d2psi {
            Some(f) => f(x),
            None => {
                let h = 1e-5 * (1.0 + x.abs());
                (self.dpsi(x + h) - self.dpsi(x - h)) / (2.0 * h)
            }
        }
    }

    pub fn d3psi(&self, x: f64) -> f64 {
        match &self.d3psi {
            Some(f) => f(x),
            None => {
                let h = 1e-4 * (1.0 + x.abs());
                (self.d2psi(x + h) - self.d2psi(x - h)) / (2.0 * h)
            }
        }
    }

    pub fn has_analytic_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    /// Solves `psi(t) = y` for `t` in `[lo, hi]`.
    pub fn inverse(&self, y: f64, lo: f64, hi: f64) -> Result<f64> {
        if let Some(inv) = &self.inverse {
            return Ok(inv(y).clamp(lo, hi));
        }
        self.solve_inverse(y, lo, hi)
    }

    /// Safeguarded Newton iteration with bisection fallback; tolerance `1e-13` in psi-space.
    pub fn solve_inverse(&self, y: f64, lo: f64, hi: f64) -> Result<f64> {
        const TOL: f64 = 1e-13;
        let fail = || Error::InverseFailure { y, lo, hi };
        let (mut lo_t, mut hi_t) = (lo, hi);
        let f_lo = self.psi(lo_t) - y;
        let f_hi = self.psi(hi_t) - y;
        if f_lo.abs() <= TOL {
            return Ok(lo_t);
        }
        if f_hi.abs() <= TOL {
            return Ok(hi_t);
        }
        if !(f_lo < 0.0 && f_hi > 0.0) {
            return Err(fail());
        }
        let mut t = lo_t + (-f_lo) / (f_hi - f_lo) * (hi_t - lo_t);
        for _ in 0..200 {
            let f = self.psi(t) - y;
            if !f.is_finite() {
                return Err(fail());
            }
            if f.abs() <= TOL {
                return Ok(t);
            }
            if f < 0.0 {
                lo_t = t;
            } else {
                hi_t = t;
            }
            if hi_t - lo_t <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
                return Ok(t);
            }
            let d = self.dpsi(t);
            let newton = t - f / d;
            t = if d > 0.0 && newton > lo_t && newton < hi_t {
                newton
            } else {
                0.5 * (lo_t + hi_t)
            };
        }
        Err(fail())
    }
}

/// Names accepted by [`builtin_kernel`].
pub const BUILTIN_KERNELS: [&str; 6] = ["linear", "log1p", "sqrt1p", "pow1p", "hadamard_log", "sine10"];

/// One of the built-in kernel families, with exact psi and analytic derivatives:
///
/// | name           | psi(x)       |
/// |----------------|--------------|
/// | `linear`       | x            |
/// | `log1p`        | ln(x+1)      |
/// | `sqrt1p`       | sqrt(x+1)    |
/// | `pow1p`        | (x+1)^b      |
/// | `hadamard_log` | ln x         |
/// | `sine10`       | sin(x/10)    |
pub fn builtin_kernel(name: &str, params: &[(&str, f64)]) -> Result<Kernel> {
    let expect_params = |allowed: &[&str]| -> Result<()> {
        for (k, _) in params {
            if !allowed.contains(k) {
                return Err(Error::KernelParameter(format!("kernel `{name}` takes no parameter `{k}`")));
            }
        }
        Ok(())
    };
    let kernel = match name {
        "linear" => {
            expect_params(&[])?;
            Kernel::custom("linear", |x| x, |_| 1.0)
                .with_second_derivative(|_| 0.0)
                .with_third_derivative(|_| 0.0)
                .with_inverse(|y| y)
        }
        "log1p" => {
            expect_params(&[])?;
            Kernel::custom("log1p", f64::ln_1p, |x| 1.0 / (x + 1.0))
                .with_second_derivative(|x| -1.0 / ((x + 1.0) * (x + 1.0)))
                .with_third_derivative(|x| 2.0 / (x + 1.0).powi(3))
                .with_inverse(f64::exp_m1)
        }
        "sqrt1p" => {
            expect_params(&[])?;
            Kernel::custom("sqrt1p", |x| (x + 1.0).sqrt(), |x| 0.5 / (x + 1.0).sqrt())
                .with_second_derivative(|x| -0.25 * (x + 1.0).powf(-1.5))
                .with_third_derivative(|x| 0.375 * (x + 1.0).powf(-2.5))
                .with_inverse(|y| y * y - 1.0)
        }
        "pow1p" => {
            expect_params(&["b"])?;
            let b = params
                .iter()
                .find(|(k, _)| *k == "b")
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::KernelParameter("pow1p requires parameter b".into()))?;
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::KernelParameter(format!("pow1p requires b > 0, got {b}")));
            }
            Kernel::custom("pow1p", move |x| (x + 1.0).powf(b), move |x| b * (x + 1.0).powf(b - 1.0))
                .with_param("b", b)
                .with_second_derivative(move |x| b * (b - 1.0) * (x + 1.0).powf(b - 2.0))
                .with_third_derivative(move |x| b * (b - 1.0) * (b - 2.0) * (x + 1.0).powf(b - 3.0))
                .with_inverse(move |y| y.powf(1.0 / b) - 1.0)
        }
        "hadamard_log" => {
            expect_params(&[])?;
            Kernel::custom("hadamard_log", f64::ln, |x| 1.0 / x)
                .with_second_derivative(|x| -1.0 / (x * x))
                .with_third_derivative(|x| 2.0 / (x * x * x))
                .with_inverse(f64::exp)
        }
        "sine10" => {
            expect_params(&[])?;
            Kernel::custom("sine10", |x| (x / 10.0).sin(), |x| (x / 10.0).cos() / 10.0)
                .with_second_derivative(|x| -(x / 10.0).sin() / 100.0)
                .with_third_derivative(|x| -(x / 10.0).cos() / 1000.0)
                .with_inverse(|y| 10.0 * y.clamp(-1.0, 1.0).asin())
        }
        other => return Err(Error::UnknownKernel(other.to_string())),
    };
    Ok(kernel)
}

/// Parses the `name` or `name:key=value[,key=value]` kernel grammar.
pub fn parse_kernel_spec(spec: &str) -> Result<Kernel> {
    let spec = spec.trim();
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), Some(r)),
        None => (spec, None),
    };
    let mut params: Vec<(&str, f64)> = Vec::new();
    if let Some(rest) = rest {
        for item in rest.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::KernelParameter(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::KernelParameter(format!("`{v}` is not a number")))?;
            params.push((k.trim(), v));
        }
    }
    builtin_kernel(name, &params)
}

/// Checks that `psi' > 0` at `samples` Chebyshev points of `iv` and that the
/// supplied `psi'` agrees with a central difference of `psi`. The endpoints
/// must have finite `psi` and `psi'`.
///
/// Points are visited in ascending order; the first offending point is reported.
pub fn validate(kernel: &Kernel, iv: &Interval, samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::Domain(format!("validate needs at least 2 samples, got {samples}")));
    }
    let violation = |x: f64, value: f64, reason: &str| Error::KernelViolation {
        kernel: kernel.to_string(),
        x,
        value,
        reason: reason.to_string(),
    };
    for x in [iv.a, iv.b] {
        let d = kernel.dpsi(x);
        if !d.is_finite() || !kernel.psi(x).is_finite() {
            return Err(violation(x, d, "psi or psi' is not finite at an endpoint"));
        }
    }
    for x in iv.chebyshev_points(samples) {
        let d = kernel.dpsi(x);
        if !d.is_finite() || !kernel.psi(x).is_finite() {
            return Err(violation(x, d, "psi or psi' is not finite"));
        }
        if d <= 0.0 {
            return Err(violation(x, d, "psi' is not positive"));
        }
        let h = 1e-6 * (1.0 + x.abs());
        let numeric = (kernel.psi(x + h) - kernel.psi(x - h)) / (2.0 * h);
        if (numeric - d).abs() > 1e-6 * (1.0 + d.abs()) {
            return Err(violation(x, numeric - d, "psi' disagrees with the difference quotient of psi"));
        }
    }
    Ok(())
}
