//! Functions handed to the fractional operators, together with whatever
//! derivative information they carry.
//!
//! The operators need `f^[k]_psi = (1/psi' d/dx)^k f`. A [`SmoothFn`] supplies
//! it in one of four ways:
//!
//! * ordinary derivatives `f', f'', f'''`, combined with `psi', psi'', psi'''`
//!   by the quotient rule (orders above 3 difference the order-3 expression);
//! * psi-weighted derivatives given directly, valid for one kernel;
//! * a function of the psi-offset `s = psi(x) - psi(base)` (or `psi(base) - psi(x)`
//!   on the right), whose psi-derivatives are plain `s`-derivatives. The operators
//!   pass `s` exactly, which keeps singular powers accurate next to the base point;
//! * nothing, in which case nested central differences are used.

use crate::error::{Error, Result};
use crate::kernels::{Kernel, RealFn};
use crate::operators::Side;
use crate::special::{ml_series, MLConfig};
use std::fmt;
use std::sync::Arc;

/// Evaluation point. `anchor` carries the exact psi-offset from an operator's
/// base point when the caller knows it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Point {
    pub x: f64,
    pub anchor: Option<Anchor>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Anchor {
    pub side: Side,
    pub base: f64,
    pub offset: f64,
}

impl Point {
    pub fn at(x: f64) -> Self {
        Self { x, anchor: None }
    }
}

/// Derivatives of an offset-native function: `derivs[j](s)` is the `j`-th
/// `s`-derivative, `derivs[0]` the function itself.
type OffsetFn = Arc<dyn Fn(f64, usize) -> Result<f64> + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Ordinary(Vec<RealFn>),
    PsiWeighted { kernel_id: String, derivs: Vec<RealFn> },
    Offset {
        kernel: Kernel,
        side: Side,
        base: f64,
        max_order: usize,
        h: OffsetFn,
    },
    FiniteDifference { step_scale: f64 },
    Shifted { inner: Arc<SmoothFn>, kernel_id: String, by: usize },
}

/// A function together with its derivative data.
#[derive(Clone)]
pub struct SmoothFn {
    f: RealFn,
    repr: Repr,
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Ordinary(d) => format!("ordinary({})", d.len()),
            Repr::PsiWeighted { derivs, kernel_id } => format!("psi-weighted({}, {kernel_id})", derivs.len()),
            Repr::Offset { side, base, .. } => format!("offset({side:?}, {base})"),
            Repr::FiniteDifference { step_scale } => format!("finite-difference({step_scale})"),
            Repr::Shifted { by, .. } => format!("shifted({by})"),
        };
        f.debug_struct("SmoothFn").field("derivatives", &kind).finish()
    }
}

const DEFAULT_FD_SCALE: f64 = 1e-4;

impl SmoothFn {
    /// `f` with ordinary derivatives `f', f'', ...` (at most three are used analytically).
    pub fn with_derivatives<F>(f: F, derivs: Vec<RealFn>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            repr: Repr::Ordinary(derivs),
        }
    }

    /// `f` whose psi-derivatives are obtained by nested central differences.
    pub fn finite_difference<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            repr: Repr::FiniteDifference {
                step_scale: DEFAULT_FD_SCALE,
            },
        }
    }

    /// `f` with `f^[1]_psi, f^[2]_psi, ...` supplied directly for `kernel`.
    pub fn with_psi_derivatives<F>(kernel: &Kernel, f: F, derivs: Vec<RealFn>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            repr: Repr::PsiWeighted {
                kernel_id: kernel.to_string(),
                derivs,
            },
        }
    }

    /// `f(x) = h(s)` with `s = psi(x) - psi(base)` (left) or `psi(base) - psi(x)` (right).
    /// `h(s, j)` returns the `j`-th derivative of `h`, for `j <= max_order`.
    pub fn of_offset<H>(kernel: &Kernel, side: Side, base: f64, max_order: usize, h: H) -> Self
    where
        H: Fn(f64, usize) -> Result<f64> + Send + Sync + 'static,
    {
        let h: OffsetFn = Arc::new(h);
        let value = {
            let kernel = kernel.clone();
            let h = h.clone();
            move |x: f64| h(offset_of(&kernel, side, base, x), 0).unwrap_or(f64::NAN)
        };
        Self {
            f: Arc::new(value),
            repr: Repr::Offset {
                kernel: kernel.clone(),
                side,
                base,
                max_order,
                h,
            },
        }
    }

    /// `(psi(x) - psi(a))^p` on the left, `(psi(b) - psi(x))^p` on the right.
    pub fn psi_power(kernel: &Kernel, side: Side, base: f64, p: f64) -> Self {
        Self::of_offset(kernel, side, base, usize::MAX, move |s, j| {
            let mut coef = 1.0;
            for i in 0..j {
                coef *= p - i as f64;
                if coef == 0.0 {
                    return Ok(0.0);
                }
            }
            Ok(coef * s.powf(p - j as f64))
        })
    }

    /// `E_alpha(lambda s^alpha)` with `s` the psi-offset from `base`;
    /// derivatives by term-wise differentiation of the series.
    pub fn psi_mittag_leffler(kernel: &Kernel, side: Side, base: f64, alpha: f64, lambda: f64, cfg: MLConfig) -> Self {
        Self::of_offset(kernel, side, base, usize::MAX, move |s, j| {
            if s == 0.0 {
                return Ok(if j == 0 { 1.0 } else { f64::NAN });
            }
            let z = lambda * s.powf(alpha);
            // d^j/ds^j s^{alpha k} / Gamma(alpha k + 1) = s^{alpha k - j} / Gamma(alpha k + 1 - j)
            let series = ml_series(alpha, 1.0 - j as f64, z, 0, &cfg)?;
            Ok(series * s.powi(-(j as i32)))
        })
    }

    /// `f^[m]_psi` as a function in its own right, for `kernel`.
    pub fn psi_derivative_fn(&self, kernel: &Kernel, m: usize) -> SmoothFn {
        let inner = Arc::new(self.clone());
        let value = {
            let inner = inner.clone();
            let kernel = kernel.clone();
            move |x: f64| inner.eval(&kernel, m, Point::at(x)).unwrap_or(f64::NAN)
        };
        SmoothFn {
            f: Arc::new(value),
            repr: Repr::Shifted {
                inner,
                kernel_id: kernel.to_string(),
                by: m,
            },
        }
    }

    /// `f(x)`.
    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Highest psi-derivative order available without differencing, if bounded.
    pub fn analytic_order(&self) -> Option<usize> {
        match &self.repr {
            Repr::Ordinary(d) => Some(d.len().min(3)),
            Repr::PsiWeighted { derivs, .. } => Some(derivs.len()),
            Repr::Offset { max_order, .. } => Some(*max_order),
            Repr::FiniteDifference { .. } => Some(0),
            Repr::Shifted { inner, by, .. } => inner.analytic_order().map(|o| o.saturating_sub(*by)),
        }
    }

    pub(crate) fn eval(&self, kernel: &Kernel, order: usize, pt: Point) -> Result<f64> {
        match &self.repr {
            Repr::Offset {
                kernel: own,
                side,
                base,
                max_order,
                h,
            } => {
                if order > *max_order {
                    return Err(Error::InsufficientDerivatives {
                        requested: order,
                        available: *max_order,
                    });
                }
                if order > 0 && own.to_string() != kernel.to_string() {
                    return Err(kernel_mismatch(&own.to_string(), kernel));
                }
                let s = match pt.anchor {
                    Some(a) if a.side == *side && a.base == *base => a.offset,
                    _ => offset_of(own, *side, *base, pt.x),
                };
                let v = h(s, order)?;
                Ok(if *side == Side::Right && order % 2 == 1 { -v } else { v })
            }
            _ if order == 0 => Ok(self.value(pt.x)),
            Repr::Ordinary(derivs) => {
                if order <= 3 {
                    if derivs.len() < order {
                        return Err(Error::InsufficientDerivatives {
                            requested: order,
                            available: derivs.len(),
                        });
                    }
                    Ok(quotient_rule(kernel, self, derivs, order, pt.x))
                } else {
                    if derivs.len() < 3 {
                        return Err(Error::InsufficientDerivatives {
                            requested: order,
                            available: derivs.len(),
                        });
                    }
                    let third = |x: f64| Ok(quotient_rule(kernel, self, derivs, 3, x));
                    nested_difference(kernel, &third, order - 3, pt.x, DEFAULT_FD_SCALE)
                }
            }
            Repr::PsiWeighted { kernel_id, derivs } => {
                if kernel_id != &kernel.to_string() {
                    return Err(kernel_mismatch(kernel_id, kernel));
                }
                derivs
                    .get(order - 1)
                    .map(|d| d(pt.x))
                    .ok_or(Error::InsufficientDerivatives {
                        requested: order,
                        available: derivs.len(),
                    })
            }
            Repr::FiniteDifference { step_scale } => {
                let base = |x: f64| Ok(self.value(x));
                nested_difference(kernel, &base, order, pt.x, *step_scale)
            }
            Repr::Shifted { inner, kernel_id, by } => {
                if kernel_id != &kernel.to_string() {
                    return Err(kernel_mismatch(kernel_id, kernel));
                }
                inner.eval(kernel, order + by, pt)
            }
        }
    }

    /// Cross-checks every analytic psi-derivative against a central difference of
    /// the order below it, at `points`; tolerance `1e-5` relative.
    pub fn check(&self, kernel: &Kernel, points: &[f64]) -> Result<()> {
        let max = match self.analytic_order() {
            Some(m) => m.min(4),
            None => 0,
        };
        for &x in points {
            for k in 1..=max {
                let analytic = self.eval(kernel, k, Point::at(x))?;
                let lower = |y: f64| self.eval(kernel, k - 1, Point::at(y));
                let h = 1e-5 * (1.0 + x.abs());
                let numeric = (lower(x + h)? - lower(x - h)?) / (2.0 * h * kernel.dpsi(x));
                if (analytic - numeric).abs() > 1e-5 * (1.0 + analytic.abs()) {
                    return Err(Error::Domain(format!(
                        "derivative of order {k} at x={x} is {analytic}, difference quotient gives {numeric}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn kernel_mismatch(id: &str, kernel: &Kernel) -> Error {
    Error::Domain(format!(
        "psi-derivatives were supplied for kernel `{id}`, not `{kernel}`"
    ))
}

pub(crate) fn offset_of(kernel: &Kernel, side: Side, base: f64, x: f64) -> f64 {
    match side {
        Side::Left => kernel.psi(x) - kernel.psi(base),
        Side::Right => kernel.psi(base) - kernel.psi(x),
    }
}

/// `f^[k]_psi` from `f, f', f'', f'''` and the kernel's derivatives, `k <= 3`.
fn quotient_rule(kernel: &Kernel, f: &SmoothFn, d: &[RealFn], k: usize, x: f64) -> f64 {
    let p1 = kernel.dpsi(x);
    match k {
        0 => f.value(x),
        1 => d[0](x) / p1,
        2 => {
            let p2 = kernel.d2psi(x);
            (d[1](x) * p1 - d[0](x) * p2) / (p1 * p1 * p1)
        }
        _ => {
            let p2 = kernel.d2psi(x);
            let p3 = kernel.d3psi(x);
            let (f1, f2, f3) = (d[0](x), d[1](x), d[2](x));
            let u = f2 * p1 - f1 * p2;
            let du = f3 * p1 - f1 * p3;
            (du * p1 - 3.0 * u * p2) / p1.powi(5)
        }
    }
}

/// `(1/psi' d/dx)^k g` by nested central differences, step `scale (1 + |x|)`.
fn nested_difference(
    kernel: &Kernel,
    g: &dyn Fn(f64) -> Result<f64>,
    k: usize,
    x: f64,
    scale: f64,
) -> Result<f64> {
    if k == 0 {
        return g(x);
    }
    let h = scale * (1.0 + x.abs());
    let plus = nested_difference(kernel, g, k - 1, x + h, scale)?;
    let minus = nested_difference(kernel, g, k - 1, x - h, scale)?;
    Ok((plus - minus) / (2.0 * h * kernel.dpsi(x)))
}

/// Shorthand for building derivative lists.
pub fn derivs<const N: usize>(fs: [RealFn; N]) -> Vec<RealFn> {
    fs.into_iter().collect()
}

/// Wraps a closure as a [`RealFn`].
pub fn real_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> RealFn {
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::builtin_kernel;
    use approx::assert_relative_eq;

    fn log1p() -> Kernel {
        builtin_kernel("log1p", &[]).unwrap()
    }

    fn ln2p1() -> SmoothFn {
        SmoothFn::with_derivatives(
            |x: f64| x.ln_1p().powi(2),
            derivs([
                real_fn(|x: f64| 2.0 * x.ln_1p() / (x + 1.0)),
                real_fn(|x: f64| 2.0 * (1.0 - x.ln_1p()) / ((x + 1.0) * (x + 1.0))),
                real_fn(|x: f64| (4.0 * x.ln_1p() - 6.0) / (x + 1.0).powi(3)),
            ]),
        )
    }

    #[test]
    fn quotient_rule_orders() {
        // ln^2(x+1) = psi^2 for psi = ln(x+1): f^[1] = 2 psi, f^[2] = 2, f^[3] = 0
        let k = log1p();
        let f = ln2p1();
        for x in [0.1f64, 1.0, 4.0] {
            let psi = x.ln_1p();
            assert_relative_eq!(f.eval(&k, 1, Point::at(x)).unwrap(), 2.0 * psi, max_relative = 1e-13);
            assert_relative_eq!(f.eval(&k, 2, Point::at(x)).unwrap(), 2.0, max_relative = 1e-12);
            assert!(f.eval(&k, 3, Point::at(x)).unwrap().abs() < 1e-12);
        }
        f.check(&k, &[0.2, 1.5, 3.0]).unwrap();
    }

    #[test]
    fn insufficient_data() {
        let k = log1p();
        let f = SmoothFn::with_derivatives(|x| x, derivs([real_fn(|_| 1.0)]));
        assert!(matches!(
            f.eval(&k, 2, Point::at(1.0)),
            Err(Error::InsufficientDerivatives { requested: 2, available: 1 })
        ));
    }

    #[test]
    fn finite_difference_fallback() {
        let k = log1p();
        let f = SmoothFn::finite_difference(|x: f64| x.ln_1p().powi(2));
        assert_relative_eq!(f.eval(&k, 1, Point::at(1.0)).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-7);
        assert_relative_eq!(f.eval(&k, 2, Point::at(1.0)).unwrap(), 2.0, max_relative = 1e-5);
    }

    #[test]
    fn offset_functions() {
        let k = builtin_kernel("sqrt1p", &[]).unwrap();
        let f = SmoothFn::psi_power(&k, Side::Left, 0.0, 2.5);
        let x = 3.0;
        let s = k.psi(x) - 1.0;
        assert_relative_eq!(f.value(x), s.powf(2.5), max_relative = 1e-14);
        assert_relative_eq!(f.eval(&k, 2, Point::at(x)).unwrap(), 2.5 * 1.5 * s.sqrt(), max_relative = 1e-13);
        f.check(&k, &[0.5, 2.0]).unwrap();
        // right side flips odd orders
        let g = SmoothFn::psi_power(&k, Side::Right, 5.0, 3.0);
        let s = k.psi(5.0) - k.psi(x);
        assert_relative_eq!(g.eval(&k, 1, Point::at(x)).unwrap(), -3.0 * s * s, max_relative = 1e-13);
        g.check(&k, &[0.5, 2.0]).unwrap();
        // exact offset bypasses cancellation in psi(x) - psi(a)
        let tiny = Point {
            x: 0.0,
            anchor: Some(Anchor { side: Side::Left, base: 0.0, offset: 1e-30 }),
        };
        assert_relative_eq!(f.eval(&k, 2, tiny).unwrap(), 3.75 * 1e-15, max_relative = 1e-12);
    }

    #[test]
    fn mittag_leffler_function_derivatives() {
        let k = log1p();
        let f = SmoothFn::psi_mittag_leffler(&k, Side::Left, 0.0, 0.5, 1.0, MLConfig::default());
        f.check(&k, &[0.3, 1.0, 3.0]).unwrap();
        let one = SmoothFn::psi_mittag_leffler(&k, Side::Left, 0.0, 1.0, 1.0, MLConfig::default());
        // alpha = 1: exp(psi(x) - psi(0)) and every psi-derivative equals it
        for x in [0.5f64, 2.0] {
            let e = x.ln_1p().exp();
            assert_relative_eq!(one.value(x), e, max_relative = 1e-13);
            assert_relative_eq!(one.eval(&k, 2, Point::at(x)).unwrap(), e, max_relative = 1e-12);
        }
    }

    #[test]
    fn shifted_and_kernel_mismatch() {
        let k = log1p();
        let f = ln2p1();
        let d1 = f.psi_derivative_fn(&k, 1);
        assert_relative_eq!(d1.value(1.0), 2.0 * 2f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(d1.eval(&k, 1, Point::at(1.0)).unwrap(), 2.0, max_relative = 1e-12);
        let lin = builtin_kernel("linear", &[]).unwrap();
        assert!(d1.eval(&lin, 1, Point::at(1.0)).is_err());
        let p = SmoothFn::psi_power(&k, Side::Left, 0.0, 2.0);
        assert!(p.eval(&lin, 1, Point::at(1.0)).is_err());
    }
}
