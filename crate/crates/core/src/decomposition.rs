//! Truncated series expansion of the psi-Caputo derivative into integer-order data.
//!
//! With `m = n - alpha` and `S = psi(x) - psi(a)`,
//!
//! ```text
//! D f(x) ~ A_N S^m f^[n](x) - sum_{k=1}^N B_k S^{m-k} V_k(x),
//! V_k(x) = int_a^x k psi'(t) (psi(t) - psi(a))^{k-1} f^[n](t) dt.
//! ```
//!
//! The right-sided version uses `S = psi(b) - psi(x)`, a factor `(-1)^n` on the
//! leading term and moments `W_k` over `[x, b]` carrying the same sign.

use crate::error::{Error, Result};
use crate::function::{offset_of, Point, SmoothFn};
use crate::kernels::Kernel;
use crate::operators::{order_n, DerivativeSpec, Side};
use crate::quadrature::legendre;
use crate::special::{gen_binomial, rgamma};

/// Below this psi-distance from the base point the approximation is taken as 0.
const BASE_CUTOFF: f64 = 1e-12;
const CELL_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCoefficients {
    pub alpha: f64,
    pub n: usize,
    /// Truncation order `N`.
    pub truncation: usize,
    pub a_n: f64,
    /// `B_1 .. B_N`.
    pub b: Vec<f64>,
}

pub fn coefficients(alpha: f64, truncation: usize) -> Result<DecompositionCoefficients> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("order must be positive, got {alpha}")));
    }
    if alpha == alpha.floor() {
        return Err(Error::IntegerOrder(alpha));
    }
    if truncation == 0 {
        return Err(Error::Domain("truncation order must be at least 1".into()));
    }
    let n = order_n(alpha);
    let m = n as f64 - alpha;
    let scale = rgamma(m + 1.0);
    let b: Vec<f64> = (1..=truncation)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * gen_binomial(m, k) * scale
        })
        .collect();
    let a_n = scale + b.iter().sum::<f64>();
    Ok(DecompositionCoefficients {
        alpha,
        n,
        truncation,
        a_n,
        b,
    })
}

/// Moments `V_1 .. V_N` (or `W_k` on the right) at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub x: f64,
    pub v: Vec<f64>,
}

fn check_grid(side: Side, base: f64, grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&base) {
        return Err(Error::Domain(format!("grid must start at the base point {base}")));
    }
    let monotone = grid.windows(2).all(|w| match side {
        Side::Left => w[1] > w[0],
        Side::Right => w[1] < w[0],
    });
    if !monotone {
        return Err(Error::Domain("grid must move strictly away from the base point".into()));
    }
    Ok(())
}

/// Cumulative moments along `grid`, which starts at `base` and moves away from it
/// (ascending on the left, descending on the right). Gauss–Legendre, 8 nodes per cell.
pub fn moments(
    kernel: &Kernel,
    f: &SmoothFn,
    side: Side,
    base: f64,
    grid: &[f64],
    truncation: usize,
    n: usize,
) -> Result<Vec<MomentState>> {
    check_grid(side, base, grid)?;
    let sign = match side {
        Side::Right if n % 2 == 1 => -1.0,
        _ => 1.0,
    };
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = vec![0.0; truncation];
    out.push(MomentState { x: base, v: acc.clone() });
    for w in grid.windows(2) {
        let (lo, hi) = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
        for (k, slot) in acc.iter_mut().enumerate() {
            let k = k + 1;
            let cell = legendre(CELL_NODES, lo, hi, |t| {
                let s = offset_of(kernel, side, base, t);
                Ok(k as f64 * kernel.dpsi(t) * s.powi(k as i32 - 1) * f.eval(kernel, n, Point::at(t))?)
            })?;
            *slot += sign * cell;
        }
        out.push(MomentState { x: w[1], v: acc.clone() });
    }
    Ok(out)
}

/// `S^{power} V`, evaluated through logarithms so large negative powers do not overflow.
pub(crate) fn scaled(s: f64, power: f64, v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        (power * s.ln()).exp() * v
    }
}

/// Truncated approximation of the derivative at every point of `grid`.
pub fn approx_derivative(
    kernel: &Kernel,
    f: &SmoothFn,
    spec: &DerivativeSpec,
    grid: &[f64],
    truncation: usize,
) -> Result<Vec<f64>> {
    let c = coefficients(spec.alpha, truncation)?;
    let base = spec.base();
    let states = moments(kernel, f, spec.side, base, grid, truncation, c.n)?;
    let m = c.n as f64 - spec.alpha;
    let lead_sign = match spec.side {
        Side::Right if c.n % 2 == 1 => -1.0,
        _ => 1.0,
    };
    states
        .iter()
        .map(|st| {
            let s = offset_of(kernel, spec.side, base, st.x);
            if s < BASE_CUTOFF {
                return Ok(0.0);
            }
            let lead = lead_sign * c.a_n * s.powf(m) * f.eval(kernel, c.n, Point::at(st.x))?;
            let tail: f64 = c
                .b
                .iter()
                .zip(&st.v)
                .enumerate()
                .map(|(k, (bk, vk))| bk * scaled(s, m - (k + 1) as f64, *vk))
                .sum();
            Ok(lead - tail)
        })
        .collect()
}

/// Truncation error bound
/// `M S^m |x - base| exp(m^2 + m) / (m Gamma(m + 1) N^m)`, where `M` bounds
/// `|d/dt f^[n](t)|` between the base point and `x`.
pub fn error_bound(
    derivative_bound: f64,
    kernel: &Kernel,
    alpha: f64,
    side: Side,
    base: f64,
    x: f64,
    truncation: usize,
) -> f64 {
    let m = order_n(alpha) as f64 - alpha;
    let s = offset_of(kernel, side, base, x);
    derivative_bound * s.powf(m) * (x - base).abs() * (m * m + m).exp() * rgamma(m + 1.0)
        / (m * (truncation as f64).powf(m))
}
