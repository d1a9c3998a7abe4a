//! Scalar special functions: Gamma, Beta, generalized binomial coefficients
//! and the one-parameter Mittag-Leffler function.
//!
//! Gamma uses the Lanczos approximation with g = 607/128 and 15 terms
//! (Godfrey's coefficients), reflected for arguments below one half.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 607.0 / 128.0;

const LANCZOS_COEFFS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

pub fn euler_gamma() -> f64 {
    EULER_GAMMA
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument, Gamma(x + 1) = ... * lanczos_sum(x)
    let mut acc = LANCZOS_COEFFS[0];
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    acc
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    if x == x.floor() && x <= 31.0 {
        let mut fact = 1.0;
        let mut k = 2.0;
        while k < x {
            fact *= k;
            k += 1.0;
        }
        return fact;
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    // split the power to postpone overflow near x = 171
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(z)
}

/// Gamma function on the reals, with poles at the nonpositive integers.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() || is_nonpositive_integer(x) {
        return Err(Error::Pole(x));
    }
    Ok(gamma_unchecked(x))
}

/// `1/Gamma(x)`, which is entire: zero at the poles of Gamma.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > 170.0 {
        return (-ln_gamma(x)).exp();
    }
    1.0 / gamma_unchecked(x)
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// Euler Beta function `B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y)`.
pub fn beta(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Domain(format!("beta requires positive arguments, got ({x}, {y})")));
    }
    if x + y < 170.0 {
        Ok(gamma_unchecked(x) * gamma_unchecked(y) / gamma_unchecked(x + y))
    } else {
        Ok((ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp())
    }
}

/// Generalized binomial coefficient `p (p-1) ... (p-k+1) / k!`.
pub fn gen_binomial(p: f64, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c *= (p - j as f64) / (j + 1) as f64;
    }
    c
}

/// Truncation control for the Mittag-Leffler power series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLConfig {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for MLConfig {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_terms: 2000,
        }
    }
}

impl MLConfig {
    pub fn new(tol: f64, max_terms: usize) -> Result<Self> {
        if !(tol > 0.0) || max_terms == 0 {
            return Err(Error::Domain(format!(
                "MLConfig requires tol > 0 and max_terms >= 1, got ({tol}, {max_terms})"
            )));
        }
        Ok(Self { tol, max_terms })
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Term `z^k / Gamma(shift + alpha k)` of a Mittag-Leffler-type series,
/// falling back to logarithms once the direct form would overflow.
pub(crate) fn ml_term(alpha: f64, shift: f64, z: f64, k: usize) -> f64 {
    let g_arg = alpha * k as f64 + shift;
    if k == 0 {
        return rgamma(g_arg);
    }
    if g_arg < 160.0 {
        let p = z.powi(k as i32);
        if p.is_finite() {
            return p * rgamma(g_arg);
        }
    }
    if z == 0.0 || is_nonpositive_integer(g_arg) {
        return 0.0;
    }
    let mag = (k as f64 * z.abs().ln() - ln_gamma(g_arg)).exp();
    if z < 0.0 && k % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// Sums `sum_k z^k / Gamma(shift + alpha k)` over `k >= first`, stopping once two
/// consecutive terms fall below `cfg.tol`.
pub(crate) fn ml_series(alpha: f64, shift: f64, z: f64, first: usize, cfg: &MLConfig) -> Result<f64> {
    let mut acc = CompensatedSum::default();
    let mut small_run = 0;
    for k in first..first + cfg.max_terms {
        let term = ml_term(alpha, shift, z, k);
        acc.add(term);
        // leading terms may vanish at poles of Gamma without the tail being small
        if term.abs() < cfg.tol && alpha * k as f64 + shift > 1.0 {
            small_run += 1;
            if small_run == 2 {
                let v = acc.value();
                if !v.is_finite() {
                    break;
                }
                return Ok(v);
            }
        } else {
            small_run = 0;
        }
        if !term.is_finite() {
            break;
        }
    }
    Err(Error::MittagLefflerNonConvergence {
        alpha,
        z,
        terms: cfg.max_terms,
    })
}

/// One-parameter Mittag-Leffler function `E_alpha(z) = sum_k z^k / Gamma(alpha k + 1)`
/// by direct power series.
pub fn mittag_leffler(alpha: f64, z: f64, cfg: &MLConfig) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("Mittag-Leffler requires alpha > 0, got {alpha}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    ml_series(alpha, 1.0, z, 0, cfg)
}
