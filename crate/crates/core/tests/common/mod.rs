//! Shared identity checks. Each returns the worst deviation observed together
//! with the tolerance it is held to.
#![allow(dead_code)]

use psifrac::function::{derivs, real_fn, SmoothFn};
use psifrac::kernels::{builtin_kernel, Interval, Kernel};
use psifrac::operators::{
    caputo_derivative, frac_integral, power_rule, psi_weighted_derivative, rl_derivative, DerivativeSpec, Side,
};
use psifrac::quadrature::{graded_both, QuadConfig};
use psifrac::special::{gamma, rgamma, MLConfig};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, error: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            error,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.error <= self.tol
    }
}

pub fn kernel(name: &str) -> Kernel {
    builtin_kernel(name, &[]).unwrap()
}

pub fn iv(a: f64, b: f64) -> Interval {
    Interval::new(a, b).unwrap()
}

pub fn q() -> QuadConfig {
    QuadConfig::default()
}

/// `cos x + x`, with `f(0) = 1` and `f'(0) = 1` so Taylor corrections are visible.
pub fn wave() -> SmoothFn {
    SmoothFn::with_derivatives(
        |x: f64| x.cos() + x,
        derivs([
            real_fn(|x: f64| 1.0 - x.sin()),
            real_fn(|x: f64| -x.cos()),
            real_fn(|x: f64| x.sin()),
        ]),
    )
}

fn interior(iv: &Interval, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|j| iv.a + (iv.b - iv.a) * j as f64 / (count + 1) as f64)
        .collect()
}

fn closed(iv: &Interval, count: usize) -> Vec<f64> {
    (1..=count).map(|j| iv.a + (iv.b - iv.a) * j as f64 / count as f64).collect()
}

/// `D^alpha f` as a plain function of `x`, for nesting inside other operators.
fn derivative_fn(k: &Kernel, spec: DerivativeSpec, f: &SmoothFn) -> SmoothFn {
    let (k, f) = (k.clone(), f.clone());
    let q = q();
    SmoothFn::finite_difference(move |x| caputo_derivative(&k, &spec, &f, x, &q).unwrap_or(f64::NAN))
}

fn integral_fn(k: &Kernel, alpha: f64, iv: Interval, f: &SmoothFn) -> SmoothFn {
    let (k, f) = (k.clone(), f.clone());
    let q = q();
    SmoothFn::finite_difference(move |x| frac_integral(&k, alpha, Side::Left, &iv, &f, x, &q).unwrap_or(f64::NAN))
}

pub const POWER_KERNELS: [&str; 3] = ["linear", "log1p", "sqrt1p"];
pub const POWER_ALPHAS: [f64; 4] = [0.3, 0.5, 0.8, 1.5];
pub const POWER_BETAS: [f64; 3] = [2.5, 3.0, 4.0];

/// Quadrature against the closed-form power rule, worst relative error over
/// the 36 cases and 20 points each.
pub fn power_rule_grid() -> Check {
    let range = iv(0.0, 2.0);
    let mut worst = 0.0f64;
    for name in POWER_KERNELS {
        let k = kernel(name);
        for alpha in POWER_ALPHAS {
            let spec = DerivativeSpec::left(alpha, range).unwrap();
            for beta in POWER_BETAS {
                let f = SmoothFn::psi_power(&k, Side::Left, range.a, beta - 1.0);
                for x in closed(&range, 20) {
                    let exact = power_rule(&k, alpha, Side::Left, &range, beta, x).unwrap();
                    let got = caputo_derivative(&k, &spec, &f, x, &q()).unwrap_or(f64::NAN);
                    worst = worst.max(((got - exact) / exact).abs());
                }
            }
        }
    }
    Check::new("power rule, 36 cases", worst, 1e-6)
}

pub fn eigenfunction() -> Check {
    let range = iv(0.0, 2.0);
    let mut worst = 0.0f64;
    for name in POWER_KERNELS {
        let k = kernel(name);
        for alpha in POWER_ALPHAS {
            let spec = DerivativeSpec::left(alpha, range).unwrap();
            for lambda in [-1.0, 0.5, 1.0] {
                let f = SmoothFn::psi_mittag_leffler(&k, Side::Left, range.a, alpha, lambda, MLConfig::default());
                for x in closed(&range, 20) {
                    let lf = lambda * f.value(x);
                    let got = caputo_derivative(&k, &spec, &f, x, &q()).unwrap_or(f64::NAN);
                    worst = worst.max((got - lf).abs() / (1.0 + lf.abs()));
                }
            }
        }
    }
    Check::new("Mittag-Leffler eigenfunction", worst, 1e-5)
}

pub fn integral_semigroup() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let f = wave();
    let mut worst = 0.0f64;
    for (alpha, beta) in [(0.3, 0.4), (0.5, 0.5), (1.2, 0.6)] {
        let inner = integral_fn(&k, beta, range, &f);
        for x in interior(&range, 5) {
            let nested = frac_integral(&k, alpha, Side::Left, &range, &inner, x, &q()).unwrap_or(f64::NAN);
            let direct = frac_integral(&k, alpha + beta, Side::Left, &range, &f, x, &q()).unwrap();
            worst = worst.max((nested - direct).abs());
        }
    }
    Check::new("integral semigroup", worst, 1e-6)
}

/// `I^alpha D^alpha f = f - sum_{k<n} f^[k](a) s^k / k!`.
pub fn integral_of_derivative() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let f = wave();
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.5] {
        let spec = DerivativeSpec::left(alpha, range).unwrap();
        let d = derivative_fn(&k, spec, &f);
        for x in interior(&range, 5) {
            let s = k.psi(x) - k.psi(range.a);
            let mut taylor = f.value(range.a);
            if alpha > 1.0 {
                taylor += psi_weighted_derivative(&k, &f, 1, range.a).unwrap() * s;
            }
            let got = frac_integral(&k, alpha, Side::Left, &range, &d, x, &q()).unwrap_or(f64::NAN);
            worst = worst.max((got - (f.value(x) - taylor)).abs());
        }
    }
    Check::new("I^a D^a f = f - Taylor", worst, 1e-5)
}

/// `D^alpha I^alpha f = f`, with the psi-derivatives of `I^alpha f` written as
/// boundary terms plus `I^alpha f^[j]`.
pub fn derivative_of_integral() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let f = wave();
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.5] {
        let n = if alpha < 1.0 { 1 } else { 2 };
        let at_a: Vec<f64> = (0..n)
            .map(|j| psi_weighted_derivative(&k, &f, j, range.a).unwrap())
            .collect();
        let mut ds = Vec::new();
        for order in 1..=n {
            let (kk, fj, at_a) = (k.clone(), f.psi_derivative_fn(&k, order), at_a.clone());
            let psi_a = k.psi(range.a);
            ds.push(real_fn(move |x: f64| {
                let s = kk.psi(x) - psi_a;
                let mut v = frac_integral(&kk, alpha, Side::Left, &range, &fj, x, &q()).unwrap_or(f64::NAN);
                for (j, c) in at_a.iter().enumerate().take(order) {
                    let p = alpha - order as f64 + j as f64;
                    v += c * s.powf(p) * rgamma(p + 1.0);
                }
                v
            }));
        }
        let value = {
            let (kk, ff) = (k.clone(), f.clone());
            move |x: f64| frac_integral(&kk, alpha, Side::Left, &range, &ff, x, &q()).unwrap_or(f64::NAN)
        };
        let g = SmoothFn::with_psi_derivatives(&k, value, ds);
        let spec = DerivativeSpec::left(alpha, range).unwrap();
        for x in interior(&range, 5) {
            let got = caputo_derivative(&k, &spec, &g, x, &q()).unwrap_or(f64::NAN);
            worst = worst.max((got - f.value(x)).abs());
        }
    }
    Check::new("D^a I^a f = f", worst, 1e-5)
}

/// Caputo equals Riemann–Liouville of `f` minus its Taylor polynomial at `a`.
pub fn caputo_vs_riemann_liouville() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let f = wave();
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.5] {
        let spec = DerivativeSpec::left(alpha, range).unwrap();
        let n = spec.n();
        let coeffs: Vec<f64> = (0..n)
            .map(|j| psi_weighted_derivative(&k, &f, j, range.a).unwrap() * rgamma(j as f64 + 1.0))
            .collect();
        let (kk, ff) = (k.clone(), f.clone());
        let psi_a = k.psi(range.a);
        let g = SmoothFn::finite_difference(move |x| {
            let s = kk.psi(x) - psi_a;
            ff.value(x) - coeffs.iter().enumerate().map(|(j, c)| c * s.powi(j as i32)).sum::<f64>()
        });
        for x in interior(&range, 5) {
            let c = caputo_derivative(&k, &spec, &f, x, &q()).unwrap();
            let rl = rl_derivative(&k, &spec, &g, x, &q()).unwrap_or(f64::NAN);
            worst = worst.max((c - rl).abs());
        }
    }
    Check::new("Caputo vs Riemann-Liouville", worst, 5e-4)
}

/// `I^alpha D^alpha f(x)` equals `D^alpha f(c) s^alpha / Gamma(alpha + 1)` for some `c`:
/// the scaled value must sit inside the range of `D^alpha f` over `(a, x)`.
pub fn integral_mean_value() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("sqrt1p");
    let f = wave();
    let alpha = 0.5;
    let spec = DerivativeSpec::left(alpha, range).unwrap();
    let d = derivative_fn(&k, spec, &f);
    let mut worst = 0.0f64;
    for x in interior(&range, 3) {
        let s = k.psi(x) - k.psi(range.a);
        let scaled = frac_integral(&k, alpha, Side::Left, &range, &d, x, &q()).unwrap_or(f64::NAN)
            * gamma(alpha + 1.0).unwrap()
            / s.powf(alpha);
        worst = worst.max(bracket_excess(scaled, &sample_values(&d, range.a, x, 400)));
    }
    Check::new("I^a D^a f mean-value bracket", worst, 1e-6)
}

fn sample_values(d: &SmoothFn, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..count).map(|j| d.value(lo + (hi - lo) * j as f64 / count as f64)).collect()
}

/// Distance by which `v` falls outside `[min, max]` of `values`.
fn bracket_excess(v: f64, values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !v.is_finite() {
        return f64::INFINITY;
    }
    (lo - v).max(v - hi).max(0.0)
}

/// `D^alpha (f^[1]) = D^{alpha + 1} f`.
pub fn composition_with_psi_derivative() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let f = wave();
    let df = f.psi_derivative_fn(&k, 1);
    let lhs = DerivativeSpec::left(0.5, range).unwrap();
    let rhs = DerivativeSpec::left(1.5, range).unwrap();
    let mut worst = 0.0f64;
    for x in interior(&range, 8) {
        let a = caputo_derivative(&k, &lhs, &df, x, &q()).unwrap();
        let b = caputo_derivative(&k, &rhs, &f, x, &q()).unwrap();
        worst = worst.max((a - b).abs());
    }
    Check::new("D^a f^[1] = D^(a+1) f", worst, 1e-5)
}

/// `f^[1]` of `D^alpha f` picks up the boundary term `s^{n-alpha-1} f^[n](a) / Gamma(n-alpha)`.
pub fn psi_derivative_of_caputo() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let f = wave();
    let alpha = 0.5;
    let spec = DerivativeSpec::left(alpha, range).unwrap();
    let up = DerivativeSpec::left(alpha + 1.0, range).unwrap();
    let f1a = psi_weighted_derivative(&k, &f, 1, range.a).unwrap();
    let h = 1e-3;
    let mut worst = 0.0f64;
    for x in interior(&range, 5) {
        let y = k.psi(x);
        let at = |dy: f64| {
            let t = k.inverse(y + dy, range.a, range.b).unwrap();
            caputo_derivative(&k, &spec, &f, t, &q()).unwrap()
        };
        // fourth-order central difference in psi
        let dd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
        let s = y - k.psi(range.a);
        let expected = caputo_derivative(&k, &up, &f, x, &q()).unwrap() + s.powf(-alpha) * rgamma(1.0 - alpha) * f1a;
        worst = worst.max((dd - expected).abs());
    }
    Check::new("f^[1] of D^a f", worst, 1e-5)
}

/// Outer derivative of an inner Caputo derivative. The inner one vanishes at
/// `a`, so the outer Caputo derivative is its Riemann–Liouville form.
fn nested_derivative(k: &Kernel, range: Interval, f: &SmoothFn, outer: f64, inner: f64, x: f64) -> f64 {
    let g = derivative_fn(k, DerivativeSpec::left(inner, range).unwrap(), f);
    let spec = DerivativeSpec::left(outer, range).unwrap();
    rl_derivative(k, &spec, &g, x, &q()).unwrap_or(f64::NAN)
}

/// `D^0.3 D^0.5 f = D^0.8 f`.
pub fn derivative_semigroup() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let f = wave();
    let spec = DerivativeSpec::left(0.8, range).unwrap();
    let mut worst = 0.0f64;
    for x in interior(&range, 4) {
        let nested = nested_derivative(&k, range, &f, 0.3, 0.5, x);
        let direct = caputo_derivative(&k, &spec, &f, x, &q()).unwrap();
        worst = worst.max((nested - direct).abs());
    }
    Check::new("D^0.3 D^0.5 f = D^0.8 f", worst, 1e-4)
}

/// `D^{1-alpha} D^alpha f = f^[1]`.
pub fn complementary_orders() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("sqrt1p");
    let f = wave();
    let mut worst = 0.0f64;
    for x in interior(&range, 4) {
        let nested = nested_derivative(&k, range, &f, 0.7, 0.3, x);
        let direct = psi_weighted_derivative(&k, &f, 1, x).unwrap();
        worst = worst.max((nested - direct).abs());
    }
    Check::new("D^0.7 D^0.3 f = f^[1]", worst, 1e-4)
}

/// Integration by parts with `0 < alpha < 1`:
/// `int f D_{a+} g dx = int D^RL_{b-}(f/psi') g psi' dx - I^{1-alpha}_{b-}(f/psi')(a) g(a)`.
/// The right Riemann–Liouville derivative is written as the right Caputo one plus
/// `phi(b) (psi(b) - psi(x))^{-alpha} / Gamma(1 - alpha)`.
pub fn integration_by_parts() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("log1p");
    let alpha = 0.5;
    let g = wave();
    // f = psi' e^{-x}, so phi = f / psi' = e^{-x}
    let phi = SmoothFn::with_derivatives(
        |x: f64| (-x).exp(),
        derivs([real_fn(|x: f64| -(-x).exp()), real_fn(|x: f64| (-x).exp())]),
    );
    let left = DerivativeSpec::left(alpha, range).unwrap();
    let right = DerivativeSpec::right(alpha, range).unwrap();
    let qc = q();
    let lhs = graded_both(&qc, range.a, range.b, |x, _, _| {
        Ok(k.dpsi(x) * phi.value(x) * caputo_derivative(&k, &left, &g, x, &qc)?)
    })
    .unwrap_or(f64::NAN);
    let phi_b = phi.value(range.b);
    let body = graded_both(&qc, range.a, range.b, |x, _, to_b| {
        // psi(b) - psi(x) for log1p, without cancellation next to b
        let gap = (to_b / (1.0 + x)).ln_1p();
        let tail = gap.powf(-alpha) * rgamma(1.0 - alpha) * phi_b;
        Ok((caputo_derivative(&k, &right, &phi, x, &qc)? + tail) * g.value(x) * k.dpsi(x))
    })
    .unwrap_or(f64::NAN);
    let boundary = frac_integral(&k, 1.0 - alpha, Side::Right, &range, &phi, range.a, &qc).unwrap() * g.value(range.a);
    Check::new("integration by parts", (lhs - (body - boundary)).abs(), 1e-6)
}

/// Left and right derivatives at an interior maximum are non-negative.
pub fn fermat_sign() -> Check {
    let alpha = 0.5;
    let mut worst = f64::NEG_INFINITY;
    // 2x - x^2 on [0, 2], maximum at 1
    let hump = SmoothFn::with_derivatives(
        |x: f64| 2.0 * x - x * x,
        derivs([real_fn(|x: f64| 2.0 - 2.0 * x), real_fn(|_| -2.0), real_fn(|_| 0.0)]),
    );
    let lin = kernel("linear");
    let r = iv(0.0, 2.0);
    // 2 ln(1+x) - ln^2(1+x) on [0, e^2 - 1], maximum at e - 1
    let lg = kernel("log1p");
    let log_hump = SmoothFn::with_psi_derivatives(
        &lg,
        |x: f64| {
            let l = x.ln_1p();
            2.0 * l - l * l
        },
        derivs([real_fn(|x: f64| 2.0 - 2.0 * x.ln_1p()), real_fn(|_| -2.0)]),
    );
    let e = std::f64::consts::E;
    let rl = iv(0.0, e * e - 1.0);
    for (k, f, range, star) in [(&lin, &hump, r, 1.0), (&lg, &log_hump, rl, e - 1.0)] {
        for side in [Side::Left, Side::Right] {
            let spec = DerivativeSpec::new(alpha, side, range).unwrap();
            let v = caputo_derivative(k, &spec, f, star, &q()).unwrap_or(f64::NAN);
            worst = worst.max(-v);
            if v.is_nan() {
                worst = f64::INFINITY;
            }
        }
    }
    Check::new("Fermat sign at a maximum", worst.max(0.0), 1e-9)
}

/// `Gamma(alpha + 1)(f(x) - f(a)) / s^alpha` lies between the extremes of `D^alpha f` on `(a, x)`.
pub fn mean_value() -> Check {
    let range = iv(0.0, 2.0);
    let mut worst = 0.0f64;
    for name in ["linear", "log1p", "sqrt1p"] {
        let k = kernel(name);
        for alpha in [0.3, 0.7] {
            let spec = DerivativeSpec::left(alpha, range).unwrap();
            let f = wave();
            let d = derivative_fn(&k, spec, &f);
            for x in interior(&range, 3) {
                let s = k.psi(x) - k.psi(range.a);
                let v = gamma(alpha + 1.0).unwrap() * (f.value(x) - f.value(range.a)) / s.powf(alpha);
                worst = worst.max(bracket_excess(v, &sample_values(&d, range.a, x, 400)));
            }
        }
    }
    Check::new("mean-value bracket", worst, 1e-6)
}

/// `alpha -> 1-` recovers `f^[1]`.
pub fn near_integer_limit() -> Check {
    let range = iv(0.0, 2.0);
    let spec = DerivativeSpec::left(0.999, range).unwrap();
    let mut worst = 0.0f64;
    for name in ["linear", "log1p", "sqrt1p"] {
        let k = kernel(name);
        let f = wave();
        for x in interior(&range, 8) {
            let d = caputo_derivative(&k, &spec, &f, x, &q()).unwrap();
            worst = worst.max((d - psi_weighted_derivative(&k, &f, 1, x).unwrap()).abs());
        }
    }
    Check::new("alpha -> 1 limit", worst, 5e-3)
}

/// For the linear kernel the right derivative of `f` at `x` is the left
/// derivative of `u -> f(a + b - u)` at `a + b - x`.
pub fn mirror() -> Check {
    let range = iv(0.0, 2.0);
    let k = kernel("linear");
    let f = wave();
    let m = range.a + range.b;
    let mirrored = SmoothFn::with_derivatives(
        move |u: f64| (m - u).cos() + (m - u),
        derivs([
            real_fn(move |u: f64| (m - u).sin() - 1.0),
            real_fn(move |u: f64| -(m - u).cos()),
            real_fn(move |u: f64| -(m - u).sin()),
        ]),
    );
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.5] {
        let right = DerivativeSpec::right(alpha, range).unwrap();
        let left = DerivativeSpec::left(alpha, range).unwrap();
        for x in interior(&range, 8) {
            let r = caputo_derivative(&k, &right, &f, x, &q()).unwrap();
            let l = caputo_derivative(&k, &left, &mirrored, range.a + range.b - x, &q()).unwrap();
            worst = worst.max((r - l).abs());
        }
    }
    Check::new("left/right mirror", worst, 1e-8)
}

/// Every operator identity, in a fixed order.
pub fn identity_suite() -> Vec<Check> {
    vec![
        eigenfunction(),
        integral_semigroup(),
        integral_of_derivative(),
        derivative_of_integral(),
        caputo_vs_riemann_liouville(),
        integral_mean_value(),
        composition_with_psi_derivative(),
        psi_derivative_of_caputo(),
        derivative_semigroup(),
        complementary_orders(),
        integration_by_parts(),
        fermat_sign(),
        mean_value(),
        near_integer_limit(),
        mirror(),
    ]
}
