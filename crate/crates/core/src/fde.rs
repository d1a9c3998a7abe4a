//! Initial-value problems `D^{alpha,psi}_{a+} f(x) = g(x, f(x))`, `f(a) = f0`,
//! `alpha in (0, 1)`, reduced to an ordinary system through the truncated
//! decomposition and integrated with fixed-step RK4.
//!
//! State is `(f, V_1, .., V_N)` with
//!
//! ```text
//! f'   = [g(x, f) + sum_k B_k S^{1-alpha-k} V_k] psi'(x) / (A_N S^{1-alpha})
//! V_k' = k S^{k-1} f'
//! ```

use crate::decomposition::{coefficients, scaled, DecompositionCoefficients};
use crate::error::{Error, Result};
use crate::kernels::{validate, Interval, Kernel};
use crate::special::{mittag_leffler, MLConfig};
use std::io::Write;
use std::sync::Arc;

pub type Rhs = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const VALIDATION_SAMPLES: usize = 64;
const MAX_CHECKED_TRUNCATION: usize = 64;

#[derive(Clone)]
pub struct CauchyProblem {
    pub kernel: Kernel,
    pub alpha: f64,
    pub interval: Interval,
    pub rhs: Rhs,
    pub f0: f64,
}

impl std::fmt::Debug for CauchyProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchyProblem")
            .field("kernel", &self.kernel.to_string())
            .field("alpha", &self.alpha)
            .field("interval", &self.interval)
            .field("f0", &self.f0)
            .finish()
    }
}

impl CauchyProblem {
    pub fn new<G>(kernel: Kernel, alpha: f64, interval: Interval, rhs: G, f0: f64) -> Result<Self>
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("solver handles alpha in (0, 1), got {alpha}")));
        }
        if !f0.is_finite() {
            return Err(Error::Domain(format!("initial value must be finite, got {f0}")));
        }
        validate(&kernel, &interval, VALIDATION_SAMPLES)?;
        Ok(Self {
            kernel,
            alpha,
            interval,
            rhs: Arc::new(rhs),
            f0,
        })
    }
}

/// The assembled first-order system of dimension `N + 1`.
#[derive(Debug, Clone)]
pub struct OdeSystem {
    problem: CauchyProblem,
    coeffs: DecompositionCoefficients,
    psi_a: f64,
}

impl OdeSystem {
    pub fn dim(&self) -> usize {
        self.coeffs.truncation + 1
    }

    pub fn coefficients(&self) -> &DecompositionCoefficients {
        &self.coeffs
    }

    /// `sum_k k |B_k| / |A_N|`; the memory block contributes an eigenvalue near
    /// `-stiffness * psi' / S`.
    pub fn stiffness(&self) -> f64 {
        let num: f64 = self.coeffs.b.iter().enumerate().map(|(k, b)| (k + 1) as f64 * b.abs()).sum();
        num / self.coeffs.a_n.abs()
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        y[0] = self.problem.f0;
        y
    }

    /// Writes the time derivative of `state` at `x` into `out`.
    pub fn derivative(&self, x: f64, state: &[f64], out: &mut [f64]) {
        let p = &self.problem;
        let one_minus = 1.0 - p.alpha;
        let s = p.kernel.psi(x) - self.psi_a;
        let dpsi = p.kernel.dpsi(x);
        let memory: f64 = self
            .coeffs
            .b
            .iter()
            .zip(&state[1..])
            .enumerate()
            .map(|(k, (bk, vk))| bk * scaled(s, one_minus - (k + 1) as f64, *vk))
            .sum();
        let df = ((p.rhs)(x, state[0]) + memory) * dpsi / (self.coeffs.a_n * s.powf(one_minus));
        out[0] = df;
        let mut sk = 1.0;
        for (k, slot) in out[1..].iter_mut().enumerate() {
            *slot = (k + 1) as f64 * sk * df;
            sk *= s;
        }
    }
}

pub fn assemble(problem: &CauchyProblem, truncation: usize) -> Result<OdeSystem> {
    let coeffs = coefficients(problem.alpha, truncation)?;
    if truncation <= MAX_CHECKED_TRUNCATION && coeffs.a_n == 0.0 {
        return Err(Error::DegenerateCoefficient(truncation));
    }
    Ok(OdeSystem {
        psi_a: problem.kernel.psi(problem.interval.a),
        problem: problem.clone(),
        coeffs,
    })
}

/// Solution on the uniform grid, with the moment columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    /// Row `i` holds `V_1 .. V_N` at `x[i]`.
    pub v: Vec<Vec<f64>>,
    pub truncation: usize,
    pub step: f64,
}

impl Trajectory {
    /// CSV with header `x,f,V1..VN`, shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string(), "f".to_string()];
        header.extend((1..=self.truncation).map(|k| format!("V{k}")));
        out.write_record(&header).map_err(csv_error)?;
        for i in 0..self.x.len() {
            let mut row = vec![self.x[i].to_string(), self.f[i].to_string()];
            row.extend(self.v[i].iter().map(f64::to_string));
            out.write_record(&row).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Classical RK4 on a uniform output grid of `steps` steps.
///
/// The memory terms make the system stiff next to `a`, with eigenvalue about
/// `-c psi'(x) / S(x)`, `c = sum_k k |B_k| / A_N`. Steps whose `h c psi' / S` would
/// leave the RK4 stability interval are split: the first step geometrically from
/// `a + 1e-8 h`, later ones uniformly. The first stage at `x = a` is evaluated at
/// `a + dx/100`, where the system is finite.
pub fn solve(problem: &CauchyProblem, truncation: usize, steps: usize) -> Result<Trajectory> {
    if steps < 10 {
        return Err(Error::Domain(format!("at least 10 steps required, got {steps}")));
    }
    let sys = assemble(problem, truncation)?;
    let iv = problem.interval;
    let h = iv.width() / steps as f64;
    let c = sys.stiffness();
    let mut rk = Rk4::new(sys.dim());
    let mut y = sys.initial_state();
    let mut xs = Vec::with_capacity(steps + 1);
    let mut fs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    xs.push(iv.a);
    fs.push(y[0]);
    vs.push(y[1..].to_vec());

    // geometric grading inside the first step
    let ratio = c / (c + STABLE_Z);
    let levels = if ratio > 0.0 {
        ((STARTUP_DEPTH.ln() / ratio.ln()).ceil() as i32).clamp(0, MAX_SUBSTEPS as i32)
    } else {
        0
    };
    let mut x = iv.a;
    for j in (0..=levels).rev() {
        let next = iv.a + h * ratio.powi(j);
        rk.step(&sys, x, next - x, &mut y, x == iv.a);
        x = next;
    }
    let check = |x: f64, y: &[f64]| -> Result<()> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { x });
        }
        Ok(())
    };
    check(iv.a + h, &y)?;
    xs.push(iv.a + h);
    fs.push(y[0]);
    vs.push(y[1..].to_vec());

    for i in 1..steps {
        let x = iv.a + i as f64 * h;
        let s = problem.kernel.psi(x) - sys.psi_a;
        let z = h * c * problem.kernel.dpsi(x) / s;
        let parts = ((z / STABLE_Z).ceil() as usize).clamp(1, MAX_SUBSTEPS);
        let dx = h / parts as f64;
        for p in 0..parts {
            rk.step(&sys, x + p as f64 * dx, dx, &mut y, false);
        }
        let x_next = if i + 1 == steps { iv.b } else { iv.a + (i + 1) as f64 * h };
        check(x_next, &y)?;
        xs.push(x_next);
        fs.push(y[0]);
        vs.push(y[1..].to_vec());
    }
    Ok(Trajectory {
        x: xs,
        f: fs,
        v: vs,
        truncation,
        step: h,
    })
}

/// Largest `|h lambda|` allowed per RK4 step, inside the real stability bound 2.78.
const STABLE_Z: f64 = 1.5;
const STARTUP_DEPTH: f64 = 1e-8;
const MAX_SUBSTEPS: usize = 100_000;

struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self {
            k: [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, sys: &OdeSystem, x: f64, dx: f64, y: &mut [f64], at_base: bool) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        let x1 = if at_base { x + dx / 100.0 } else { x };
        sys.derivative(x1, y, k1);
        for j in 0..y.len() {
            tmp[j] = y[j] + 0.5 * dx * k1[j];
        }
        sys.derivative(x + 0.5 * dx, tmp, k2);
        for j in 0..y.len() {
            tmp[j] = y[j] + 0.5 * dx * k2[j];
        }
        sys.derivative(x + 0.5 * dx, tmp, k3);
        for j in 0..y.len() {
            tmp[j] = y[j] + dx * k3[j];
        }
        sys.derivative(x + dx, tmp, k4);
        for j in 0..y.len() {
            y[j] += dx / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
}

/// `N0 E_alpha(lambda (psi(t) - psi(0))^alpha)`, the solution of `D f = lambda f`, `f(0) = N0`.
pub fn analytic_linear(kernel: &Kernel, alpha: f64, lambda: f64, n0: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    let s = kernel.psi(t) - kernel.psi(0.0);
    Ok(n0 * mittag_leffler(alpha, lambda * s.powf(alpha), &MLConfig::default())?)
}
