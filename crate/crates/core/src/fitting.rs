//! Population-growth models `N(t) = N0 exp(lambda t)` and
//! `N(t) = N0 E_alpha(lambda (psi(t) - psi(0))^alpha)`, fitted by least squares.

use crate::error::{Error, Result};
use crate::kernels::{builtin_kernel, Kernel};
use crate::special::{mittag_leffler, MLConfig};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub base_year: i64,
    pub time_unit_years: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    year: i64,
    population: f64,
}

impl Dataset {
    pub fn from_years(years: &[i64], values: &[f64], time_unit_years: f64) -> Result<Self> {
        if years.len() != values.len() || years.len() < 2 {
            return Err(Error::Dataset(format!(
                "need at least two (year, population) pairs, got {} years and {} values",
                years.len(),
                values.len()
            )));
        }
        if !(time_unit_years > 0.0) {
            return Err(Error::Dataset(format!("time unit must be positive, got {time_unit_years}")));
        }
        if years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Dataset("years must be strictly ascending".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Dataset(format!("population must be positive, got {v}")));
        }
        let base_year = years[0];
        Ok(Self {
            times: years.iter().map(|y| (y - base_year) as f64 / time_unit_years).collect(),
            values: values.to_vec(),
            base_year,
            time_unit_years,
        })
    }

    /// Reads `year,population` CSV.
    pub fn from_reader<R: Read>(reader: R, time_unit_years: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Dataset(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["year", "population"] {
            return Err(Error::Dataset(format!(
                "expected header `year,population`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut years = Vec::new();
        let mut values = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Dataset(format!("row {}: {e}", i + 1)))?;
            years.push(row.year);
            values.push(row.population);
        }
        Self::from_years(&years, &values, time_unit_years)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn load_csv(path: impl AsRef<Path>, time_unit_years: f64) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Dataset::from_reader(file, time_unit_years)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Classical,
    Fractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Lambda,
    Alpha,
    B,
    N0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum N0Policy {
    FirstDatum,
    Free,
}

/// Model parameters. `b` applies to the `pow1p` kernel only; `n0` is filled in
/// from the data under [`N0Policy::FirstDatum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub lambda: f64,
    pub alpha: f64,
    pub b: Option<f64>,
    pub n0: Option<f64>,
}

impl Params {
    pub fn new(lambda: f64, alpha: f64) -> Self {
        Self {
            lambda,
            alpha,
            b: None,
            n0: None,
        }
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_n0(mut self, n0: f64) -> Self {
        self.n0 = Some(n0);
        self
    }

    fn get(&self, p: Param) -> f64 {
        match p {
            Param::Lambda => self.lambda,
            Param::Alpha => self.alpha,
            Param::B => self.b.unwrap_or(1.0),
            Param::N0 => self.n0.unwrap_or(f64::NAN),
        }
    }

    fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Lambda => self.lambda = v,
            Param::Alpha => self.alpha = v,
            Param::B => self.b = Some(v),
            Param::N0 => self.n0 = Some(v),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: Family,
    pub kernel: Kernel,
    pub free: Vec<Param>,
    pub n0_policy: N0Policy,
}

impl ModelSpec {
    /// `N0 exp(lambda t)`: alpha fixed at 1, linear kernel.
    pub fn classical() -> Self {
        Self {
            family: Family::Classical,
            kernel: builtin_kernel("linear", &[]).expect("linear kernel exists"),
            free: vec![Param::Lambda],
            n0_policy: N0Policy::FirstDatum,
        }
    }

    pub fn fractional(kernel: Kernel) -> Self {
        Self {
            family: Family::Fractional,
            kernel,
            free: vec![Param::Lambda, Param::Alpha],
            n0_policy: N0Policy::FirstDatum,
        }
    }

    /// Frees the exponent of the `pow1p` kernel.
    pub fn with_free_b(mut self) -> Result<Self> {
        if self.family != Family::Fractional || self.kernel.name() != "pow1p" {
            return Err(Error::Model(format!("b can only be freed for the pow1p kernel, not `{}`", self.kernel)));
        }
        if !self.free.contains(&Param::B) {
            self.free.push(Param::B);
        }
        Ok(self)
    }

    pub fn with_n0_policy(mut self, policy: N0Policy) -> Self {
        self.n0_policy = policy;
        self.free.retain(|p| *p != Param::N0);
        if policy == N0Policy::Free {
            self.free.push(Param::N0);
        }
        self
    }

    fn kernel_for(&self, params: &Params) -> Result<Kernel> {
        match params.b {
            Some(b) if self.kernel.name() == "pow1p" => builtin_kernel("pow1p", &[("b", b)]),
            _ => Ok(self.kernel.clone()),
        }
    }

    /// `params` with `n0` (and `b`, for pow1p) made explicit.
    pub fn resolve(&self, params: &Params, data: &Dataset) -> Params {
        let mut p = *params;
        if self.n0_policy == N0Policy::FirstDatum || p.n0.is_none() {
            p.n0 = Some(data.values[0]);
        }
        if self.kernel.name() == "pow1p" && p.b.is_none() {
            p.b = self.kernel.param("b");
        }
        if self.family == Family::Classical {
            p.alpha = 1.0;
        }
        p
    }

    fn check_params(&self, params: &Params) -> Result<()> {
        let ok = params.lambda.is_finite()
            && (self.family == Family::Classical || (params.alpha > 0.0 && params.alpha.is_finite()))
            && params.b.map_or(true, |b| b > 0.0);
        if !ok {
            return Err(Error::Model(format!("parameters out of range: {params:?}")));
        }
        Ok(())
    }
}

/// Model value at `t`; `params.n0` must be set.
pub fn predict(model: &ModelSpec, params: &Params, t: f64) -> Result<f64> {
    model.check_params(params)?;
    let n0 = params
        .n0
        .ok_or_else(|| Error::Model("initial population N0 not set".into()))?;
    match model.family {
        Family::Classical => Ok(n0 * (params.lambda * t).exp()),
        Family::Fractional => {
            let k = model.kernel_for(params)?;
            let s = k.psi(t) - k.psi(0.0);
            Ok(n0 * mittag_leffler(params.alpha, params.lambda * s.powf(params.alpha), &MLConfig::default())?)
        }
    }
}

pub fn residuals(model: &ModelSpec, params: &Params, data: &Dataset) -> Result<Vec<f64>> {
    let p = model.resolve(params, data);
    data.times
        .iter()
        .zip(&data.values)
        .map(|(&t, &v)| Ok(predict(model, &p, t)? - v))
        .collect()
}

/// Sum of squared residuals.
pub fn sse(model: &ModelSpec, params: &Params, data: &Dataset) -> Result<f64> {
    Ok(residuals(model, params, data)?.iter().map(|r| r * r).sum())
}

/// `100 |P(t*) - observed| / observed`, returned with `P(t*)`.
pub fn projection_error(model: &ModelSpec, params: &Params, t_star: f64, observed: f64) -> Result<(f64, f64)> {
    if !(observed > 0.0) {
        return Err(Error::Model(format!("observed value must be positive, got {observed}")));
    }
    let projected = predict(model, params, t_star)?;
    Ok((projected, 100.0 * (projected - observed).abs() / observed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub lambda_starts: Vec<f64>,
    pub alpha_starts: Vec<f64>,
    pub b_starts: Vec<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            lambda_starts: vec![0.05, 0.1, 0.5, 1.0, 3.0, 5.0],
            alpha_starts: vec![0.8, 1.4, 2.0, 4.0],
            b_starts: vec![0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Params,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
}

fn bounds(p: Param, data: &Dataset) -> (f64, f64) {
    match p {
        Param::Lambda => (0.0, 100.0),
        Param::Alpha => (0.0, 10.0),
        Param::B => (0.0, 5.0),
        Param::N0 => (0.0, 100.0 * data.values[0]),
    }
}

/// Projects onto the box, keeping open lower bounds strictly inside.
fn clamp_param(p: Param, v: f64, data: &Dataset) -> f64 {
    let (lo, hi) = bounds(p, data);
    v.max(lo + 1e-12 * (hi - lo)).min(hi)
}

fn starts(model: &ModelSpec, init: Option<&Params>, data: &Dataset, opts: &FitOptions) -> Vec<Params> {
    let mut out: Vec<Params> = init.map(|p| model.resolve(p, data)).into_iter().collect();
    let alphas: &[f64] = if model.free.contains(&Param::Alpha) { &opts.alpha_starts } else { &[1.0] };
    let bs: Vec<Option<f64>> = if model.free.contains(&Param::B) {
        opts.b_starts.iter().map(|&b| Some(b)).collect()
    } else {
        vec![None]
    };
    for &b in &bs {
        for &lambda in &opts.lambda_starts {
            for &alpha in alphas {
                let mut p = Params::new(lambda, alpha);
                p.b = b;
                out.push(model.resolve(&p, data));
            }
        }
    }
    out
}

/// Multistart Levenberg–Marquardt over the free parameters. Returns the best start;
/// `converged` is false when no start met the stopping rule.
pub fn fit(model: &ModelSpec, data: &Dataset, init: Option<&Params>, opts: &FitOptions) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    for start in starts(model, init, data, opts) {
        let Some(r) = levenberg_marquardt(model, data, start, opts.max_iterations) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => (r.converged && !b.converged) || (r.converged == b.converged && r.sse < b.sse),
        };
        if better {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Model("objective could not be evaluated at any starting point".into()))
}

fn objective(model: &ModelSpec, data: &Dataset, p: &Params) -> Option<(Vec<f64>, f64)> {
    let r = residuals(model, p, data).ok()?;
    let s: f64 = r.iter().map(|v| v * v).sum();
    s.is_finite().then_some((r, s))
}

fn levenberg_marquardt(model: &ModelSpec, data: &Dataset, start: Params, max_iterations: usize) -> Option<FitResult> {
    let free = &model.free;
    let (mut r, mut cost) = objective(model, data, &start)?;
    let mut p = start;
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, free.len());
        for (j, &param) in free.iter().enumerate() {
            let v = p.get(param);
            let h = 1e-6 * v.abs().max(1e-8);
            let mut q = p;
            q.set(param, v + h);
            let (rq, _) = objective(model, data, &q)?;
            for i in 0..m {
                jac[(i, j)] = (rq[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_vec(r.clone());
        // parameters pinned at a bound with the descent direction pointing outward
        let pinned: Vec<bool> = free
            .iter()
            .enumerate()
            .map(|(j, &param)| {
                let (lo, hi) = bounds(param, data);
                let v = p.get(param);
                let tol = 1e-9 * (hi - lo);
                (v - lo <= tol && grad[j] > 0.0) || (hi - v <= tol && grad[j] < 0.0)
            })
            .collect();
        loop {
            let mut a = jtj.clone();
            let mut rhs = -&grad;
            for d in 0..free.len() {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            for (d, _) in pinned.iter().enumerate().filter(|(_, pin)| **pin) {
                a.row_mut(d).fill(0.0);
                a.column_mut(d).fill(0.0);
                a[(d, d)] = 1.0;
                rhs[d] = 0.0;
            }
            let step = a.lu().solve(&rhs);
            let Some(step) = step else {
                mu *= 10.0;
                if mu > 1e20 {
                    break;
                }
                continue;
            };
            let mut q = p;
            for (j, &param) in free.iter().enumerate() {
                q.set(param, clamp_param(param, p.get(param) + step[j], data));
            }
            let moved: f64 = free
                .iter()
                .map(|&param| (q.get(param) - p.get(param)).powi(2))
                .sum::<f64>()
                .sqrt();
            match objective(model, data, &q) {
                Some((rq, cq)) if cq < cost => {
                    let rel = (cost - cq) / cost;
                    p = q;
                    r = rq;
                    cost = cq;
                    mu = (mu / 10.0).max(1e-15);
                    if rel < 1e-10 || moved < 1e-10 {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    if moved < 1e-10 {
                        converged = true;
                        break;
                    }
                    mu *= 10.0;
                    if mu > 1e20 {
                        break;
                    }
                }
            }
        }
        if converged || mu > 1e20 {
            break;
        }
    }
    Some(FitResult {
        params: p,
        sse: cost,
        iterations,
        converged,
        residuals: r,
    })
}

/// One row of the fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub family: Family,
    pub kernel: String,
    pub result: FitResult,
}

/// CSV with header `family,kernel,lambda,alpha,b,sse,converged`.
pub fn write_report<W: Write>(rows: &[ReportRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Io(e.to_string());
    out.write_record(["family", "kernel", "lambda", "alpha", "b", "sse", "converged"])
        .map_err(err)?;
    for row in rows {
        let p = &row.result.params;
        let family = match row.family {
            Family::Classical => "classical",
            Family::Fractional => "fractional",
        };
        out.write_record([
            family.to_string(),
            row.kernel.clone(),
            p.lambda.to_string(),
            p.alpha.to_string(),
            p.b.map(|b| b.to_string()).unwrap_or_default(),
            row.result.sse.to_string(),
            row.result.converged.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}
