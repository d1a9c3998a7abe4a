//! Quadrature on the unit interval for the weakly singular integrals that the
//! fractional operators reduce to after mapping `t` onto `u in [0, 1]`.
//!
//! The moving endpoint `u = 1` carries the exact Jacobi weight `(1 - u)^mu`.
//! The base point `u = 0` is where `f^[n]` may itself blow up (power functions,
//! Mittag-Leffler eigenfunctions), so `[0, 1/2]` is split into dyadic panels
//! with the innermost one integrated after the substitution `u = delta v^16`.

use crate::error::{Error, Result};
use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};
use std::cell::RefCell;
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::rc::Rc;

/// Rule size and panel refinement for the singular quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Gauss rule size per panel.
    pub nodes: usize,
    /// Refinement level; level `r` uses `4 r` dyadic panels toward the base point.
    pub refinement: usize,
    /// Required agreement between levels `r` and `r + 1`, relative to `1 + |value|`.
    pub tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            nodes: 40,
            refinement: 4,
            tol: 1e-9,
        }
    }
}

impl QuadConfig {
    pub fn new(nodes: usize, refinement: usize) -> Result<Self> {
        let cfg = Self {
            nodes,
            refinement,
            ..Self::default()
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.nodes < 2 || self.refinement < 1 || !(self.tol > 0.0) {
            return Err(Error::Domain(format!(
                "QuadConfig requires nodes >= 2, refinement >= 1, tol > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    fn levels(&self, refinement: usize) -> usize {
        4 * refinement
    }
}

/// Node/weight pairs on a reference interval.
type Rule = Rc<Vec<(f64, f64)>>;

thread_local! {
    static LEGENDRE: RefCell<HashMap<usize, Rule>> = RefCell::new(HashMap::new());
    static JACOBI: RefCell<HashMap<(usize, u64), Rule>> = RefCell::new(HashMap::new());
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
pub(crate) fn legendre_unit(nodes: usize) -> Rule {
    LEGENDRE.with(|cache| {
        cache
            .borrow_mut()
            .entry(nodes)
            .or_insert_with(|| {
                let rule = GaussLegendre::new(NonZeroUsize::new(nodes).expect("nodes >= 1"));
                let mut pairs: Vec<(f64, f64)> = rule
                    .iter()
                    .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                    .collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                Rc::new(pairs)
            })
            .clone()
    })
}

/// Gauss–Jacobi rule for `int_0^1 (1 - u)^mu g(u) du`.
fn jacobi_unit(nodes: usize, mu: f64) -> Rule {
    JACOBI.with(|cache| {
        cache
            .borrow_mut()
            .entry((nodes, mu.to_bits()))
            .or_insert_with(|| {
                let alpha = FiniteAboveNegOneF64::new(mu).expect("Jacobi exponent must exceed -1");
                let beta = FiniteAboveNegOneF64::new(0.0).expect("zero is a valid exponent");
                let rule = GaussJacobi::new(NonZeroUsize::new(nodes).expect("nodes >= 1"), alpha, beta);
                // (1 - x)^mu on [-1, 1] becomes 2^mu (1 - u)^mu on [0, 1]
                let scale = 0.5f64.powf(mu + 1.0);
                let mut pairs: Vec<(f64, f64)> = rule
                    .iter()
                    .map(|(x, w)| (0.5 * (x + 1.0), w * scale))
                    .collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                Rc::new(pairs)
            })
            .clone()
    })
}

/// Plain Gauss–Legendre on `[lo, hi]`.
pub(crate) fn legendre<F: FnMut(f64) -> Result<f64>>(nodes: usize, lo: f64, hi: f64, mut h: F) -> Result<f64> {
    let rule = legendre_unit(nodes);
    let w = hi - lo;
    let mut acc = 0.0;
    for &(u, wt) in rule.iter() {
        acc += wt * h(lo + w * u)?;
    }
    Ok(acc * w)
}

/// `int_0^delta h(u) du` via `u = delta v^16`, which tames `u^gamma`, `gamma > -1`,
/// and logarithmic endpoint behaviour.
fn innermost<F: FnMut(f64) -> Result<f64>>(nodes: usize, delta: f64, h: &mut F) -> Result<f64> {
    let rule = legendre_unit(nodes);
    let mut acc = 0.0;
    for &(v, wt) in rule.iter() {
        let v15 = v.powi(15);
        acc += wt * 16.0 * delta * v15 * h(delta * v15 * v)?;
    }
    Ok(acc)
}

/// Dyadic panels `[c 2^-(j+1), c 2^-j]` for `j = 0 .. levels`, i.e. `int_{c 2^-levels}^c`.
fn dyadic<F: FnMut(f64) -> Result<f64>>(nodes: usize, c: f64, from: usize, to: usize, h: &mut F) -> Result<f64> {
    let mut acc = 0.0;
    for j in from..to {
        let hi = c * 0.5f64.powi(j as i32);
        let lo = 0.5 * hi;
        acc += legendre(nodes, lo, hi, &mut *h)?;
    }
    Ok(acc)
}

/// `int_0^c h(u) du` for `h` with an integrable singularity at `u = 0`,
/// at two refinement levels.
fn graded_pair<F: FnMut(f64) -> Result<f64>>(cfg: &QuadConfig, c: f64, h: &mut F) -> Result<(f64, f64)> {
    let coarse_levels = cfg.levels(cfg.refinement);
    let fine_levels = cfg.levels(cfg.refinement + 1);
    let shared = dyadic(cfg.nodes, c, 0, coarse_levels, h)?;
    let coarse_tail = innermost(cfg.nodes, c * 0.5f64.powi(coarse_levels as i32), h)?;
    let fine_extra = dyadic(cfg.nodes, c, coarse_levels, fine_levels, h)?;
    let fine_tail = innermost(cfg.nodes, c * 0.5f64.powi(fine_levels as i32), h)?;
    Ok((shared + coarse_tail, shared + fine_extra + fine_tail))
}

fn agree(cfg: &QuadConfig, coarse: f64, fine: f64) -> Result<f64> {
    if !fine.is_finite() || (coarse - fine).abs() > cfg.tol * (1.0 + fine.abs()) {
        return Err(Error::QuadratureNonConvergence { coarse, fine });
    }
    Ok(fine)
}

/// `int_0^1 (1 - u)^mu g(u) du`, `mu > -1`, where `g` is smooth near `u = 1`
/// and may have an integrable singularity at `u = 0`.
pub fn jacobi_weighted<F: FnMut(f64) -> Result<f64>>(cfg: &QuadConfig, mu: f64, mut g: F) -> Result<f64> {
    cfg.check()?;
    if !(mu > -1.0) {
        return Err(Error::Domain(format!("Jacobi exponent must exceed -1, got {mu}")));
    }
    let rule = jacobi_unit(cfg.nodes, mu);
    // right half: u = 1/2 + s/2, (1-u)^mu = 2^-mu (1-s)^mu, du = ds/2
    let scale = 0.5f64.powf(mu + 1.0);
    let mut right = 0.0;
    for &(s, w) in rule.iter() {
        right += w * g(0.5 + 0.5 * s)?;
    }
    right *= scale;
    let mut h = |u: f64| -> Result<f64> { Ok((1.0 - u).powf(mu) * g(u)?) };
    let (coarse, fine) = graded_pair(cfg, 0.5, &mut h)?;
    agree(cfg, right + coarse, right + fine)
}

/// `int_0^1 ln(1 - u) g(u) du` with `g` possibly singular at `u = 0`.
pub fn log_weighted<F: FnMut(f64) -> Result<f64>>(cfg: &QuadConfig, mut g: F) -> Result<f64> {
    cfg.check()?;
    let (lc, lf) = {
        let mut h = |u: f64| -> Result<f64> { Ok((-u).ln_1p() * g(u)?) };
        graded_pair(cfg, 0.5, &mut h)?
    };
    let (rc, rf) = {
        let mut h = |v: f64| -> Result<f64> { Ok(v.ln() * g(1.0 - v)?) };
        graded_pair(cfg, 0.5, &mut h)?
    };
    agree(cfg, lc + rc, lf + rf)
}

/// `int_lo^hi h(t) dt` for `h` singular at both ends, graded toward each.
///
/// `h` receives `(t, t - lo, hi - t)`, the distances computed without cancellation.
pub fn graded_both<F: FnMut(f64, f64, f64) -> Result<f64>>(cfg: &QuadConfig, lo: f64, hi: f64, mut h: F) -> Result<f64> {
    cfg.check()?;
    let w = hi - lo;
    let (lc, lf) = {
        let mut hl = |u: f64| -> Result<f64> { h(lo + w * u, w * u, w * (1.0 - u)) };
        graded_pair(cfg, 0.5, &mut hl)?
    };
    let (rc, rf) = {
        let mut hr = |v: f64| -> Result<f64> { h(hi - w * v, w * (1.0 - v), w * v) };
        graded_pair(cfg, 0.5, &mut hr)?
    };
    agree(cfg, w * (lc + rc), w * (lf + rf))
}
