//! Covariance of the field and the radial kernels `b_m(r, s)` obtained by
//! expanding it in spherical harmonics.
//!
//! Two independent evaluation paths are provided: a closed form in terms of
//! the Gauss hypergeometric function and a direct quadrature of the
//! Funk-Hecke integral. They serve as oracles for each other.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{gauss_legendre, GaussJacobi};
use crate::specfun::{gamma_ratio, gauss_2f1, gegenbauer_ratio_unchecked, log_gamma};

/// Dimension `N` and Hurst index `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub hurst: f64,
}

impl ModelParams {
    pub fn new(dim: usize, hurst: f64) -> Result<Self> {
        let p = Self { dim, hurst };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return domain("dimension must be at least 1");
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return domain(format!("Hurst index must lie in (0, 1), got {}", self.hurst));
        }
        Ok(())
    }
}

/// A degree-`m` radial kernel of a given model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialKernelSpec {
    pub params: ModelParams,
    pub m: usize,
}

impl RadialKernelSpec {
    pub fn new(params: ModelParams, m: usize) -> Result<Self> {
        params.validate()?;
        if params.dim < 2 {
            return domain("radial kernels need dimension N >= 2");
        }
        Ok(Self { params, m })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `R(x, y) = (|x|^{2H} + |y|^{2H} - |x - y|^{2H}) / 2`.
pub fn covariance(x: &[f64], y: &[f64], params: &ModelParams) -> f64 {
    let h2 = 2.0 * params.hurst;
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    0.5 * (norm(x).powf(h2) + norm(y).powf(h2) - d.powf(h2))
}

/// Covariance as a function of the two radii and the cosine of the angle.
pub fn covariance_reduced(r: f64, s: f64, t: f64, params: &ModelParams) -> f64 {
    let h = params.hurst;
    let d2 = (r * r + s * s - 2.0 * r * s * t).max(0.0);
    0.5 * (r.powf(2.0 * h) + s.powf(2.0 * h) - d2.powf(h))
}

fn check_radii(r: f64, s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&s) {
        return domain(format!("radii must lie in [0, 1], got r={r}, s={s}"));
    }
    Ok(())
}

/// Options for the closed form. `gamma_perturbation` multiplies the
/// `Γ(m - H)/Γ(-H)` factor by `1 + gamma_perturbation`; it exists only for
/// fault injection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClosedFormOptions {
    pub gamma_perturbation: f64,
}

/// `b_m(r, s)` from its hypergeometric closed form.
pub fn kernel_closed_form(spec: &RadialKernelSpec, r: f64, s: f64) -> Result<f64> {
    kernel_closed_form_with(spec, r, s, ClosedFormOptions::default())
}

pub fn kernel_closed_form_with(spec: &RadialKernelSpec, r: f64, s: f64, opts: ClosedFormOptions) -> Result<f64> {
    check_radii(r, s)?;
    let n = spec.params.dim as f64;
    let h = spec.params.hurst;
    let m = spec.m;
    let mf = m as f64;
    let pref = PI.powf(n / 2.0) * gamma_ratio(&[], &[n / 2.0 + mf])?;
    if r + s == 0.0 {
        return Ok(0.0);
    }
    let delta = if m == 0 { r.powf(2.0 * h) + s.powf(2.0 * h) } else { 0.0 };
    if m > 0 && r * s == 0.0 {
        return Ok(0.0);
    }
    // Γ(m - H)/Γ(-H) with explicit sign: Γ(-H) < 0, Γ(m - H) > 0 for m >= 1
    let num = log_gamma(mf - h)?;
    let den = log_gamma(-h)?;
    let gratio = num.sign * den.sign * (num.ln_abs - den.ln_abs).exp() * (1.0 + opts.gamma_perturbation);
    // (rs)^m (r+s)^{2(H-m)} ₂F₁(m+(N-1)/2, m-H; 2m+N-1; 4rs/(r+s)²) rewritten by
    // the quadratic transformation with ρ = min/max:
    // big^{2H} ρ^m ₂F₁(m-H, 1-H-N/2; m+N/2; ρ²)
    let (small, big) = if r <= s { (r, s) } else { (s, r) };
    let rho = small / big;
    let z = rho * rho;
    let power = big.powf(2.0 * h) * rho.powi(m as i32);
    let f = gauss_2f1(mf - h, 1.0 - h - n / 2.0, mf + n / 2.0, z)?;
    Ok(pref * (delta - gratio * power * f))
}

/// Cached quadrature rule for the Funk-Hecke integral
/// `b_m(r,s) = c_N ∫ R(r,s,t) C_m(t)/C_m(1) (1 - t²)^{(N-3)/2} dt`.
///
/// `[-1, 0]` uses a Gauss-Jacobi rule carrying the endpoint singularity.
/// `[0, 1]` is split into panels graded geometrically towards `t = 1`, where
/// the integrand has its `(1 - t)^H` singularity when `r = s`.
#[derive(Debug, Clone)]
pub struct KernelQuadrature {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

const GRADING: f64 = 0.5;
const LEVELS: usize = 60;

impl KernelQuadrature {
    /// `nodes` is the order of the Gauss rule used on each panel.
    pub fn new(dim: usize, nodes: usize) -> Result<Self> {
        if dim < 2 {
            return domain("kernel quadrature needs N >= 2");
        }
        if nodes < 2 {
            return domain(format!("quadrature size must be at least 2, got {nodes}"));
        }
        let alpha = (dim as f64 - 3.0) / 2.0;
        let c_n = 2.0 * PI.powf((dim as f64 - 1.0) / 2.0) * gamma_ratio(&[], &[(dim as f64 - 1.0) / 2.0])?;
        let mut ts = Vec::new();
        let mut ws = Vec::new();

        // [-1, 0]: t = (v - 1)/2, (1 + t)^α = ((1 + v)/2)^α
        let left = GaussJacobi::new(nodes, 0.0, alpha)?;
        for (&v, &w) in left.nodes.iter().zip(&left.weights) {
            let t = 0.5 * (v - 1.0);
            ts.push(t);
            ws.push(c_n * w * 0.5f64.powf(alpha + 1.0) * (1.0 - t).powf(alpha));
        }

        // [0, 1] in v = 1 - t, with weight v^α (2 - v)^α
        let (gl_x, gl_w) = gauss_legendre(nodes);
        let mut hi = 1.0;
        for _ in 0..LEVELS {
            let lo = hi * GRADING;
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (&x, &w) in gl_x.iter().zip(&gl_w) {
                let v = mid + half * x;
                ts.push(1.0 - v);
                ws.push(c_n * w * half * v.powf(alpha) * (2.0 - v).powf(alpha));
            }
            hi = lo;
        }
        // bottom panel [0, hi]: v = hi (1 + x)/2, v^α absorbed in the rule
        let bottom = GaussJacobi::new(nodes, 0.0, alpha)?;
        for (&x, &w) in bottom.nodes.iter().zip(&bottom.weights) {
            let v = hi * 0.5 * (1.0 + x);
            ts.push(1.0 - v);
            ws.push(c_n * w * (0.5 * hi).powf(alpha + 1.0) * (2.0 - v).powf(alpha));
        }
        Ok(Self { dim, nodes: ts, weights: ws })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `b_m(r, s)` by quadrature. For `m >= 1` the degree `< m` Taylor
    /// polynomial of `(A - B t)^H` is removed first; it integrates to zero
    /// against the Gegenbauer ratio and would otherwise cancel catastrophically
    /// for well-separated radii.
    pub fn eval(&self, spec: &RadialKernelSpec, r: f64, s: f64) -> Result<f64> {
        check_radii(r, s)?;
        if spec.params.dim != self.dim {
            return domain(format!("quadrature built for N={}, kernel has N={}", self.dim, spec.params.dim));
        }
        if r == 0.0 || s == 0.0 {
            return Ok(0.0);
        }
        let h = spec.params.hurst;
        let m = spec.m;
        let lambda = (self.dim as f64 - 2.0) / 2.0;
        let a = r * r + s * s;
        let b = 2.0 * r * s;
        let mut acc = 0.0;
        if m == 0 {
            for (&t, &w) in self.nodes.iter().zip(&self.weights) {
                acc += w * covariance_reduced(r, s, t, &spec.params);
            }
            return Ok(acc);
        }
        let coef = binomial_series(h, m);
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let x = b * t / a;
            let rem = taylor_remainder(h, m, x, &coef, a, b, t);
            acc += w * rem * gegenbauer_ratio_unchecked(m, lambda, t);
        }
        Ok(-0.5 * a.powf(h) * acc)
    }
}

/// Coefficients `binom(H, k) (-1)^k` for `k < m + 80`.
fn binomial_series(h: f64, m: usize) -> Vec<f64> {
    let len = m + 80;
    let mut c = Vec::with_capacity(len);
    let mut cur = 1.0;
    for k in 0..len {
        c.push(cur);
        cur *= -(h - k as f64) / (k as f64 + 1.0);
    }
    c
}

/// `(1 - x)^H - Σ_{k<m} binom(H,k)(-x)^k`.
fn taylor_remainder(h: f64, m: usize, x: f64, coef: &[f64], a: f64, b: f64, t: f64) -> f64 {
    if x.abs() <= 0.5 {
        let mut acc = 0.0;
        let mut p = x.powi(m as i32);
        for &c in &coef[m..] {
            let term = c * p;
            acc += term;
            if term.abs() <= 1e-18 * acc.abs() {
                break;
            }
            p *= x;
        }
        acc
    } else {
        // 1 - x computed from the radii to keep accuracy when r ≈ s, t ≈ 1
        let one_minus = ((a - b * t) / a).max(0.0);
        let mut poly = 0.0;
        let mut p = 1.0;
        for &c in &coef[..m] {
            poly += c * p;
            p *= x;
        }
        one_minus.powf(h) - poly
    }
}

/// One-shot quadrature evaluation; builds the rule on every call. Use
/// [`KernelQuadrature`] directly for repeated evaluations.
pub fn kernel_quadrature(spec: &RadialKernelSpec, r: f64, s: f64, nodes: usize) -> Result<f64> {
    KernelQuadrature::new(spec.params.dim, nodes)?.eval(spec, r, s)
}

/// One row of the golden-fixture table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFixture {
    pub dim: usize,
    pub hurst: f64,
    pub m: usize,
    pub r: f64,
    pub s: f64,
    pub value: f64,
}

pub fn write_fixtures<W: Write>(mut w: W, rows: &[KernelFixture]) -> Result<()> {
    writeln!(w, "N,H,m,r,s,b_m")?;
    for f in rows {
        writeln!(w, "{},{:.16e},{},{:.16e},{:.16e},{:.16e}", f.dim, f.hurst, f.m, f.r, f.s, f.value)?;
    }
    Ok(())
}

pub fn read_fixtures<R: BufRead>(r: R) -> Result<Vec<KernelFixture>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::Parse(format!("fixture line {}: expected 6 columns", i + 1)));
        }
        let p = |k: usize| -> Result<f64> {
            cols[k].trim().parse::<f64>().map_err(|e| Error::Parse(format!("fixture line {}: {e}", i + 1)))
        };
        let u = |k: usize| -> Result<usize> {
            cols[k].trim().parse::<usize>().map_err(|e| Error::Parse(format!("fixture line {}: {e}", i + 1)))
        };
        out.push(KernelFixture { dim: u(0)?, hurst: p(1)?, m: u(2)?, r: p(3)?, s: p(4)?, value: p(5)? });
    }
    Ok(out)
}
