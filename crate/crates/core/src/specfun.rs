//! Special functions used by the kernels and samplers.
//!
//! Everything here is a pure function of its arguments. Gamma-type quantities
//! are carried as `(ln|value|, sign)` pairs because the radial kernels need
//! ratios such as `Γ(m - H) / Γ(-H)` whose denominators sit at negative
//! arguments.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln|Γ(x)|` together with the sign of `Γ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGamma {
    pub ln_abs: f64,
    pub sign: f64,
}

impl LogGamma {
    pub fn value(self) -> f64 {
        self.sign * self.ln_abs.exp()
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    // valid for x >= 0.5
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Natural log of `|Γ(x)|` with a sign flag. Poles at non-positive integers
/// are reported as domain errors.
pub fn log_gamma(x: f64) -> Result<LogGamma> {
    if !x.is_finite() {
        return domain(format!("log_gamma: non-finite argument {x}"));
    }
    if is_nonpositive_integer(x) {
        return domain(format!("log_gamma: pole at {x}"));
    }
    if x >= 0.5 {
        return Ok(LogGamma { ln_abs: lanczos_ln_gamma(x), sign: 1.0 });
    }
    // reflection: Γ(x)Γ(1-x) = π / sin(πx)
    let s = sin_pi(x);
    let ln_abs = PI.ln() - s.abs().ln() - lanczos_ln_gamma(1.0 - x);
    Ok(LogGamma { ln_abs, sign: s.signum() })
}

/// `Γ(x)`; overflows to infinity for large positive `x` like any f64 gamma.
pub fn gamma(x: f64) -> Result<f64> {
    log_gamma(x).map(LogGamma::value)
}

/// `sin(πx)` with exact zeros at integers and reduced argument.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).floor(); // r in [0, 2)
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r < 0.5 {
        (PI * r).sin()
    } else if r < 1.5 {
        (PI * (1.0 - r)).sin()
    } else {
        (PI * (r - 2.0)).sin()
    }
}

/// Product of gamma values and reciprocals, in log space:
/// `Π Γ(num_i) / Π Γ(den_j)`. A reciprocal gamma at a pole contributes zero.
pub fn gamma_ratio(num: &[f64], den: &[f64]) -> Result<f64> {
    let mut ln = 0.0;
    let mut sign = 1.0;
    for &x in num {
        let g = log_gamma(x)?;
        ln += g.ln_abs;
        sign *= g.sign;
    }
    for &x in den {
        if is_nonpositive_integer(x) {
            return Ok(0.0);
        }
        let g = log_gamma(x)?;
        ln -= g.ln_abs;
        sign *= g.sign;
    }
    Ok(sign * ln.exp())
}

/// Digamma `ψ(x) = Γ'(x)/Γ(x)`.
pub fn digamma(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) {
        return domain(format!("digamma: pole at {x}"));
    }
    if x < 0.5 {
        // ψ(1-x) - ψ(x) = π cot(πx)
        let t = sin_pi(x);
        let c = sin_pi(x + 0.5); // cos(πx)
        return Ok(digamma(1.0 - x)? - PI * c / t);
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli tail: B2/2, B4/4, ... in powers of 1/x^2
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    Ok(acc + x.ln() - 0.5 * inv - series)
}

/// Gegenbauer polynomial `C_m^λ(t)` by the three-term recurrence.
pub fn gegenbauer(m: usize, lambda: f64, t: f64) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return domain(format!("gegenbauer: lambda must be >= 0, got {lambda}"));
    }
    if !(-1.0..=1.0).contains(&t) {
        return domain(format!("gegenbauer: t must lie in [-1, 1], got {t}"));
    }
    Ok(gegenbauer_unchecked(m, lambda, t))
}

fn gegenbauer_unchecked(m: usize, lambda: f64, t: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 2.0 * lambda * t;
    for n in 2..=m {
        let nf = n as f64;
        let next = (2.0 * t * (nf + lambda - 1.0) * cur - (nf + 2.0 * lambda - 2.0) * prev) / nf;
        prev = cur;
        cur = next;
    }
    cur
}

/// Chebyshev polynomial of the first kind.
pub fn chebyshev_t(m: usize, t: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = t;
    for _ in 1..m {
        let next = 2.0 * t * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `C_m^λ(t) / C_m^λ(1)`. At `λ = 0` this is the Chebyshev limit `T_m(t)`,
/// so callers never divide by `C_m^0(1) = 0`.
pub fn gegenbauer_ratio(m: usize, lambda: f64, t: f64) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return domain(format!("gegenbauer_ratio: lambda must be >= 0, got {lambda}"));
    }
    if !(-1.0..=1.0).contains(&t) {
        return domain(format!("gegenbauer_ratio: t must lie in [-1, 1], got {t}"));
    }
    Ok(gegenbauer_ratio_unchecked(m, lambda, t))
}

pub(crate) fn gegenbauer_ratio_unchecked(m: usize, lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return chebyshev_t(m, t);
    }
    // C_m^λ(1) = (2λ)_m / m!
    let mut at_one = 1.0;
    for k in 0..m {
        at_one *= (2.0 * lambda + k as f64) / (k as f64 + 1.0);
    }
    gegenbauer_unchecked(m, lambda, t) / at_one
}

const SERIES_MAX_TERMS: usize = 200_000;
/// Switch point between the direct series and the `1 - z` transformation.
pub const HYP2F1_SWITCH: f64 = 0.8;
/// Below this distance of `c - a - b` to an integer the logarithmic
/// connection formula is used (by interpolation in `c` when not exact).
const NEAR_INTEGER: f64 = 1e-3;
const INTERP_STEP: f64 = 2e-3;

/// Gauss hypergeometric function `₂F₁(a, b; c; z)` for real `z` in `[0, 1]`.
///
/// Direct power series for `z <= 0.8`; for `z > 0.8` the linear connection
/// formula in `1 - z`, including the logarithmic form when `c - a - b` is a
/// positive integer. At `z = 1` the Gauss summation formula is used.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && c.is_finite() && z.is_finite()) {
        return domain("gauss_2f1: non-finite argument");
    }
    if !(0.0..=1.0).contains(&z) {
        return domain(format!("gauss_2f1: z must lie in [0, 1], got {z}"));
    }
    if is_nonpositive_integer(c) {
        return domain(format!("gauss_2f1: c = {c} is a non-positive integer"));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    let s = c - a - b;
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        // terminating polynomial, valid on the whole interval
        return direct_series(a, b, c, z);
    }
    if z == 1.0 {
        if s <= 0.0 {
            return domain(format!("gauss_2f1: divergent at z = 1 (c - a - b = {s})"));
        }
        return gamma_ratio(&[c, s], &[c - a, c - b]);
    }
    if z <= HYP2F1_SWITCH {
        return direct_series(a, b, c, z);
    }
    let k = s.round();
    let gap = s - k;
    if gap.abs() < 1e-12 {
        if k < 1.0 {
            return domain(format!("gauss_2f1: logarithmic case with c - a - b = {k} <= 0 is not supported"));
        }
        return log_connection(a, b, k as usize, 1.0 - z);
    }
    if gap.abs() < NEAR_INTEGER && k >= 1.0 {
        // cubic interpolation in c through the exact logarithmic case and
        // three well-conditioned points on the same side of the integer
        let dir = gap.signum();
        let c0 = a + b + k;
        let nodes = [0.0, dir * INTERP_STEP, dir * 2.0 * INTERP_STEP, dir * 3.0 * INTERP_STEP];
        let mut vals = [0.0; 4];
        vals[0] = log_connection(a, b, k as usize, 1.0 - z)?;
        for i in 1..4 {
            vals[i] = linear_connection(a, b, c0 + nodes[i], z)?;
        }
        return Ok(lagrange(&nodes, &vals, gap));
    }
    linear_connection(a, b, c, z)
}

fn lagrange(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..nodes.len() {
        let mut w = 1.0;
        for j in 0..nodes.len() {
            if i != j {
                w *= (x - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
        acc += w * vals[i];
    }
    acc
}

/// Plain hypergeometric series; also exposed so tests can compare branches.
pub fn direct_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut small = 0;
    for n in 0..SERIES_MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        if term.abs() <= 1e-17 * sum.abs() {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Numeric(format!("gauss_2f1: series did not converge (a={a}, b={b}, c={c}, z={z})")))
}

/// Connection formula in `1 - z` for non-integer `c - a - b`.
pub fn linear_connection(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let s = c - a - b;
    let w = 1.0 - z;
    let first = gamma_ratio(&[c, s], &[c - a, c - b])?;
    let second = gamma_ratio(&[c, -s], &[a, b])?;
    let mut acc = 0.0;
    if first != 0.0 {
        acc += first * direct_series(a, b, 1.0 - s, w)?;
    }
    if second != 0.0 {
        acc += second * w.powf(s) * direct_series(c - a, c - b, s + 1.0, w)?;
    }
    Ok(acc)
}

/// Logarithmic connection formula for `c = a + b + k`, `k >= 1` integer,
/// evaluated at `w = 1 - z` in `(0, 1)`.
fn log_connection(a: f64, b: f64, k: usize, w: f64) -> Result<f64> {
    let kf = k as f64;
    let c = a + b + kf;

    // finite part: Γ(k)Γ(c)/(Γ(a+k)Γ(b+k)) Σ_{n<k} (a)_n (b)_n / (n! (1-k)_n) w^n
    let pref = gamma_ratio(&[kf, c], &[a + kf, b + kf])?;
    let mut finite = 0.0;
    let mut term = 1.0;
    for n in 0..k {
        finite += term;
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((nf + 1.0) * (1.0 - kf + nf)) * w;
    }
    finite *= pref;

    // logarithmic tail
    let pref2 = gamma_ratio(&[c], &[a, b])?;
    if pref2 == 0.0 {
        return Ok(finite);
    }
    let mut fact_k = 1.0;
    for i in 1..=k {
        fact_k *= i as f64;
    }
    let lnw = w.ln();
    let mut psi_n1 = digamma(1.0)?;
    let mut psi_nk1 = digamma(kf + 1.0)?;
    let mut psi_a = digamma(a + kf)?;
    let mut psi_b = digamma(b + kf)?;
    let mut coef = 1.0 / fact_k; // (a+k)_n (b+k)_n / (n! (n+k)!) w^n
    let mut tail = 0.0;
    let mut small = 0;
    for n in 0..SERIES_MAX_TERMS {
        let nf = n as f64;
        let t = coef * (lnw - psi_n1 - psi_nk1 + psi_a + psi_b);
        tail += t;
        if t.abs() <= 1e-17 * tail.abs() {
            small += 1;
            if small >= 3 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                return Ok(finite - sign * w.powi(k as i32) * pref2 * tail);
            }
        } else {
            small = 0;
        }
        coef *= (a + kf + nf) * (b + kf + nf) / ((nf + 1.0) * (nf + kf + 1.0)) * w;
        psi_n1 += 1.0 / (nf + 1.0);
        psi_nk1 += 1.0 / (nf + kf + 1.0);
        psi_a += 1.0 / (a + kf + nf);
        psi_b += 1.0 / (b + kf + nf);
    }
    Err(Error::Numeric(format!("gauss_2f1: logarithmic series did not converge (a={a}, b={b}, k={k}, w={w})")))
}

/// Number of linearly independent degree-`m` spherical harmonics on
/// `S^{N-1}`.
pub fn multiplicity(m: usize, n: usize) -> Result<usize> {
    if n < 2 {
        return domain(format!("multiplicity: dimension must be >= 2, got {n}"));
    }
    if m == 0 {
        return Ok(1);
    }
    // C(m+N-1, N-1) - C(m+N-3, N-1)
    let upper = binomial(m + n - 1, n - 1);
    let lower = if m >= 2 { binomial(m + n - 3, n - 1) } else { 0 };
    Ok((upper - lower) as usize)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i as u128 + 1);
    }
    acc
}

/// Angular part of spherical coordinates: azimuth plus `N - 2` polar angles.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleCoords {
    pub phi: f64,
    pub thetas: Vec<f64>,
}

impl AngleCoords {
    pub fn new(phi: f64, thetas: Vec<f64>) -> Result<Self> {
        if !(0.0..2.0 * PI + 1e-12).contains(&phi) {
            return domain(format!("azimuth {phi} outside [0, 2π)"));
        }
        if thetas.iter().any(|t| !(-1e-12..=PI + 1e-12).contains(t)) {
            return domain("polar angles must lie in [0, π]");
        }
        Ok(Self { phi, thetas })
    }

    /// Dimension of the ambient space.
    pub fn dim(&self) -> usize {
        self.thetas.len() + 2
    }

    /// Radius and angles of a point in `R^N`, `N in {2, 3}`. The origin maps
    /// to zero angles.
    pub fn from_point(x: &[f64]) -> Result<(f64, AngleCoords)> {
        match x.len() {
            2 => {
                let r = x[0].hypot(x[1]);
                let mut phi = x[1].atan2(x[0]);
                if phi < 0.0 {
                    phi += 2.0 * PI;
                }
                if phi >= 2.0 * PI {
                    phi = 0.0;
                }
                Ok((r, AngleCoords { phi, thetas: vec![] }))
            }
            3 => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let theta = if r > 0.0 { (x[2] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
                let mut phi = x[1].atan2(x[0]);
                if phi < 0.0 {
                    phi += 2.0 * PI;
                }
                if phi >= 2.0 * PI {
                    phi = 0.0;
                }
                Ok((r, AngleCoords { phi, thetas: vec![theta] }))
            }
            n => Err(Error::UnsupportedDimension(n)),
        }
    }

    pub fn to_unit_vector(&self) -> Vec<f64> {
        match self.thetas.len() {
            0 => vec![self.phi.cos(), self.phi.sin()],
            _ => {
                let th = self.thetas[0];
                vec![th.sin() * self.phi.cos(), th.sin() * self.phi.sin(), th.cos()]
            }
        }
    }
}

/// Real spherical harmonic `S_m^l`, `1 <= l <= h(m, N)`, orthonormal with
/// respect to the surface measure of `S^{N-1}` (`dφ` for `N = 2`,
/// `sin ϑ dϑ dφ` for `N = 3`).
///
/// Index layout: `l = 1` is the zonal (`cos 0φ`) function for `N = 3`; then
/// `l = 2k` carries `cos kφ` and `l = 2k + 1` carries `sin kφ`. For `N = 2`,
/// `l = 1` is `cos mφ` and `l = 2` is `sin mφ`.
pub fn sph_harm(n: usize, m: usize, l: usize, angles: &AngleCoords) -> Result<f64> {
    if n != 2 && n != 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    if angles.dim() != n {
        return domain(format!("sph_harm: angle record has dimension {}, expected {n}", angles.dim()));
    }
    let h = multiplicity(m, n)?;
    if l == 0 || l > h {
        return domain(format!("sph_harm: index l={l} outside 1..={h}"));
    }
    Ok(harmonics(n, m, angles)[l - 1])
}

/// All `h(m, N)` real harmonics of degree `m` at one direction, in index
/// order. `N` must be 2 or 3; the caller has checked it.
pub(crate) fn harmonics(n: usize, m: usize, angles: &AngleCoords) -> Vec<f64> {
    let phi = angles.phi;
    if n == 2 {
        if m == 0 {
            return vec![1.0 / (2.0 * PI).sqrt()];
        }
        let norm = 1.0 / PI.sqrt();
        let mf = m as f64;
        return vec![norm * (mf * phi).cos(), norm * (mf * phi).sin()];
    }
    let theta = angles.thetas[0];
    let x = theta.cos();
    let sx = theta.sin();
    let mut out = Vec::with_capacity(2 * m + 1);
    for order in 0..=m {
        let p = normalized_legendre(m, order, x, sx);
        if order == 0 {
            out.push(p);
        } else {
            let f = std::f64::consts::SQRT_2 * p;
            let of = order as f64;
            out.push(f * (of * phi).cos());
            out.push(f * (of * phi).sin());
        }
    }
    out
}

/// `sqrt((2m+1)/(4π) (m-μ)!/(m+μ)!) P_m^μ(x)` without the Condon-Shortley
/// phase.
fn normalized_legendre(m: usize, order: usize, x: f64, sx: f64) -> f64 {
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=order {
        let kf = k as f64;
        pmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sx;
    }
    if m == order {
        return pmm;
    }
    let of = order as f64;
    let mut prev = pmm;
    let mut cur = (2.0 * of + 3.0).sqrt() * x * pmm;
    for l in (order + 2)..=m {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - of * of)).sqrt();
        let b = (((lf - 1.0) * (lf - 1.0) - of * of) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
        let next = a * (x * cur - b * prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// Bessel function `J_0` on `[0, ∞)`: power series below 12, Hankel
/// asymptotics above.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 12.0 {
        let q = -0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= q / (kf * kf);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return sum;
    }
    // P and Q asymptotic series with μ = 0
    // t_k = Π_{j<=k} (2j-1)^2 / (8 j x); P = t0 - t2 + t4 ..., Q = -t1 + t3 - ...
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t = 1.0;
    let eight_x = 8.0 * x;
    for k in 1..40 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = t * odd * odd / (kf * eight_x);
        if next > t {
            break;
        }
        t = next;
        match k % 4 {
            0 => p += t,
            1 => q -= t,
            2 => p -= t,
            _ => q += t,
        }
    }
    let chi = x - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
