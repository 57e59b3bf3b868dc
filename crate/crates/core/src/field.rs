//! Sample paths of the field on point sets in the unit ball: truncated
//! Karhunen-Loève synthesis, exact dense-covariance factorization, and the
//! global spectral representation with optional frequency bands.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{covariance, ModelParams};
use crate::mercer::EigenSystem;
use crate::report::{fmt_f64, write_csv};
use crate::rng::RngStream;
use crate::specfun::{bessel_j0, gamma_ratio, harmonics, multiplicity, AngleCoords};

/// Golden angle in radians.
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_in_ball(x: &[f64], dim: usize) -> Result<f64> {
    if x.len() != dim {
        return domain(format!("point has {} coordinates, expected {dim}", x.len()));
    }
    let r = norm(x);
    if !(r <= 1.0 + 1e-12) {
        return domain(format!("point {x:?} lies outside the closed unit ball"));
    }
    Ok(r.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Kl,
    Cholesky,
    Spectral,
    SpectralBand { a: f64, b: f64 },
}

/// Radial shells times directions used to discretize the spectral integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    pub shells: usize,
    pub k_min: f64,
    pub k_max: f64,
    /// Directions per shell; `None` picks the default for the dimension
    /// (2, 64 or 242).
    pub directions: Option<usize>,
}

impl Default for FreqGrid {
    fn default() -> Self {
        Self { shells: 256, k_min: 1e-3, k_max: 1e3, directions: None }
    }
}

impl FreqGrid {
    pub fn directions_for(&self, dim: usize) -> usize {
        self.directions.unwrap_or(match dim {
            1 => 2,
            2 => 64,
            _ => 242,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub params: ModelParams,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub method: Method,
    pub seed: u64,
    pub replica: u64,
    pub truncation: Option<(usize, usize)>,
    pub freq_grid: Option<FreqGrid>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    method: &'a Method,
    params: &'a ModelParams,
    seed: u64,
    replica: u64,
    truncation: Option<(usize, usize)>,
    freq_grid: Option<FreqGrid>,
    points: usize,
}

impl FieldSample {
    /// Writes `<stem>.csv` (coordinates, value) and `<stem>.json` (metadata).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let dim = self.params.dim;
        let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = self
            .points
            .iter()
            .zip(&self.values)
            .map(|(p, v)| p.iter().chain(std::iter::once(v)).map(|&x| fmt_f64(x)).collect())
            .collect();
        write_csv(&dir.join(format!("{stem}.csv")), &header, &rows)?;
        let side = Sidecar {
            method: &self.method,
            params: &self.params,
            seed: self.seed,
            replica: self.replica,
            truncation: self.truncation,
            freq_grid: self.freq_grid,
            points: self.points.len(),
        };
        let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(dir.join(format!("{stem}.json")), text + "\n")?;
        Ok(())
    }
}

/// A realized field that can be evaluated anywhere it is defined.
pub trait FieldRealization: Sync {
    fn params(&self) -> ModelParams;
    fn eval(&self, x: &[f64]) -> Result<f64>;

    fn eval_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.eval(x)).collect()
    }
}

// ---------------------------------------------------------------------------
// Karhunen-Loève

/// Eigensystems for `m = 0..=m0` with `n0` modes each, and the mode layout
/// `(m, l, n)` shared by the KL sampler and the RKHS coefficient tables.
#[derive(Debug, Clone)]
pub struct KlBasis {
    pub params: ModelParams,
    pub m0: usize,
    pub n0: usize,
    pub systems: Vec<EigenSystem>,
    modes: Vec<(usize, usize, usize)>,
}

impl KlBasis {
    pub fn new(params: ModelParams, systems: Vec<EigenSystem>, m0: usize, n0: usize) -> Result<Self> {
        params.validate()?;
        if params.dim != 2 && params.dim != 3 {
            return Err(Error::UnsupportedDimension(params.dim));
        }
        if systems.len() < m0 + 1 {
            return Err(Error::Config(format!(
                "eigensystems cover m <= {} but truncation needs m <= {m0}",
                systems.len() as isize - 1
            )));
        }
        for (m, es) in systems.iter().enumerate().take(m0 + 1) {
            if es.len() < n0 {
                return Err(Error::Config(format!("eigensystem m={m} has {} modes, need {n0}", es.len())));
            }
        }
        let mut modes = Vec::new();
        for m in 0..=m0 {
            for l in 1..=multiplicity(m, params.dim)? {
                for n in 1..=n0 {
                    modes.push((m, l, n));
                }
            }
        }
        Ok(Self { params, m0, n0, systems, modes })
    }

    /// Decomposes every `b_m`, `m <= m0`, on a `grid`-node Nyström grid.
    pub fn build(params: ModelParams, m0: usize, n0: usize, grid: usize) -> Result<Self> {
        let systems = (0..=m0)
            .map(|m| {
                let spec = crate::kernel::RadialKernelSpec::new(params, m)?;
                crate::mercer::mercer_decompose(&spec, grid, n0)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(params, systems, m0, n0)
    }

    /// Mode list `(m, l, n)`, 1-based `l` and `n`.
    pub fn modes(&self) -> &[(usize, usize, usize)] {
        &self.modes
    }

    pub fn lambda(&self, m: usize, n: usize) -> f64 {
        self.systems[m].lambdas[n - 1]
    }

    /// `ψ_mn(r) S^l_m(x̂)` for every mode, in [`Self::modes`] order.
    pub fn basis_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = check_in_ball(x, self.params.dim)?;
        let (_, angles) = AngleCoords::from_point(x)?;
        let mut out = Vec::with_capacity(self.modes.len());
        for m in 0..=self.m0 {
            let psi = self.systems[m].eval_all(r)?;
            let s = harmonics(self.params.dim, m, &angles);
            for sl in &s {
                for p in psi.iter().take(self.n0) {
                    out.push(p * sl);
                }
            }
        }
        Ok(out)
    }

    /// `√λ_mn ψ_mn(r) S^l_m(x̂)`: the KL loading of each mode at `x`.
    pub fn loadings(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.basis_values(x)?;
        for (val, &(m, _, n)) in v.iter_mut().zip(&self.modes) {
            *val *= self.lambda(m, n).sqrt();
        }
        Ok(v)
    }

    /// Variance of the truncated series at `x`.
    pub fn truncated_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.loadings(x)?.iter().map(|v| v * v).sum())
    }

    fn coefficients(&self, seed: u64, replica: u64) -> Vec<f64> {
        self.modes.iter().map(|&(m, l, n)| RngStream::kl(seed, replica, m, l, n).normal()).collect()
    }
}

/// KL sampler with loadings precomputed at a fixed point set.
pub struct KlSampler<'a> {
    basis: &'a KlBasis,
    points: Vec<Vec<f64>>,
    loadings: Vec<Vec<f64>>,
}

impl<'a> KlSampler<'a> {
    pub fn new(basis: &'a KlBasis, points: &[Vec<f64>]) -> Result<Self> {
        let loadings = points.par_iter().map(|x| basis.loadings(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { basis, points: points.to_vec(), loadings })
    }

    pub fn sample_values(&self, seed: u64, replica: u64) -> Vec<f64> {
        let xi = self.basis.coefficients(seed, replica);
        self.loadings.iter().map(|row| row.iter().zip(&xi).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn sample(&self, seed: u64, replica: u64) -> FieldSample {
        FieldSample {
            params: self.basis.params,
            points: self.points.clone(),
            values: self.sample_values(seed, replica),
            method: Method::Kl,
            seed,
            replica,
            truncation: Some((self.basis.m0, self.basis.n0)),
            freq_grid: None,
        }
    }

    /// Exact covariance matrix of the truncated series.
    pub fn truncated_covariance(&self) -> DMatrix<f64> {
        let k = self.points.len();
        DMatrix::from_fn(k, k, |i, j| self.loadings[i].iter().zip(&self.loadings[j]).map(|(a, b)| a * b).sum())
    }
}

/// One KL sample path on `points`.
pub fn kl_synthesize(basis: &KlBasis, points: &[Vec<f64>], seed: u64) -> Result<FieldSample> {
    Ok(KlSampler::new(basis, points)?.sample(seed, 0))
}

/// A KL path that can be evaluated at arbitrary points in the ball.
pub struct KlField<'a> {
    basis: &'a KlBasis,
    coeffs: Vec<f64>,
}

impl<'a> KlField<'a> {
    pub fn new(basis: &'a KlBasis, seed: u64, replica: u64) -> Self {
        Self { basis, coeffs: basis.coefficients(seed, replica) }
    }
}

impl FieldRealization for KlField<'_> {
    fn params(&self) -> ModelParams {
        self.basis.params
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.basis.loadings(x)?.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum())
    }
}

// ---------------------------------------------------------------------------
// Cholesky

/// Exact Gaussian sampler from the dense covariance matrix. Points at the
/// origin have zero variance and are excluded from the factorization.
pub struct CholeskySampler {
    params: ModelParams,
    points: Vec<Vec<f64>>,
    active: Vec<usize>,
    factor: DMatrix<f64>,
    pub jitter: f64,
}

impl CholeskySampler {
    pub fn new(params: ModelParams, points: &[Vec<f64>]) -> Result<Self> {
        params.validate()?;
        for p in points {
            if p.len() != params.dim {
                return domain(format!("point has {} coordinates, expected {}", p.len(), params.dim));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return domain("non-finite point coordinate");
            }
        }
        let active: Vec<usize> = (0..points.len()).filter(|&i| norm(&points[i]) > 0.0).collect();
        let k = active.len();
        let gram = DMatrix::from_fn(k, k, |i, j| covariance(&points[active[i]], &points[active[j]], &params));
        let (factor, jitter) = if k == 0 {
            (DMatrix::zeros(0, 0), 0.0)
        } else {
            match Cholesky::new(gram.clone()) {
                Some(c) => (c.l(), 0.0),
                None => {
                    let jitter = 1e-12 * gram.trace() / k as f64;
                    let mut g = gram;
                    for i in 0..k {
                        g[(i, i)] += jitter;
                    }
                    let c = Cholesky::new(g).ok_or_else(|| {
                        Error::Numeric(format!("Cholesky factorization failed after jitter {jitter:e}"))
                    })?;
                    (c.l(), jitter)
                }
            }
        };
        Ok(Self { params, points: points.to_vec(), active, factor, jitter })
    }

    pub fn sample_values(&self, seed: u64, replica: u64) -> Vec<f64> {
        let z = DVector::from_vec(RngStream::cholesky(seed, replica).normals(self.active.len()));
        let y = &self.factor * z;
        let mut out = vec![0.0; self.points.len()];
        for (i, &idx) in self.active.iter().enumerate() {
            out[idx] = y[i];
        }
        out
    }

    pub fn sample(&self, seed: u64, replica: u64) -> FieldSample {
        FieldSample {
            params: self.params,
            points: self.points.clone(),
            values: self.sample_values(seed, replica),
            method: Method::Cholesky,
            seed,
            replica,
            truncation: None,
            freq_grid: None,
        }
    }
}

pub fn cholesky_synthesize(params: ModelParams, points: &[Vec<f64>], seed: u64) -> Result<FieldSample> {
    Ok(CholeskySampler::new(params, points)?.sample(seed, 0))
}

/// Gram matrix `R(x_i, x_j)`.
pub fn gram_matrix(params: &ModelParams, points: &[Vec<f64>]) -> DMatrix<f64> {
    let k = points.len();
    DMatrix::from_fn(k, k, |i, j| covariance(&points[i], &points[j], params))
}

// ---------------------------------------------------------------------------
// Spectral

/// `C₄` such that `C₄² ∫ 2(1 - cos(p·x)) |p|^{-N-2H} dp = |x|^{2H}`:
/// `C₄² = 2^{2H} H Γ(N/2 + H) / (2 π^{N/2} Γ(1 - H))`.
pub fn c4_constant(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let n = params.dim as f64;
    let h = params.hurst;
    let sq = 2f64.powf(2.0 * h) * h * gamma_ratio(&[n / 2.0 + h], &[1.0 - h])? / (2.0 * PI.powf(n / 2.0));
    Ok(sq.sqrt())
}

/// The constant in the form `2^H √(H Γ((N+H)/2) / (Γ(N/2) Γ(1-H)))`. It does
/// not satisfy the variance identity and is kept only for comparison.
pub fn c4_printed(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let n = params.dim as f64;
    let h = params.hurst;
    Ok(2f64.powf(h) * (h * gamma_ratio(&[(n + h) / 2.0], &[n / 2.0, 1.0 - h])?).sqrt())
}

/// Surface area of `S^{N-1}` (2 for `N = 1`, counting both directions).
fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * PI.powf(n / 2.0) * gamma_ratio(&[], &[n / 2.0]).unwrap_or(f64::NAN)
}

/// `1 - g_N(z)` where `g_N` is the average of `cos(p·x)` over directions:
/// `cos z`, `J_0(z)`, `sin z / z` for `N = 1, 2, 3`.
fn one_minus_angular_average(dim: usize, z: f64) -> Result<f64> {
    let z = z.abs();
    match dim {
        1 => Ok(2.0 * (0.5 * z).sin().powi(2)),
        2 if z < 1.0 => {
            // 1 - J_0(z) = -Σ_{k≥1} (-z²/4)^k / (k!)²
            let q = -0.25 * z * z;
            let (mut term, mut acc) = (1.0, 0.0);
            for k in 1..30 {
                term *= q / (k * k) as f64;
                acc -= term;
            }
            Ok(acc)
        }
        2 => Ok(1.0 - bessel_j0(z)),
        3 if z < 1.0 => {
            // 1 - sin z / z = Σ_{k≥1} (-1)^{k+1} z^{2k} / (2k+1)!
            let (mut term, mut acc) = (1.0, 0.0);
            for k in 1..20 {
                term *= -z * z / ((2 * k) * (2 * k + 1)) as f64;
                acc -= term;
            }
            Ok(acc)
        }
        3 => Ok(1.0 - z.sin() / z),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

/// `∫_{z0}^{z1} 2(1 - g_N(z)) z^{-1-2H} dz`, `z1` may be infinite.
fn scaled_band_integral(dim: usize, h: f64, z0: f64, z1: f64) -> Result<f64> {
    const SMALL: f64 = 1e-14;
    const KNEE: f64 = 2.0;
    const ZMAX: f64 = 4000.0;
    const ORDER: usize = 20;
    let (gx, gw) = crate::quadrature::gauss_legendre(ORDER);
    let f = |z: f64| -> Result<f64> { Ok(2.0 * one_minus_angular_average(dim, z)? * z.powf(-1.0 - 2.0 * h)) };
    let mut cuts = Vec::new();
    let mut c = SMALL;
    while c < KNEE {
        cuts.push(c);
        c *= 2.0;
    }
    let step = 0.5 * PI;
    let mut c = KNEE;
    while c < ZMAX {
        cuts.push(c);
        c += step;
    }
    cuts.push(ZMAX);
    let lo = z0.max(SMALL);
    let hi = z1.min(ZMAX);
    let mut acc = 0.0;
    if hi > lo {
        for w in cuts.windows(2) {
            let (a, b) = (w[0].max(lo), w[1].min(hi));
            if b <= a {
                continue;
            }
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in gx.iter().zip(&gw) {
                acc += wt * half * f(mid + half * x)?;
            }
        }
    }
    if z1 > ZMAX {
        // 1 - g_N(z) ≈ 1 up to an oscillating O(z^{-(N-1)/2}) term
        let a = z0.max(ZMAX);
        let tail = |z: f64| if z.is_finite() { z.powf(-2.0 * h) } else { 0.0 };
        acc += (tail(a) - tail(z1)) / h;
    }
    Ok(acc)
}

/// Variance of the band-limited field `ξ^(a,b)` at a point of norm
/// `radius`, by deterministic radial quadrature:
/// `C₄² |S^{N-1}| ∫_a^b 2(1 - g_N(p r)) p^{-1-2H} dp`. `b` may be infinite.
pub fn band_variance(params: &ModelParams, radius: f64, a: f64, b: f64) -> Result<f64> {
    params.validate()?;
    if !(a >= 0.0 && b > a) {
        return domain(format!("empty or invalid band ({a}, {b}]"));
    }
    if radius == 0.0 {
        return Ok(0.0);
    }
    let c4 = c4_constant(params)?;
    let h = params.hurst;
    let int = scaled_band_integral(params.dim, h, a * radius, b * radius)?;
    Ok(c4 * c4 * sphere_area(params.dim) * radius.powf(2.0 * h) * int)
}

/// Variance of the complementary band `[0, a] ∪ (b, ∞)`.
pub fn complement_band_variance(params: &ModelParams, radius: f64, a: f64, b: f64) -> Result<f64> {
    let low = if a > 0.0 { band_variance(params, radius, 0.0, a)? } else { 0.0 };
    let high = if b.is_finite() { band_variance(params, radius, b, f64::INFINITY)? } else { 0.0 };
    Ok(low + high)
}

fn directions(dim: usize, count: usize, shell: usize) -> Result<Vec<Vec<f64>>> {
    let rot = shell as f64 * GOLDEN_ANGLE;
    match dim {
        1 => Ok((0..count).map(|j| vec![if j % 2 == 0 { 1.0 } else { -1.0 }]).collect()),
        2 => Ok((0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64 + rot;
                vec![t.cos(), t.sin()]
            })
            .collect()),
        3 => Ok((0..count)
            .map(|j| {
                // Fibonacci lattice: equal-area bands in z, golden-angle azimuths
                let z = 1.0 - (2.0 * j as f64 + 1.0) / count as f64;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let t = j as f64 * GOLDEN_ANGLE + rot;
                vec![rho * t.cos(), rho * t.sin(), z]
            })
            .collect()),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

/// Discretized spectral representation: frequency cells with their
/// amplitudes `a_c = √(C₄² ∫_cell |p|^{-N-2H} dp)`.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    params: ModelParams,
    band: (f64, f64),
    grid: FreqGrid,
    /// `(shell, direction, frequency, amplitude)`
    cells: Vec<(usize, usize, Vec<f64>, f64)>,
}

impl SpectralSampler {
    pub fn new(params: ModelParams, band: (f64, f64), grid: FreqGrid) -> Result<Self> {
        params.validate()?;
        let dim = params.dim;
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let (a, b) = band;
        let lo = a.max(grid.k_min);
        let hi = b.min(grid.k_max);
        if !(a >= 0.0 && b > a && hi > lo && lo > 0.0) || grid.shells == 0 {
            return domain(format!("empty frequency band ({a}, {b}] within grid [{}, {}]", grid.k_min, grid.k_max));
        }
        let h = params.hurst;
        let c4 = c4_constant(&params)?;
        let ndir = grid.directions_for(dim);
        if ndir == 0 {
            return domain("frequency grid needs at least one direction");
        }
        let ratio = (hi / lo).powf(1.0 / grid.shells as f64);
        let area = sphere_area(dim);
        let mut cells = Vec::with_capacity(grid.shells * ndir);
        for shell in 0..grid.shells {
            let r0 = lo * ratio.powi(shell as i32);
            let r1 = if shell + 1 == grid.shells { hi } else { lo * ratio.powi(shell as i32 + 1) };
            // ∫_{r0}^{r1} ρ^{N-1} ρ^{-N-2H} dρ over the solid angle of one direction
            let mass = c4 * c4 * area / ndir as f64 * (r0.powf(-2.0 * h) - r1.powf(-2.0 * h)) / (2.0 * h);
            let rho = (r0 * r1).sqrt();
            for (j, d) in directions(dim, ndir, shell)?.into_iter().enumerate() {
                let p: Vec<f64> = d.iter().map(|v| v * rho).collect();
                cells.push((shell, j, p, mass.sqrt()));
            }
        }
        Ok(Self { params, band, grid, cells })
    }

    pub fn full_range(params: ModelParams, grid: FreqGrid) -> Result<Self> {
        Self::new(params, (0.0, f64::INFINITY), grid)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Exact variance of the discretized field at `x`.
    pub fn discretized_variance(&self, x: &[f64]) -> f64 {
        self.cells
            .iter()
            .map(|(_, _, p, amp)| {
                let d: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
                amp * amp * 2.0 * (1.0 - d.cos())
            })
            .sum()
    }

    /// Exact covariance of the discretized field between `x` and `y`.
    pub fn discretized_covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.cells
            .iter()
            .map(|(_, _, p, amp)| {
                let dx: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
                let dy: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
                amp * amp * ((dx - dy).cos() - dx.cos() - dy.cos() + 1.0)
            })
            .sum()
    }

    pub fn realize(&self, seed: u64, replica: u64) -> SpectralField<'_> {
        let gauss = self
            .cells
            .iter()
            .map(|(shell, dir, _, _)| {
                let g = RngStream::spectral(seed, replica, *shell, *dir).normals(2);
                (g[0], g[1])
            })
            .collect();
        SpectralField { sampler: self, gauss }
    }

    pub fn method(&self) -> Method {
        if self.band == (0.0, f64::INFINITY) {
            Method::Spectral
        } else {
            Method::SpectralBand { a: self.band.0, b: self.band.1 }
        }
    }

    pub fn sample(&self, points: &[Vec<f64>], seed: u64, replica: u64) -> Result<FieldSample> {
        for p in points {
            check_in_ball(p, self.params.dim)?;
        }
        let f = self.realize(seed, replica);
        Ok(FieldSample {
            params: self.params,
            points: points.to_vec(),
            values: f.eval_many(points)?,
            method: self.method(),
            seed,
            replica,
            truncation: None,
            freq_grid: Some(self.grid),
        })
    }
}

pub fn spectral_synthesize(
    params: ModelParams,
    band: (f64, f64),
    grid: FreqGrid,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<FieldSample> {
    SpectralSampler::new(params, band, grid)?.sample(points, seed, 0)
}

/// One realization of the spectral sampler:
/// `Σ_c a_c [(cos(p_c·x) - 1) g1_c - sin(p_c·x) g2_c]`.
pub struct SpectralField<'a> {
    sampler: &'a SpectralSampler,
    gauss: Vec<(f64, f64)>,
}

impl FieldRealization for SpectralField<'_> {
    fn params(&self) -> ModelParams {
        self.sampler.params
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.sampler.params.dim {
            return domain("point dimension does not match the field");
        }
        Ok(self
            .sampler
            .cells
            .iter()
            .zip(&self.gauss)
            .map(|((_, _, p, amp), (g1, g2))| {
                let d: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
                let (s, c) = d.sin_cos();
                amp * ((c - 1.0) * g1 - s * g2)
            })
            .sum())
    }
}

// ---------------------------------------------------------------------------
// Ensemble statistics

/// Unbiased sample covariance and the standard error of each entry.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub replicas: usize,
    pub cov: DMatrix<f64>,
    pub se: DMatrix<f64>,
}

impl CovarianceEstimate {
    /// Largest `|cov - reference| / se` over entries with nonzero error.
    /// Entries where both `se` and the deviation vanish count as zero.
    pub fn max_z(&self, reference: &DMatrix<f64>, bias: Option<&DMatrix<f64>>) -> f64 {
        let k = self.cov.nrows();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let dev = (self.cov[(i, j)] - reference[(i, j)]).abs();
                let allow = bias.map_or(0.0, |b| b[(i, j)].abs());
                let excess = (dev - allow).max(0.0);
                if excess == 0.0 {
                    continue;
                }
                worst = worst.max(if self.se[(i, j)] > 0.0 { excess / self.se[(i, j)] } else { f64::INFINITY });
            }
        }
        worst
    }
}

/// Covariance estimate from a replicas × points value table.
pub fn covariance_from_values(values: &[Vec<f64>]) -> Result<CovarianceEstimate> {
    let n = values.len();
    if n < 2 {
        return domain("need at least 2 replicas");
    }
    let k = values[0].len();
    if values.iter().any(|v| v.len() != k) {
        return domain("replicas have different lengths");
    }
    let nf = n as f64;
    let mean: Vec<f64> = (0..k).map(|i| values.iter().map(|v| v[i]).sum::<f64>() / nf).collect();
    let mut cov = DMatrix::zeros(k, k);
    let mut se = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let prods: Vec<f64> = values.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).collect();
            let c = prods.iter().sum::<f64>() / (nf - 1.0);
            let pm = prods.iter().sum::<f64>() / nf;
            let var = prods.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (nf - 1.0);
            let e = (var / nf).sqrt();
            cov[(i, j)] = c;
            cov[(j, i)] = c;
            se[(i, j)] = e;
            se[(j, i)] = e;
        }
    }
    Ok(CovarianceEstimate { replicas: n, cov, se })
}

pub fn empirical_covariance(ensemble: &[FieldSample]) -> Result<CovarianceEstimate> {
    if ensemble.len() < 2 {
        return domain("need at least 2 replicas");
    }
    let pts = &ensemble[0].points;
    if ensemble.iter().any(|s| &s.points != pts) {
        return domain("ensemble members do not share a point list");
    }
    let values: Vec<Vec<f64>> = ensemble.iter().map(|s| s.values.clone()).collect();
    covariance_from_values(&values)
}
