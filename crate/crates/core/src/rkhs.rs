//! Coefficient tables in the basis `ψ_mn(r) S^l_m(x̂)`, the Strassen norm and
//! inner product of the reproducing kernel Hilbert space, representers and
//! projection onto Strassen's ball.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::field::KlBasis;
use crate::quadrature::gauss_legendre;
use crate::report::{fmt_f64, write_csv};
use crate::specfun::{harmonics, AngleCoords};

/// Coefficients `f^l_mn` in the mode order of a [`KlBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct RkhsFunction {
    pub m0: usize,
    pub n0: usize,
    pub coeffs: Vec<f64>,
}

impl RkhsFunction {
    pub fn zeros(basis: &KlBasis) -> Self {
        Self { m0: basis.m0, n0: basis.n0, coeffs: vec![0.0; basis.modes().len()] }
    }

    pub fn from_coeffs(basis: &KlBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.modes().len() {
            return domain(format!(
                "coefficient table has {} entries, basis has {} modes",
                coeffs.len(),
                basis.modes().len()
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return domain("non-finite coefficient");
        }
        Ok(Self { m0: basis.m0, n0: basis.n0, coeffs })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { m0: self.m0, n0: self.n0, coeffs: self.coeffs.iter().map(|c| c * k).collect() }
    }

    /// Value of the coefficient series at `x`.
    pub fn eval(&self, basis: &KlBasis, x: &[f64]) -> Result<f64> {
        check_basis(self, basis)?;
        Ok(basis.basis_values(x)?.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum())
    }

    pub fn eval_many(&self, basis: &KlBasis, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.eval(basis, x)).collect()
    }

    /// CSV rows `(m, n, l, value)`.
    pub fn write_csv(&self, basis: &KlBasis, path: &Path) -> Result<()> {
        check_basis(self, basis)?;
        let rows: Vec<Vec<String>> = basis
            .modes()
            .iter()
            .zip(&self.coeffs)
            .map(|(&(m, l, n), &c)| vec![m.to_string(), n.to_string(), l.to_string(), fmt_f64(c)])
            .collect();
        write_csv(path, &["m", "n", "l", "value"], &rows)
    }
}

fn check_basis(f: &RkhsFunction, basis: &KlBasis) -> Result<()> {
    if f.m0 != basis.m0 || f.n0 != basis.n0 || f.coeffs.len() != basis.modes().len() {
        return domain(format!(
            "function truncated at ({}, {}) used with basis ({}, {})",
            f.m0, f.n0, basis.m0, basis.n0
        ));
    }
    Ok(())
}

/// `Σ f g / λ`.
pub fn inner_product(f: &RkhsFunction, g: &RkhsFunction, basis: &KlBasis) -> Result<f64> {
    check_basis(f, basis)?;
    check_basis(g, basis)?;
    let mut acc = 0.0;
    for ((&(m, _, n), a), b) in basis.modes().iter().zip(&f.coeffs).zip(&g.coeffs) {
        let lam = basis.lambda(m, n);
        if *a != 0.0 && *b != 0.0 {
            if !(lam > 0.0) {
                return Err(Error::IllConditioned(format!("coefficient on mode (m={m}, n={n}) with λ = {lam:e}")));
            }
            acc += a * b / lam;
        }
    }
    Ok(acc)
}

/// `‖f‖_S = √(Σ (f^l_mn)² / λ_mn)`.
pub fn strassen_norm(f: &RkhsFunction, basis: &KlBasis) -> Result<f64> {
    Ok(inner_product(f, f, basis)?.sqrt())
}

/// Coefficients `λ_mn ψ_mn(|y|) S^l_m(ŷ)` of `R(·, y)`.
pub fn representer(y: &[f64], basis: &KlBasis) -> Result<RkhsFunction> {
    let mut v = basis.basis_values(y)?;
    for (c, &(m, _, n)) in v.iter_mut().zip(basis.modes()) {
        *c *= basis.lambda(m, n);
    }
    RkhsFunction::from_coeffs(basis, v)
}

/// Metric projection onto Strassen's ball.
pub fn project_to_ball(f: &RkhsFunction, basis: &KlBasis) -> Result<RkhsFunction> {
    let nrm = strassen_norm(f, basis)?;
    Ok(if nrm <= 1.0 { f.clone() } else { f.scaled(1.0 / nrm) })
}

/// Product quadrature over `[0, 1] × S^{N-1}` with measure `dr dS`.
#[derive(Debug, Clone)]
pub struct ProductGrid {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub radial_weights: Vec<f64>,
    pub directions: Vec<AngleCoords>,
    pub angular_weights: Vec<f64>,
    pub n_phi: usize,
    pub n_theta: usize,
}

impl ProductGrid {
    /// Radial nodes from the basis' Nyström grid, which makes the radial
    /// eigenfunctions exactly orthonormal under this quadrature. Angular part:
    /// trapezoid in `φ`, Gauss-Legendre in `cos ϑ` for `N = 3`.
    pub fn for_basis(basis: &KlBasis, n_phi: usize, n_theta: usize) -> Result<Self> {
        let es = &basis.systems[0];
        let dim = basis.params.dim;
        let mut directions = Vec::new();
        let mut angular_weights = Vec::new();
        match dim {
            2 => {
                for j in 0..n_phi {
                    directions.push(AngleCoords::new(2.0 * PI * j as f64 / n_phi as f64, vec![])?);
                    angular_weights.push(2.0 * PI / n_phi as f64);
                }
            }
            3 => {
                let (ct, wt) = gauss_legendre(n_theta.max(1));
                for (c, w) in ct.iter().zip(&wt) {
                    for j in 0..n_phi {
                        directions.push(AngleCoords::new(2.0 * PI * j as f64 / n_phi as f64, vec![c.acos()])?);
                        angular_weights.push(w * 2.0 * PI / n_phi as f64);
                    }
                }
            }
            n => return Err(Error::UnsupportedDimension(n)),
        }
        Ok(Self {
            dim,
            radii: es.nodes.clone(),
            radial_weights: es.weights.clone(),
            directions,
            angular_weights,
            n_phi,
            n_theta,
        })
    }

    /// Cartesian points in the order `(radius, direction)`, radius-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.radii.len() * self.directions.len());
        for &r in &self.radii {
            for d in &self.directions {
                out.push(d.to_unit_vector().iter().map(|v| v * r).collect());
            }
        }
        out
    }

    fn check_resolution(&self, basis: &KlBasis) -> Result<()> {
        let m0 = basis.m0;
        if self.n_phi < 4 * m0.max(1) {
            return Err(Error::Resolution(format!(
                "angular grid of {} points cannot resolve degree {m0} (need >= {})",
                self.n_phi,
                4 * m0.max(1)
            )));
        }
        if self.dim == 3 && self.n_theta < 2 * m0 + 1 {
            return Err(Error::Resolution(format!(
                "polar grid of {} points cannot resolve degree {m0} (need >= {})",
                self.n_theta,
                2 * m0 + 1
            )));
        }
        if self.radii.len() < basis.n0 {
            return Err(Error::Resolution(format!(
                "radial grid of {} points cannot resolve {} radial modes",
                self.radii.len(),
                basis.n0
            )));
        }
        Ok(())
    }
}

/// `f^l_mn = ∫₀¹ ∫ f ψ_mn(r) S^l_m dS dr` from values at `grid.points()`.
pub fn fourier_coeffs(values: &[f64], grid: &ProductGrid, basis: &KlBasis) -> Result<RkhsFunction> {
    grid.check_resolution(basis)?;
    let nd = grid.directions.len();
    if values.len() != grid.radii.len() * nd {
        return domain(format!("expected {} grid values, got {}", grid.radii.len() * nd, values.len()));
    }
    let n0 = basis.n0;
    // radial eigenfunctions at the grid radii and harmonics at the directions
    let psi: Vec<Vec<Vec<f64>>> = (0..=basis.m0)
        .map(|m| grid.radii.iter().map(|&r| basis.systems[m].eval_all(r)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let harm: Vec<Vec<Vec<f64>>> =
        (0..=basis.m0).map(|m| grid.directions.iter().map(|a| harmonics(grid.dim, m, a)).collect()).collect();
    let mut coeffs = Vec::with_capacity(basis.modes().len());
    for m in 0..=basis.m0 {
        let h = harm[m][0].len();
        // angular projection for every radius first
        let mut ang = vec![vec![0.0; h]; grid.radii.len()];
        for (k, row) in ang.iter_mut().enumerate() {
            for j in 0..nd {
                let fv = values[k * nd + j] * grid.angular_weights[j];
                for (l, a) in row.iter_mut().enumerate() {
                    *a += fv * harm[m][j][l];
                }
            }
        }
        for l in 0..h {
            for n in 0..n0 {
                let c: f64 = (0..grid.radii.len()).map(|k| grid.radial_weights[k] * ang[k][l] * psi[m][k][n]).sum();
                coeffs.push(c);
            }
        }
    }
    RkhsFunction::from_coeffs(basis, coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    /// `(m0, n0, Σ f²/λ)` per truncation.
    pub partial_sums: Vec<(usize, usize, f64)>,
    pub verdict: Verdict,
}

/// Partial sums of `Σ (f^l_mn)²/λ_mn` across a schedule of truncations, all
/// nested in `basis`, with a ratio-test verdict on the increments.
pub fn bernstein_membership(
    values: &[f64],
    grid: &ProductGrid,
    basis: &KlBasis,
    schedule: &[(usize, usize)],
) -> Result<MembershipReport> {
    let f = fourier_coeffs(values, grid, basis)?;
    let mut partial_sums = Vec::with_capacity(schedule.len());
    for &(m0, n0) in schedule {
        if m0 > basis.m0 || n0 > basis.n0 {
            return domain(format!("truncation ({m0}, {n0}) exceeds the basis ({}, {})", basis.m0, basis.n0));
        }
        let s: f64 = basis
            .modes()
            .iter()
            .zip(&f.coeffs)
            .filter(|(&(m, _, n), _)| m <= m0 && n <= n0)
            .map(|(&(m, _, n), c)| c * c / basis.lambda(m, n))
            .sum();
        partial_sums.push((m0, n0, s));
    }
    let verdict = verdict_of(&partial_sums);
    Ok(MembershipReport { partial_sums, verdict })
}

const RATIO_CONVERGED: f64 = 0.8;

fn verdict_of(sums: &[(usize, usize, f64)]) -> Verdict {
    let last = match sums.last() {
        Some(s) => s.2,
        None => return Verdict::Inconclusive,
    };
    if last <= 1e-20 {
        return Verdict::Converged;
    }
    if sums.len() < 3 {
        return Verdict::Inconclusive;
    }
    let inc: Vec<f64> = sums.windows(2).map(|w| (w[1].2 - w[0].2).max(0.0)).collect();
    let (a, b) = (inc[inc.len() - 2], inc[inc.len() - 1]);
    // a tail decaying like k^{-p} gives ratios 2^{-p} under doubling;
    // growth of the partial sums keeps the ratio at or above 1
    if b <= 1e-3 * last || (a > 0.0 && b / a < RATIO_CONVERGED) {
        Verdict::Converged
    } else if a > 0.0 && b / a >= 1.0 {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    }
}
