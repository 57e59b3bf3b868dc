//! Nyström discretization of the radial kernels on `[0, 1]` and the
//! resulting Mercer eigensystems.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{kernel_closed_form, RadialKernelSpec};
use crate::quadrature::gauss_legendre_on;

/// Relative floor below which eigenvalues are discarded.
pub const EIGEN_FLOOR: f64 = 1e-13;
/// Negative eigenvalues below `-NEGATIVE_TOL * λ_max` mean the discretized
/// kernel is not positive semidefinite.
pub const NEGATIVE_TOL: f64 = 1e-10;

/// Kernel being decomposed: a radial kernel `b_m`, or the Brownian kernel
/// `min(r, s)` used as an analytic test case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSource {
    Radial(RadialKernelSpec),
    BrownianMin,
}

impl KernelSource {
    pub fn eval(&self, r: f64, s: f64) -> Result<f64> {
        match self {
            KernelSource::Radial(spec) => kernel_closed_form(spec, r, s),
            KernelSource::BrownianMin => Ok(r.min(s)),
        }
    }

    /// `∫₀¹ K(r, s) ds`.
    fn row_integral(&self, r: f64) -> Result<f64> {
        match self {
            KernelSource::BrownianMin => Ok(r - 0.5 * r * r),
            KernelSource::Radial(_) => {
                let mut acc = 0.0;
                for (a, b) in [(0.0, r), (r, 1.0)] {
                    if b > a {
                        acc += graded_integral(|s| self.eval(r, s), a, b)?;
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// Integral over `[a, b]` with panels graded towards both ends.
fn graded_integral(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    const LEVELS: usize = 24;
    const ORDER: usize = 16;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    let mut cuts = vec![0.0];
    let mut x = 1.0;
    for _ in 0..LEVELS {
        x *= 0.5;
        cuts.push(1.0 - x);
    }
    cuts.push(1.0);
    for w in cuts.windows(2) {
        for sign in [-1.0, 1.0] {
            let (lo, hi) = (w[0], w[1]);
            let (xs, ws) = gauss_legendre_on(ORDER, mid + sign * half * lo, mid + sign * half * hi);
            for (x, wt) in xs.iter().zip(&ws) {
                acc += wt.abs() * f(*x)?;
            }
        }
    }
    Ok(acc)
}

/// How the integral operator is discretized.
///
/// `Plain` is the textbook `W^{1/2} K W^{1/2}` matrix. `KinkCorrected`
/// subtracts the singularity at the diagonal: the operator is written as
/// `∫ K(r,s)(ψ(s) - ψ(r)) ds + ψ(r) ∫ K(r,s) ds`, which restores
/// second-order accuracy for kernels with a kink on `r = s`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NystromScheme {
    #[default]
    Plain,
    KinkCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub source: KernelSource,
    pub scheme: NystromScheme,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Nonincreasing, strictly positive.
    pub lambdas: Vec<f64>,
    /// `psi[k][n]` is `ψ_n` at node `k`.
    pub psi: Vec<Vec<f64>>,
    /// Number of modes requested; may exceed `lambdas.len()` when modes
    /// fell under the floor.
    pub requested: usize,
    /// Diagonal correction of the kink-corrected scheme (empty for `Plain`).
    pub diag_correction: Vec<f64>,
}

/// Plain Nyström decomposition of `b_m` on a Gauss-Legendre grid.
pub fn mercer_decompose(spec: &RadialKernelSpec, grid_size: usize, n_keep: usize) -> Result<EigenSystem> {
    decompose(KernelSource::Radial(*spec), grid_size, n_keep, NystromScheme::Plain)
}

pub fn decompose(source: KernelSource, grid_size: usize, n_keep: usize, scheme: NystromScheme) -> Result<EigenSystem> {
    if n_keep < 1 || grid_size < n_keep {
        return domain(format!("need grid_size >= n_keep >= 1, got grid_size={grid_size}, n_keep={n_keep}"));
    }
    let (nodes, weights) = gauss_legendre_on(grid_size, 0.0, 1.0);
    let rows: Vec<Vec<f64>> = (0..grid_size)
        .into_par_iter()
        .map(|i| (0..grid_size).map(|j| source.eval(nodes[i], nodes[j])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut a = DMatrix::<f64>::from_fn(grid_size, grid_size, |i, j| {
        // symmetrize to remove rounding asymmetry of the kernel evaluation
        0.5 * (rows[i][j] + rows[j][i]) * sw[i] * sw[j]
    });
    let diag_correction = match scheme {
        NystromScheme::Plain => Vec::new(),
        NystromScheme::KinkCorrected => {
            let g: Vec<f64> = nodes.par_iter().map(|&r| source.row_integral(r)).collect::<Result<_>>()?;
            let d: Vec<f64> =
                (0..grid_size).map(|i| g[i] - (0..grid_size).map(|j| weights[j] * rows[i][j]).sum::<f64>()).collect();
            for i in 0..grid_size {
                a[(i, i)] += d[i];
            }
            d
        }
    };
    let eig = SymmetricEigen::try_new(a, 1e-15, 10_000).ok_or_else(|| {
        Error::Numeric(format!("symmetric eigensolver did not converge (grid_size={grid_size}, source={source:?})"))
    })?;
    let mut order: Vec<usize> = (0..grid_size).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let lmin = eig.eigenvalues[order[grid_size - 1]];
    if lmin < -NEGATIVE_TOL * lmax {
        return Err(Error::Integrity(format!(
            "kernel not positive semidefinite at this discretization: λ_min = {lmin:e}, λ_max = {lmax:e}"
        )));
    }
    let mut lambdas = Vec::new();
    let mut psi = vec![Vec::new(); grid_size];
    for &col in order.iter().take(n_keep) {
        let lam = eig.eigenvalues[col];
        if !(lam > EIGEN_FLOOR * lmax) {
            break;
        }
        let mut v: Vec<f64> = (0..grid_size).map(|k| eig.eigenvectors[(k, col)] / sw[k]).collect();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * vmax) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        lambdas.push(lam);
        for k in 0..grid_size {
            psi[k].push(v[k]);
        }
    }
    Ok(EigenSystem { source, scheme, nodes, weights, lambdas, psi, requested: n_keep, diag_correction })
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn grid_size(&self) -> usize {
        self.nodes.len()
    }

    /// `ψ_n` at node `k` (0-based node, 1-based mode).
    pub fn psi_at_node(&self, k: usize, n: usize) -> f64 {
        self.psi[k][n - 1]
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.requested {
            return domain(format!("mode index {n} outside 1..={}", self.requested));
        }
        if n > self.lambdas.len() {
            return Err(Error::IllConditioned(format!("mode {n} has eigenvalue below the floor {EIGEN_FLOOR:e}·λ_1")));
        }
        Ok(())
    }

    /// Nyström extension of all retained eigenfunctions to a radius `r`.
    pub fn eval_all(&self, r: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&r) {
            return domain(format!("radius {r} outside [0, 1]"));
        }
        let g = self.grid_size();
        let kr: Vec<f64> =
            (0..g).map(|j| Ok(self.weights[j] * self.source.eval(r, self.nodes[j])?)).collect::<Result<_>>()?;
        let correction = match self.scheme {
            NystromScheme::Plain => 0.0,
            NystromScheme::KinkCorrected => self.source.row_integral(r)? - kr.iter().sum::<f64>(),
        };
        Ok((0..self.len())
            .map(|n| {
                let s: f64 = (0..g).map(|j| kr[j] * self.psi[j][n]).sum();
                s / (self.lambdas[n] - correction)
            })
            .collect())
    }

    /// Kernel reconstructed from the first `n_keep` modes.
    pub fn reconstruct(&self, i: usize, j: usize, n_keep: usize) -> f64 {
        (0..n_keep.min(self.len())).map(|n| self.lambdas[n] * self.psi[i][n] * self.psi[j][n]).sum()
    }

    /// Max over the node grid of `|K(r_i, r_j) - Σ_{n ≤ n_keep} λ_n ψ_n(r_i) ψ_n(r_j)|`.
    pub fn reconstruction_residual(&self, n_keep: usize) -> Result<f64> {
        let g = self.grid_size();
        let mut worst = 0.0f64;
        for i in 0..g {
            for j in i..g {
                let k = self.source.eval(self.nodes[i], self.nodes[j])?;
                worst = worst.max((k - self.reconstruct(i, j, n_keep)).abs());
            }
        }
        Ok(worst)
    }

    /// `Σ_k w_k K(r_k, r_k)`.
    pub fn discrete_trace(&self) -> Result<f64> {
        self.nodes.iter().zip(&self.weights).map(|(&r, &w)| Ok(w * self.source.eval(r, r)?)).sum()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// `ψ_n(r)` by Nyström extension; `n` is 1-based.
pub fn nystrom_extend(es: &EigenSystem, n: usize, r: f64) -> Result<f64> {
    es.check_mode(n)?;
    Ok(es.eval_all(r)?[n - 1])
}

/// Relative eigenvalue changes between successive grid sizes, for the first
/// `modes` eigenvalues. Returns one row per consecutive pair of grids.
pub fn refinement_study(
    source: KernelSource,
    grids: &[usize],
    modes: usize,
    scheme: NystromScheme,
) -> Result<Vec<(usize, usize, Vec<f64>)>> {
    let systems: Vec<EigenSystem> =
        grids.iter().map(|&g| decompose(source, g, modes.min(g), scheme)).collect::<Result<_>>()?;
    Ok(systems
        .windows(2)
        .map(|w| {
            let k = w[0].len().min(w[1].len());
            let steps = (0..k).map(|n| ((w[1].lambdas[n] - w[0].lambdas[n]) / w[1].lambdas[n]).abs()).collect();
            (w[0].grid_size(), w[1].grid_size(), steps)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ModelParams;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn radial(n: usize, h: f64, m: usize) -> RadialKernelSpec {
        RadialKernelSpec::new(ModelParams::new(n, h).unwrap(), m).unwrap()
    }

    #[test]
    fn brownian_eigenvalues_and_function() {
        let es = decompose(KernelSource::BrownianMin, 256, 10, NystromScheme::KinkCorrected).unwrap();
        for n in 1..=10 {
            let exact = 4.0 / ((2.0 * n as f64 - 1.0).powi(2) * PI * PI);
            assert_relative_eq!(es.lambdas[n - 1], exact, max_relative = 1e-4);
        }
        assert_relative_eq!(es.lambdas[0], 0.405_284_735, max_relative = 1e-6);
        assert_relative_eq!(nystrom_extend(&es, 1, 0.5).unwrap(), 1.0, epsilon = 1e-3);
        assert_eq!(nystrom_extend(&es, 3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ordering_sign_and_orthonormality() {
        let es = mercer_decompose(&radial(2, 0.5, 1), 64, 12).unwrap();
        assert!(es.lambdas.windows(2).all(|w| w[0] >= w[1]));
        assert!(es.lambdas.iter().all(|&l| l > 0.0));
        for a in 0..es.len() {
            let first = es.psi.iter().map(|row| row[a]).find(|x| x.abs() > 1e-10).unwrap();
            assert!(first > 0.0);
            for b in 0..es.len() {
                let ip: f64 = (0..64).map(|k| es.weights[k] * es.psi[k][a] * es.psi[k][b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn trace_identity() {
        let es = mercer_decompose(&radial(3, 0.3, 0), 128, 128).unwrap();
        let s: f64 = es.lambdas.iter().sum();
        assert!((s - es.discrete_trace().unwrap()).abs() < 1e-6);
    }

    #[test]
    fn extension_reproduces_nodes() {
        let es = mercer_decompose(&radial(2, 0.7, 2), 48, 6).unwrap();
        for k in [0, 7, 30] {
            let v = es.eval_all(es.nodes[k]).unwrap();
            for n in 0..6 {
                assert!((v[n] - es.psi[k][n]).abs() < 1e-8);
            }
        }
        assert!(nystrom_extend(&es, 1, 0.0).unwrap().abs() < 1e-15);
        assert!(nystrom_extend(&es, 7, 0.3).is_err());
        assert!(nystrom_extend(&es, 0, 0.3).is_err());
    }

    #[test]
    fn reconstruction_decreases() {
        let es = mercer_decompose(&radial(2, 0.5, 0), 48, 46).unwrap();
        let scale = es.reconstruction_residual(0).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1, 2, 4, 8, 16, 46] {
            let r = es.reconstruction_residual(k).unwrap();
            assert!(r <= prev * (1.0 + 1e-12));
            prev = r;
        }
        assert!(prev < 1e-4 * scale);
    }

    #[test]
    fn golden_lambda_01() {
        // N = 3, H = 1/2, m = 0, frozen from a grid-doubling study
        let es = decompose(KernelSource::Radial(radial(3, 0.5, 0)), 128, 1, NystromScheme::Plain).unwrap();
        assert_relative_eq!(es.lambdas[0], LAMBDA_01_GOLDEN, max_relative = 1e-8);
    }

    const LAMBDA_01_GOLDEN: f64 = 1.926_561_391_145_836;

    #[test]
    fn bundle_roundtrip() {
        let es = mercer_decompose(&radial(2, 0.5, 3), 16, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.json");
        es.write_json(&p).unwrap();
        assert_eq!(EigenSystem::read_json(&p).unwrap(), es);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(mercer_decompose(&radial(2, 0.5, 0), 4, 5).is_err());
        assert!(mercer_decompose(&radial(2, 0.5, 0), 4, 0).is_err());
    }
}
