//! Lévy modulus of continuity: the modulus statistic on a fine lattice and
//! the attraction and entry statistics of the Lévy increment cloud.

use mfbm::field::{FreqGrid, KlBasis, SpectralSampler};
use mfbm::kernel::ModelParams;
use mfbm::limits::{campaign, lattice_in_ball, modulus_statistic, CloudOptions, Example};
use mfbm::rkhs::{representer, strassen_norm, ProductGrid};

fn main() -> mfbm::Result<()> {
    let p = ModelParams::new(2, 0.5)?;
    let grid = FreqGrid { shells: 128, ..FreqGrid::default() };
    let sampler = SpectralSampler::full_range(p, grid)?;
    let seed = 2;

    let lattice = lattice_in_ball(2, 1.0 / 64.0, 1.0);
    let sample = sampler.sample(&lattice, seed, 0)?;
    for k in 3..=6 {
        let u = 0.5f64.powi(k);
        println!("u = 2^-{k}: modulus statistic {:.4}", modulus_statistic(&sample, u)?);
    }

    let basis = KlBasis::build(p, 4, 8, 16)?;
    let pgrid = ProductGrid::for_basis(&basis, 16, 0)?;
    let rep = representer(&[0.3, 0.2], &basis)?;
    let target = rep.scaled(0.7 / strassen_norm(&rep, &basis)?);
    let field = sampler.realize(seed, 0);
    let opts = CloudOptions { max_members: 16, seed, t_max: None };
    let schedule: Vec<f64> = (3..=6).map(|k| 0.5f64.powi(k)).collect();
    for r in campaign(Example::Levy, &schedule, &field, &basis, &pgrid, Some(&target), &opts)? {
        println!(
            "u = {:.5}: excess median {:.3}, supdist {:.3}, enter {:.3}, sup {:.3}",
            r.scale, r.attract_excess_median, r.attract_supdist, r.enter_dist, r.functional_sup
        );
    }
    Ok(())
}
