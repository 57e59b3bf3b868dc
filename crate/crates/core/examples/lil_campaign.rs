//! Local and global functional laws of the iterated logarithm: single-member
//! clouds along a scale schedule, plus the audit of the normalizing function.

use mfbm::field::{FreqGrid, KlBasis, SpectralSampler};
use mfbm::kernel::ModelParams;
use mfbm::limits::{campaign, normalizer_audit, CloudOptions, Example};
use mfbm::rkhs::ProductGrid;

fn main() -> mfbm::Result<()> {
    let p = ModelParams::new(2, 0.5)?;
    // global scales read the unit-ball field at u = t/t_max down to 1e-4,
    // so the frequency range must reach well beyond 1/u
    let sampler = SpectralSampler::full_range(p, FreqGrid { shells: 192, k_max: 1e6, ..FreqGrid::default() })?;
    let field = sampler.realize(4, 0);
    let basis = KlBasis::build(p, 4, 8, 16)?;
    let grid = ProductGrid::for_basis(&basis, 16, 0)?;

    let local: Vec<f64> = (2..=6).map(|k| 0.5f64.powi(k)).collect();
    let global: Vec<f64> = [1e1, 1e2, 1e3, 1e4, 1e5].to_vec();
    for (ex, sched, t_max) in [(Example::LocalLil, &local, None), (Example::GlobalLil, &global, Some(1e5))] {
        let audit = normalizer_audit(ex, sched, 2)?;
        println!(
            "{}: h increasing {}, density {}, dichotomy {}",
            ex.name(),
            audit.h_increasing,
            audit.density,
            audit.dichotomy_holds
        );
        let opts = CloudOptions { max_members: 1, seed: 4, t_max };
        for r in campaign(ex, sched, &field, &basis, &grid, None, &opts)? {
            println!("  scale {:>9.4e}: excess {:.3}, sup {:.3}", r.scale, r.attract_excess, r.functional_sup);
        }
    }
    Ok(())
}
