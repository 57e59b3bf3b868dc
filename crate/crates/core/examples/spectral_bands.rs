//! Spectral representation: the constant C₄, band-limited variances and a
//! discretized sampler split into two bands.

use mfbm::field::{band_variance, c4_constant, c4_printed, FreqGrid, SpectralSampler};
use mfbm::kernel::ModelParams;

fn main() -> mfbm::Result<()> {
    for n in [1, 2, 3] {
        for h in [0.3, 0.5, 0.7] {
            let p = ModelParams::new(n, h)?;
            let full = band_variance(&p, 0.6, 0.0, f64::INFINITY)?;
            println!(
                "N={n} H={h}: C4={:.6} (printed form {:.6}), variance at |x|=0.6: {:.8} vs {:.8}",
                c4_constant(&p)?,
                c4_printed(&p)?,
                full,
                0.6f64.powf(2.0 * h)
            );
        }
    }

    let p = ModelParams::new(2, 0.5)?;
    let grid = FreqGrid::default();
    let low = SpectralSampler::new(p, (1.0, 10.0), grid)?;
    let high = SpectralSampler::new(p, (10.0, 100.0), grid)?;
    let x = [0.5, 0.2];
    let r = (0.29f64).sqrt();
    let sum = low.discretized_variance(&x) + high.discretized_variance(&x);
    let quad = band_variance(&p, r, 1.0, 100.0)?;
    println!("bands (1,10] + (10,100] at {x:?}: discretized {sum:.6}, quadrature {quad:.6}");

    let full = SpectralSampler::full_range(p, grid)?;
    let s = full.sample(&[vec![0.0, 0.0], x.to_vec()], 5, 0)?;
    println!("{} cells; sample values {:?}", full.cell_count(), s.values);
    Ok(())
}
