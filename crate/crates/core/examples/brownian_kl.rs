//! Nyström eigenvalues of the Brownian kernel `min(r, s)` on `[0, 1]`
//! against `4 / ((2n - 1)² π²)`.

use std::f64::consts::PI;

use mfbm::mercer::{decompose, nystrom_extend, KernelSource, NystromScheme};

fn main() -> mfbm::Result<()> {
    for scheme in [NystromScheme::Plain, NystromScheme::KinkCorrected] {
        let es = decompose(KernelSource::BrownianMin, 256, 10, scheme)?;
        println!("{scheme:?}");
        for (i, l) in es.lambdas.iter().enumerate() {
            let exact = 4.0 / ((2.0 * i as f64 + 1.0).powi(2) * PI * PI);
            println!("  n={:>2} λ={l:.12e} rel.err={:.2e}", i + 1, ((l - exact) / exact).abs());
        }
        // ψ₁(r) = √2 sin(πr/2), so ψ₁(0.5) = 1
        println!("  psi_1(0.5) = {:.8}", nystrom_extend(&es, 1, 0.5)?);
    }
    Ok(())
}
