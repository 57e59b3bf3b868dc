//! Closed-form radial kernel `b_m(r, s)` against its quadrature oracle.

use mfbm::kernel::{kernel_closed_form, KernelQuadrature, ModelParams, RadialKernelSpec};

fn main() -> mfbm::Result<()> {
    println!("{:>2} {:>5} {:>2} {:>6} {:>6} {:>22} {:>10}", "N", "H", "m", "r", "s", "b_m", "rel.err");
    for n in [2, 3] {
        let quad = KernelQuadrature::new(n, 32)?;
        for h in [0.25, 0.5, 0.75] {
            let p = ModelParams::new(n, h)?;
            for m in [0, 1, 4, 8] {
                let spec = RadialKernelSpec::new(p, m)?;
                for (r, s) in [(0.1, 0.9), (0.5, 0.5), (0.7, 0.75)] {
                    let a = kernel_closed_form(&spec, r, s)?;
                    let b = quad.eval(&spec, r, s)?;
                    println!("{n:>2} {h:>5} {m:>2} {r:>6} {s:>6} {a:>22.15e} {:>10.2e}", ((a - b) / b).abs());
                }
            }
        }
    }
    Ok(())
}
