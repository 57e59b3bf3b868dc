//! Mercer decomposition of `b_m` and the reconstruction residual as modes
//! are added.

use mfbm::kernel::{ModelParams, RadialKernelSpec};
use mfbm::mercer::{mercer_decompose, nystrom_extend};

fn main() -> mfbm::Result<()> {
    let p = ModelParams::new(2, 0.5)?;
    let grid = 64;
    for m in [0, 1, 4] {
        let spec = RadialKernelSpec::new(p, m)?;
        let es = mercer_decompose(&spec, grid, grid)?;
        println!("m = {m}: {} modes above the floor, λ1 = {:.6e}", es.len(), es.lambdas[0]);
        for k in [1, 2, 4, 8, 16, 32, grid - 2] {
            if k <= es.len() {
                println!("  n_keep = {k:>2}  max residual = {:.3e}", es.reconstruction_residual(k)?);
            }
        }
        println!("  psi_1 at r = 0.3 (Nyström extension): {:.8}", nystrom_extend(&es, 1, 0.3)?);
    }
    Ok(())
}
