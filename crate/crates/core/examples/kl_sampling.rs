//! Truncated KL synthesis against exact Cholesky sampling: one path on a
//! lattice, then empirical covariances on a few points.

use mfbm::field::{covariance_from_values, gram_matrix, CholeskySampler, KlBasis, KlSampler};
use mfbm::kernel::ModelParams;
use mfbm::limits::lattice_in_ball;

fn main() -> mfbm::Result<()> {
    let p = ModelParams::new(2, 0.5)?;
    let basis = KlBasis::build(p, 8, 16, 64)?;
    let lattice = lattice_in_ball(2, 0.25, 1.0);
    let path = KlSampler::new(&basis, &lattice)?.sample(11, 0);
    println!("KL path on {} lattice points, value at (0.5, 0) = {:.6}", lattice.len(), {
        let i = lattice.iter().position(|x| x[0] == 0.5 && x[1] == 0.0).unwrap();
        path.values[i]
    });

    let pts = vec![vec![0.5, 0.0], vec![0.0, 0.5], vec![0.3, 0.3], vec![-0.8, 0.1]];
    let kl = KlSampler::new(&basis, &pts)?;
    let ch = CholeskySampler::new(p, &pts)?;
    let reps = 4000;
    let kl_est = covariance_from_values(&(0..reps).map(|k| kl.sample_values(3, k)).collect::<Vec<_>>())?;
    let ch_est = covariance_from_values(&(0..reps).map(|k| ch.sample_values(3, k)).collect::<Vec<_>>())?;
    let gram = gram_matrix(&p, &pts);
    let trunc = kl.truncated_covariance();
    println!("entry  exact   truncated  KL-MC   Cholesky-MC");
    for i in 0..pts.len() {
        for j in i..pts.len() {
            println!(
                "({i},{j})  {:.4}  {:.4}     {:.4}  {:.4}",
                gram[(i, j)],
                trunc[(i, j)],
                kl_est.cov[(i, j)],
                ch_est.cov[(i, j)]
            );
        }
    }
    println!("max z (Cholesky vs exact) = {:.2}", ch_est.max_z(&gram, None));
    Ok(())
}
