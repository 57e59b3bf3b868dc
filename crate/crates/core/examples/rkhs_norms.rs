//! Strassen norms: representers of point evaluations, projection onto the
//! unit ball and Bernstein-type membership tests.

use mfbm::field::KlBasis;
use mfbm::kernel::{covariance, ModelParams};
use mfbm::rkhs::{bernstein_membership, inner_product, project_to_ball, representer, strassen_norm, ProductGrid};

fn main() -> mfbm::Result<()> {
    let p = ModelParams::new(2, 0.5)?;
    let basis = KlBasis::build(p, 12, 24, 64)?;
    let y = [0.4, 0.3];
    let z = [-0.2, 0.6];
    let ry = representer(&y, &basis)?;
    let rz = representer(&z, &basis)?;
    println!("<R_y, R_z> = {:.6}, R(y, z) = {:.6}", inner_product(&ry, &rz, &basis)?, covariance(&y, &z, &p));
    println!("|R_y|_S = {:.6}, |y|^H = {:.6}", strassen_norm(&ry, &basis)?, 0.5f64.sqrt());
    let big = ry.scaled(3.0);
    println!("projection of 3 R_y has norm {:.6}", strassen_norm(&project_to_ball(&big, &basis)?, &basis)?);

    let grid = ProductGrid::for_basis(&basis, 48, 0)?;
    let pts = grid.points();
    let schedule = [(3, 6), (6, 12), (12, 24)];
    for alpha in [0.25, 0.5, 1.0, 2.0] {
        let values: Vec<f64> = pts.iter().map(|x| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(alpha)).collect();
        let rep = bernstein_membership(&values, &grid, &basis, &schedule)?;
        let sums: Vec<String> = rep.partial_sums.iter().map(|s| format!("{:.3}", s.2)).collect();
        println!("|x|^{alpha}: partial sums [{}] -> {:?}", sums.join(", "), rep.verdict);
    }
    Ok(())
}
