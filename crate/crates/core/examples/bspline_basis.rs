//! B-spline and NURBS machinery: basis derivatives, Greville points and an
//! exact quarter circle.

use thermorod::geometry::arch_patch;
use thermorod::so3::Vec3;
use thermorod::splines::{KnotVector, SplinePatch};

fn main() -> thermorod::Result<()> {
    let knots = KnotVector::uniform(3, 7)?;
    println!("knots p = 3, n = 7: {:?}", knots.knots());

    let cps: Vec<Vec3> = (0..7).map(|i| Vec3::new(i as f64, (i as f64).sin(), 0.0)).collect();
    let patch = SplinePatch::bspline(knots, cps)?;
    let table = patch.basis_eval(0.4, 2)?;
    for (k, row) in table.ders.iter().enumerate() {
        println!("d^{k}N/du^{k} at u = 0.4 (functions {}..): {row:.4?}", table.first);
    }
    println!("sum of values = {:.15}", table.ders[0].iter().sum::<f64>());
    println!("greville: {:.4?}", patch.greville());

    // rational arc, refined to degree 4 and 10 control points
    let arc = arch_patch(1.0, std::f64::consts::FRAC_PI_2, 4, 10)?;
    let mut worst = 0.0f64;
    for i in 0..=100 {
        worst = worst.max((arc.curve_eval(i as f64 / 100.0, 0)?[0].norm() - 1.0).abs());
    }
    println!("quarter circle, p = 4, n = 10: max radius error {worst:.2e}");
    Ok(())
}
