//! Rotation group tools: exponential and logarithm, the right Jacobian and
//! the multiplicative update used by Newton.

use thermorod::so3::{dexp_right, exp_so3, hat, Rotation, Vec3};

fn main() {
    let theta = Vec3::new(0.3, -0.2, 1.1);
    let r = exp_so3(&theta);
    println!("exp(theta) =\n{}", r.matrix());
    println!("log(exp(theta)) = {:?}", r.log().as_slice());
    println!("orthonormality defect {:.1e}", r.orthonormality_defect());

    // near pi the log picks the axis from the symmetric part
    let flip = Rotation::about_axis(&Vec3::new(1.0, 2.0, 2.0).normalize(), std::f64::consts::PI - 1e-9);
    println!("log near pi: {:?} (norm {:.9})", flip.log().as_slice(), flip.log().norm());

    // R exp(dtheta~) vs first-order expansion R (I + dtheta~)
    let d = Vec3::new(1e-4, 2e-4, -1e-4);
    let exact = r.compose(&exp_so3(&d));
    let linear = r.matrix() * (thermorod::so3::Mat3::identity() + hat(&d));
    println!("update error of the linear expansion: {:.2e}", (exact.matrix() - linear).norm());

    // T(theta) maps parameter rates to the right-trivialized angular velocity
    let t = dexp_right(&theta);
    let dt = Vec3::new(0.0, 1e-6, 0.0);
    let a = exp_so3(&theta).transpose().compose(&exp_so3(&(theta + dt))).log();
    println!("dexp check: {:.2e}", (a - t * dt).norm() / dt.norm());
}
