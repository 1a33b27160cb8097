//! Programming and recovery of a two-crown quarter stent: radial crimp,
//! cooling, release to free ends, reheat.

use thermorod::scenario::{parse_config, run_scenario, Quantity, RunOptions};

fn main() -> thermorod::Result<()> {
    let mut cfg = parse_config("stent-straight-quarter")?;
    cfg.geometry.crowns = Some(2);
    cfg.discretization.h = Quantity::Si(5e-3);
    let out = run_scenario(&cfg, &RunOptions::default())?;
    if let Some(e) = &out.failure {
        eprintln!("stopped early: {e}");
    }
    let radial = out.metric("mean_radial_change").unwrap();
    let shape = out.metric("max_shape_deviation").unwrap();
    for t in [0.5, 1.0, 1.75, 1.755, 2.0, 2.6, 3.25] {
        let (i, r) = out
            .records
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.time - t).abs().total_cmp(&(b.1.time - t).abs()))
            .unwrap();
        println!(
            "t = {:5.3} s  T = {:5.1} C  mean radial change {:7.3} mm  shape deviation {:7.3} mm",
            r.time,
            r.temperature,
            radial[i] * 1e3,
            shape[i] * 1e3
        );
    }
    Ok(())
}
