//! Shape-memory cycle of the cantilever: hot loading, cold fixing, load
//! removal and reheat recovery.

use thermorod::scenario::{parse_config, run_scenario, Quantity, RunOptions};

fn main() -> thermorod::Result<()> {
    let mut cfg = parse_config("cantilever-morph")?;
    cfg.discretization.h = Quantity::Si(5e-3);
    let out = run_scenario(&cfg, &RunOptions::default())?;
    if let Some(e) = &out.failure {
        eprintln!("stopped early: {e}");
    }
    for t in [0.5, 1.0, 1.5, 1.625, 2.0, 2.125, 2.5] {
        let r = out.records.iter().min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs())).unwrap();
        let u = r.probes[0];
        println!(
            "t = {:5.3} s  T = {:5.1} C  load {:4.2}  |u_tip| = {:.4} m",
            r.time,
            r.temperature,
            r.load_factor,
            u.norm()
        );
    }
    Ok(())
}
