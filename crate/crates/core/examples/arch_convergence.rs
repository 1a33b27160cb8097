//! Spatial convergence on the arch with a coarse time step and a reduced
//! reference, small enough to run in seconds.

use thermorod::scenario::{convergence_csv, convergence_study, parse_config, Quantity};

fn main() -> thermorod::Result<()> {
    let mut cfg = parse_config("arch-90")?;
    cfg.discretization.h = Quantity::Si(0.1);
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let rows = convergence_study(&cfg, &[4, 6], &[10, 12, 16, 20, 24], (8, 60), 3.0, threads)?;
    print!("{}", convergence_csv(&rows));
    Ok(())
}
