//! Collocation solve of a straight cantilever under a small tip force,
//! compared with the Timoshenko deflection.

use thermorod::geometry::{build_straight, End, PatchEnd};
use thermorod::material::{build_section_tensors, PronySeries, SectionProperties};
use thermorod::so3::Vec3;
use thermorod::solver::{BeamModel, NodeModel, NodePhase, PatchModel, Schedule, Simulation, SolverSettings, VectorSchedule};

fn main() -> thermorod::Result<()> {
    let (e, d, f) = (2e9, 0.02, 0.05);
    let mat = PronySeries::elastic("elastic", e, 0.3);
    let section = SectionProperties::circular(d, 1.0)?;
    let g = e / 2.6;
    let exact = f / (3.0 * e * section.i1) + f / (g * section.area);
    for n in [6, 10, 16] {
        let cfg = build_straight(Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 4, n, Vec3::x())?;
        let ramp = Schedule::new(vec![(0.0, 0.0), (1.0, 1.0)])?;
        let tip = NodePhase { force: VectorSchedule::new(Vec3::new(0.0, 0.0, f), ramp), ..NodePhase::free(0.0) };
        let model = BeamModel {
            patches: vec![PatchModel::new(cfg, build_section_tensors(&mat, &section))],
            nodes: vec![
                NodeModel::new("root", vec![PatchEnd { patch: 0, end: End::Start }], vec![NodePhase::clamped(0.0)]),
                NodeModel::new("tip", vec![PatchEnd { patch: 0, end: End::End }], vec![tip]),
            ],
            material: mat.clone(),
            temperature: Schedule::constant(70.0),
        };
        let mut sim = Simulation::new(model, SolverSettings::default())?;
        let report = sim.advance_step(1.0)?;
        let w = sim.displacement(0, 1.0)?.z;
        println!(
            "n = {n:2}: tip {w:.6e} m, Timoshenko {exact:.6e} m, rel {:.1e}, {} Newton iterations",
            (w - exact).abs() / exact,
            report.iterations
        );
    }
    Ok(())
}
