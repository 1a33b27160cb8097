use std::f64::consts::PI;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{build_arch, build_straight, End, InitialConfig, PatchEnd};
use crate::material::{build_section_tensors, PronySeries, SectionProperties};
use crate::so3::Vec3;

fn elastic(e: f64) -> PronySeries {
    PronySeries::elastic("elastic", e, 0.3)
}

fn start(p: usize) -> PatchEnd {
    PatchEnd { patch: p, end: End::Start }
}

fn end(p: usize) -> PatchEnd {
    PatchEnd { patch: p, end: End::End }
}

fn tip_phase(force: Vec3, moment: Vec3, ramp: f64) -> NodePhase {
    let profile = Schedule::new(vec![(0.0, 0.0), (ramp, 1.0)]).unwrap();
    NodePhase {
        force: VectorSchedule::new(force, profile.clone()),
        moment: VectorSchedule::new(moment, profile),
        ..NodePhase::free(0.0)
    }
}

fn cantilever(configs: Vec<InitialConfig>, mat: PronySeries, d: f64, tip: NodePhase) -> BeamModel {
    let section = SectionProperties::circular(d, 1.0).unwrap();
    let tensors = build_section_tensors(&mat, &section);
    let n = configs.len();
    let patches = configs.into_iter().map(|c| PatchModel::new(c, tensors.clone())).collect();
    let mut nodes = vec![NodeModel::new("root", vec![start(0)], vec![NodePhase::clamped(0.0)])];
    for k in 1..n {
        nodes.push(NodeModel::new(format!("joint{k}"), vec![end(k - 1), start(k)], vec![NodePhase::free(0.0)]));
    }
    nodes.push(NodeModel::new("tip", vec![end(n - 1)], vec![tip]));
    BeamModel { patches, nodes, material: mat, temperature: Schedule::constant(70.0) }
}

fn arch_model(n: usize, p: usize, mat: PronySeries, load: f64) -> BeamModel {
    let cfg = build_arch(1.0, 0.5 * PI, p, n).unwrap();
    let tip = tip_phase(Vec3::zeros(), Vec3::new(0.0, load, load), 5.0);
    let mut m = cantilever(vec![cfg], mat, 0.05, tip);
    m.temperature = Schedule::new(vec![(0.0, 31.5), (5.0, 90.0)]).unwrap();
    m
}

/// Central-difference error of the assembled Jacobian along `dir`.
fn fd_error(sim: &Simulation, ctx: &StepContext, dir: &[f64], eps: f64) -> f64 {
    let (mat, _) = sim.assemble_system(ctx, true);
    let jd = mat.unwrap().mul_vec(dir);
    let mut plus = sim.clone();
    plus.apply_increment(dir, eps);
    let mut minus = sim.clone();
    minus.apply_increment(dir, -eps);
    let (_, rp) = plus.assemble_system(ctx, false);
    let (_, rm) = minus.assemble_system(ctx, false);
    rp.iter()
        .zip(&rm)
        .zip(&jd)
        .map(|((a, b), j)| ((a - b) / (2.0 * eps) - j).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut sim = Simulation::new(arch_model(10, 4, PronySeries::pla_van_manen(), 25.0), SolverSettings::default()).unwrap();
    for _ in 0..3 {
        sim.advance_step(0.05).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = sim.dof_count();
    let kick: Vec<f64> = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
    sim.apply_increment(&kick, 1.0);
    let ctx = sim.step_context(0.05).unwrap();
    let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let e1 = fd_error(&sim, &ctx, &dir, 1e-3);
    let e2 = fd_error(&sim, &ctx, &dir, 5e-4);
    let slope = (e1 / e2).log2();
    assert!((slope - 2.0).abs() < 0.3, "slope {slope} ({e1:e}, {e2:e})");
}

#[test]
fn zero_increment_needs_no_iterations() {
    let model = arch_model(8, 3, elastic(80e6), 0.0);
    let mut sim = Simulation::new(model, SolverSettings::default()).unwrap();
    let r = sim.advance_step(0.1).unwrap();
    assert_eq!(r.iterations, 0);
}

#[test]
fn timoshenko_tip_deflection() {
    let (e, d, f, l) = (1e9, 0.02, 1e-2, 1.0);
    let cfg = build_straight(Vec3::zeros(), Vec3::new(0.0, l, 0.0), 4, 12, Vec3::x()).unwrap();
    let tip = tip_phase(Vec3::new(0.0, 0.0, f), Vec3::zeros(), 1.0);
    let mut sim = Simulation::new(cantilever(vec![cfg], elastic(e), d, tip), SolverSettings::default()).unwrap();
    sim.advance_step(1.0).unwrap();
    let s = SectionProperties::circular(d, 1.0).unwrap();
    let g = e / 2.6;
    let expected = f * l.powi(3) / (3.0 * e * s.i1) + f * l / (g * s.area);
    let w = sim.displacement(0, 1.0).unwrap().z;
    assert!((w - expected).abs() < 5e-3 * expected, "{w} vs {expected}");
}

#[test]
fn tip_force_equals_spatial_resultant() {
    // spatial force R N equals the tip load exactly at the end and to
    // collocation accuracy inside, improving under refinement
    let force = Vec3::new(0.0, 0.0, 50.0);
    let worst = |n: usize| {
        let cfg = build_straight(Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 4, n, Vec3::x()).unwrap();
        let tip = tip_phase(force, Vec3::zeros(), 1.0);
        let mut sim = Simulation::new(cantilever(vec![cfg], elastic(80e6), 0.05, tip), SolverSettings::default()).unwrap();
        for _ in 0..5 {
            sim.advance_step(0.2).unwrap();
        }
        assert!(sim.displacement(0, 1.0).unwrap().norm() > 0.05);
        let res = sim.resultants(0);
        let errs: Vec<f64> = sim.patches[0]
            .points
            .iter()
            .zip(&res)
            .map(|(ps, r)| (ps.rotation.apply(&r.n) - force).norm() / force.norm())
            .collect();
        assert!(errs[errs.len() - 1] < 1e-7);
        errs.iter().copied().fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(10), worst(40));
    assert!(fine < 1e-3 && fine < 0.01 * coarse, "{coarse:e} {fine:e}");
}

#[test]
fn pure_bending_has_constant_moment() {
    let cfg = build_straight(Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 4, 10, Vec3::x()).unwrap();
    let m = Vec3::new(0.0, 0.0, 0.5);
    let tip = tip_phase(Vec3::zeros(), m, 1.0);
    let mut sim = Simulation::new(cantilever(vec![cfg], elastic(80e6), 0.05, tip), SolverSettings::default()).unwrap();
    sim.advance_step(1.0).unwrap();
    let res = sim.resultants(0);
    for (ps, r) in sim.patches[0].points.iter().zip(&res) {
        assert!((ps.rotation.apply(&r.m) - m).norm() < 1e-7);
    }
}

#[test]
fn jointed_patches_match_single_patch() {
    // small loads: the linear response is cubic and lies in both spaces
    let tip = tip_phase(Vec3::new(0.0, 0.0, 3e-3), Vec3::new(5e-4, 0.0, 0.0), 1.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    let single = build_straight(Vec3::zeros(), y, 3, 9, Vec3::x()).unwrap();
    let halves = vec![
        build_straight(Vec3::zeros(), y * 0.5, 3, 9, Vec3::x()).unwrap(),
        build_straight(y * 0.5, y, 3, 9, Vec3::x()).unwrap(),
    ];
    let mat = elastic(80e6);
    let mut a = Simulation::new(cantilever(vec![single], mat.clone(), 0.05, tip.clone()), SolverSettings::default()).unwrap();
    let mut b = Simulation::new(cantilever(halves, mat, 0.05, tip), SolverSettings::default()).unwrap();
    for _ in 0..4 {
        a.advance_step(0.25).unwrap();
        b.advance_step(0.25).unwrap();
    }
    let ua = a.displacement(0, 1.0).unwrap();
    let ub = b.displacement(1, 1.0).unwrap();
    assert!((ua - ub).norm() < 1e-6 * ua.norm(), "{ua:?} vs {ub:?}");
}

#[test]
fn symmetry_plane_reproduces_full_model() {
    // straight beam along x2 from −1 to 1, clamped at both ends, loaded at
    // the midpoint; half model cut by the plane x2 = 0
    let mat = elastic(80e6);
    let section = SectionProperties::circular(0.05, 1.0).unwrap();
    let tensors = build_section_tensors(&mat, &section);
    let y = Vec3::new(0.0, 1.0, 0.0);
    let load = tip_phase(Vec3::new(0.0, 0.0, -200.0), Vec3::zeros(), 1.0);
    let full = BeamModel {
        patches: vec![
            PatchModel::new(build_straight(-y, Vec3::zeros(), 4, 10, Vec3::x()).unwrap(), tensors.clone()),
            PatchModel::new(build_straight(Vec3::zeros(), y, 4, 10, Vec3::x()).unwrap(), tensors.clone()),
        ],
        nodes: vec![
            NodeModel::new("a", vec![start(0)], vec![NodePhase::clamped(0.0)]),
            NodeModel::new("mid", vec![end(0), start(1)], vec![load.clone()]),
            NodeModel::new("b", vec![end(1)], vec![NodePhase::clamped(0.0)]),
        ],
        material: mat.clone(),
        temperature: Schedule::constant(70.0),
    };
    let mut half_load = NodePhase::symmetry(0.0, y);
    half_load.force = VectorSchedule::new(Vec3::new(0.0, 0.0, -100.0), Schedule::new(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap());
    let half = BeamModel {
        patches: vec![PatchModel::new(build_straight(-y, Vec3::zeros(), 4, 10, Vec3::x()).unwrap(), tensors)],
        nodes: vec![
            NodeModel::new("a", vec![start(0)], vec![NodePhase::clamped(0.0)]),
            NodeModel::new("mid", vec![end(0)], vec![half_load]),
        ],
        material: mat,
        temperature: Schedule::constant(70.0),
    };
    let mut a = Simulation::new(full, SolverSettings::default()).unwrap();
    let mut b = Simulation::new(half, SolverSettings::default()).unwrap();
    a.advance_step(1.0).unwrap();
    b.advance_step(1.0).unwrap();
    for k in 0..=8 {
        let u = k as f64 / 8.0;
        let da = a.displacement(0, u).unwrap();
        let db = b.displacement(0, u).unwrap();
        assert!((da - db).norm() < 1e-9 + 1e-8 * da.norm(), "u = {u}: {da:?} vs {db:?}");
    }
}

fn elastic_arch_tip(h: f64, moment: Vec3) -> Vec3 {
    let cfg = build_arch(1.0, 0.5 * PI, 4, 10).unwrap();
    let tip = tip_phase(Vec3::zeros(), moment, 5.0);
    let mut sim = Simulation::new(cantilever(vec![cfg], elastic(80e6), 0.05, tip), SolverSettings::default()).unwrap();
    let steps = (1.0 / h).round() as usize;
    for _ in 0..steps {
        sim.advance_step(h).unwrap();
    }
    sim.displacement(0, 1.0).unwrap()
}

#[test]
fn elastic_results_are_step_independent() {
    // in-plane bending: rotation increments commute
    let m = Vec3::new(0.0, 0.0, 25.0);
    let a = elastic_arch_tip(0.25, m);
    let b = elastic_arch_tip(0.125, m);
    assert!(a.norm() > 1e-2);
    assert!((a - b).norm() < 1e-10 * a.norm().max(1.0), "{a:?} vs {b:?}");
}

#[test]
fn spatial_rotation_path_dependence_is_small() {
    // out-of-plane couples: incremental rotation fields compose
    // non-commutatively, leaving a weak dependence on the step size
    let m = Vec3::new(0.0, 25.0, 25.0);
    let a = elastic_arch_tip(0.25, m);
    let b = elastic_arch_tip(0.125, m);
    let c = elastic_arch_tip(0.0625, m);
    let (d1, d2) = ((a - b).norm(), (b - c).norm());
    assert!(d1 < 1e-4 * a.norm(), "{a:?} vs {b:?}");
    assert!(d2 < d1, "{d1:e} {d2:e}");
}

#[test]
fn newton_converges_quadratically() {
    let mut sim = Simulation::new(arch_model(12, 4, PronySeries::pla_van_manen(), 25.0), SolverSettings::default()).unwrap();
    let mut r = sim.advance_step(1.0).unwrap();
    for _ in 0..2 {
        r = sim.advance_step(0.5).unwrap();
    }
    let res = &r.residuals;
    assert!(res.len() >= 4, "{res:?}");
    let tail = &res[res.len() - 3..];
    // r_{k+1} ≤ C r_k² with a modest constant relative to the first residual
    let c = res[0].max(1e-3);
    assert!(tail[2] <= 10.0 * tail[1] * tail[1] / c + 1e-12 || tail[2] < 1e-11, "{res:?}");
}

#[test]
fn l2_error_examples() {
    let a = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.0, 4.0)];
    assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
    let b: Vec<Vec3> = a.iter().map(|v| v * 1.01).collect();
    assert_relative_eq!(l2_error(&b, &a).unwrap(), 0.01, epsilon = 1e-14);
    assert!(matches!(l2_error(&a, &[Vec3::zeros(); 2]), Err(crate::Error::ZeroReference)));
}

#[test]
fn cold_unloaded_state_is_frozen() {
    let cfg = build_straight(Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 4, 10, Vec3::x()).unwrap();
    let profile = Schedule::new(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.0), (1.2, 0.0)]).unwrap();
    let tip = NodePhase {
        force: VectorSchedule::new(Vec3::new(0.0, 0.0, 20.0), profile),
        ..NodePhase::free(0.0)
    };
    let mut model = cantilever(vec![cfg], PronySeries::pla_van_manen(), 0.05, tip);
    model.temperature = Schedule::new(vec![(0.0, 90.0), (0.5, 90.0), (1.0, 31.5)]).unwrap();
    let mut sim = Simulation::new(model, SolverSettings::default()).unwrap();
    let h = 0.05;
    let mut last = Vec3::zeros();
    for k in 1..=40 {
        sim.advance_step(h).unwrap();
        let u = sim.displacement(0, 1.0).unwrap();
        if k > 26 {
            assert!((u - last).norm() < 1e-6 * u.norm(), "step {k}: {u:?} vs {last:?}");
        }
        last = u;
    }
    assert!(last.norm() > 1e-3);
}
