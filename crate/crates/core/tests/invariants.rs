use std::f64::consts::PI;

use proptest::prelude::*;

use thermorod::geometry::{build_arch, build_straight};
use thermorod::material::{build_section_tensors, PronySeries, SectionProperties, WlfParams};
use thermorod::scenario::{parse_config, run_scenario, Quantity, RunOptions, Runner};
use thermorod::so3::{exp_so3, Rotation, Vec3};
use thermorod::solver::Schedule;

fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-r..r).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
}

fn so3_defect(r: &Rotation) -> (f64, f64) {
    let m = r.matrix();
    ((m.transpose() * m - thermorod::so3::Mat3::identity()).norm(), (m.determinant() - 1.0).abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composed_updates_stay_on_so3(steps in prop::collection::vec(arb_vec(2.0), 1..40)) {
        let mut r = Rotation::identity();
        for s in &steps {
            r = r.compose(&exp_so3(s)).with_drift_correction();
        }
        let (orth, det) = so3_defect(&r);
        prop_assert!(orth < 1e-12 && det < 1e-12);
    }

    #[test]
    fn log_inverts_exp(v in arb_vec(1.7)) {
        prop_assume!(v.norm() < PI - 1e-6);
        let back = exp_so3(&v).log();
        prop_assert!((back - v).norm() < 1e-10 * v.norm().max(1.0));
    }

    #[test]
    fn circular_section_formulas(d in 1e-4f64..1.0) {
        let s = SectionProperties::circular(d, 1.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b;
        prop_assert!(close(s.area, PI * d * d / 4.0));
        prop_assert!(close(s.i1, PI * d.powi(4) / 64.0) && close(s.i2, s.i1));
        prop_assert!(close(s.torsion, PI * d.powi(4) / 32.0));
    }

    #[test]
    fn instantaneous_tensors_dominate_equilibrium(d in 1e-4f64..0.1) {
        let t = build_section_tensors(&PronySeries::pla_van_manen(), &SectionProperties::circular(d, 1.0).unwrap());
        for k in 0..3 {
            prop_assert!(t.cn_inf[k] >= 0.0 && t.cm_inf[k] >= 0.0);
            prop_assert!(t.cn0()[k] >= t.cn_inf[k] && t.cm0()[k] >= t.cm_inf[k]);
        }
        prop_assert!(t.cn.iter().chain(&t.cm).all(|c| c.iter().all(|&x| x >= 0.0)));
    }

    #[test]
    fn relaxation_times_fall_with_temperature(t1 in 25.0f64..120.0, dt in 0.1f64..30.0) {
        let wlf = WlfParams::VAN_MANEN;
        prop_assert!(wlf.multiplier(t1 + dt).unwrap() < wlf.multiplier(t1).unwrap());
    }

    #[test]
    fn arch_frames_follow_the_tangent(radius in 0.2f64..5.0, sweep in 0.2f64..3.0, p in 2usize..7, extra in 0usize..10) {
        let cfg = build_arch(radius, sweep, p, p + 4 + extra).unwrap();
        for pt in &cfg.points {
            let t = pt.c_s.normalize();
            prop_assert!((pt.rotation.column(2) - t).norm() < 1e-10);
            prop_assert!((pt.curvature.norm() - 1.0 / radius).abs() < 1e-8 / radius);
        }
    }

    #[test]
    fn unsorted_schedules_are_rejected(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        prop_assume!(a > b);
        prop_assert!(Schedule::new(vec![(a, 1.0), (b, 2.0)]).is_err());
    }

    #[test]
    fn nonpositive_steps_are_rejected(h in -1.0f64..=0.0) {
        let mut cfg = parse_config("arch-90").unwrap();
        cfg.discretization.h = Quantity::Si(h);
        prop_assert!(cfg.validate().is_err());
    }
}

#[test]
fn strains_match_their_definition_at_every_iterate() {
    let mut cfg = parse_config("arch-90").unwrap();
    cfg.discretization.control_points = 10;
    cfg.discretization.h = Quantity::Si(0.25);
    let mut runner = Runner::new(&cfg).unwrap();
    for _ in 0..6 {
        runner.step().unwrap();
        let sim = &runner.sim;
        let init = &sim.model.patches[0].config.points;
        for ((k, ip), ps) in sim.kinematics(0).iter().zip(init).zip(&sim.patches[0].points) {
            let gamma = ps.rotation.apply_transpose(&k.c_s);
            assert!((k.strain - (gamma - ip.gamma)).norm() < 1e-12);
            assert!((k.curvature_strain - (ps.curvature - ip.curvature)).norm() < 1e-12);
        }
    }
}

#[test]
fn one_record_per_accepted_step() {
    let mut cfg = parse_config("cantilever-morph").unwrap();
    cfg.discretization.h = Quantity::Si(0.05);
    let out = run_scenario(&cfg, &RunOptions { stop_time: Some(1.0), ..Default::default() }).unwrap();
    assert!(out.succeeded());
    assert_eq!(out.records.len(), 21);
    assert!(out.records.windows(2).all(|w| w[1].time > w[0].time));
}

#[test]
fn straight_patch_has_no_initial_curvature() {
    let cfg = build_straight(Vec3::zeros(), Vec3::new(1.0, 2.0, -0.5), 5, 12, Vec3::z()).unwrap();
    assert!(cfg.points.iter().all(|p| p.curvature.norm() < 1e-12));
}
