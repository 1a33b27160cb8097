//! From a validated configuration to a solver model.

use crate::error::{Error, Result};
use crate::geometry::{
    assembly_configs, build_arch, build_curved_stent, build_straight, build_straight_stent, curved_stent_half,
    straight_stent_quarter, BeamAssembly, End, PatchEnd,
};
use crate::material::{build_section_tensors, SectionProperties};
use crate::so3::Vec3;
use crate::solver::model::complement_pair;
use crate::solver::{
    BeamModel, NodeModel, NodePhase, PatchModel, RotationReference, Schedule, Target, TranslationConstraint,
    VectorSchedule,
};

use super::config::{Dim, GeometryKind, Prescribe, ScenarioConfig};

/// Programming data of a stent assembly: one entry per interface node.
#[derive(Debug, Clone)]
pub struct StentProgram {
    pub assembly: BeamAssembly,
    /// Master end of every node, in node order.
    pub node_ends: Vec<PatchEnd>,
    pub initial: Vec<Vec3>,
    /// Total displacement to the temporary shape.
    pub target: Vec<Vec3>,
    pub ramp: Schedule,
    pub release_time: f64,
    pub radial_contraction: f64,
    pub anchor: usize,
}

/// A ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: BeamModel,
    pub program: Option<StentProgram>,
    /// Parameter choices in effect, recorded in the run metadata.
    pub decisions: Vec<(String, String)>,
}

pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let material = config.material()?;
    let section = SectionProperties::circular(config.diameter(), config.section.shear_correction)?;
    let tensors = build_section_tensors(&material, &section);
    let temperature = config.temperature_schedule()?;
    let (p, n) = (config.discretization.degree, config.discretization.control_points);
    let g = &config.geometry;
    let mut decisions = vec![
        ("curvature_update".into(), "K <- exp(-Theta)K + T(Theta)Theta_s, exact K_s update".into()),
        ("rotation_storage".into(), "pointwise at collocation points, incremental spline field".into()),
        ("interface_coupling".into(), "rigid master-slave joints, spatial end-force balance".into()),
        ("linear_solver".into(), "sparse LU with row/column max-abs equilibration".into()),
        ("step_failure".into(), "recursive halving".into()),
        ("history_derivative".into(), "Psi_s advanced by the same recurrence as Psi".into()),
    ];
    let (model, program) = match g.kind {
        GeometryKind::Arch | GeometryKind::Straight => {
            let cfg = if g.kind == GeometryKind::Arch {
                let r = g.radius.as_ref().expect("validated").si(Dim::Length, "geometry.radius")?;
                let sweep = g.sweep.as_ref().expect("validated").si(Dim::Angle, "geometry.sweep")?;
                build_arch(r, sweep, p, n)?
            } else {
                let len = g.length.as_ref().expect("validated").si(Dim::Length, "geometry.length")?;
                let dir = Vec3::from(g.direction.unwrap_or([0.0, 1.0, 0.0])).normalize();
                let reference = Vec3::from(g.reference.unwrap_or([1.0, 0.0, 0.0]));
                build_straight(Vec3::zeros(), dir * len, p, n, reference)?
            };
            let mut tip = NodePhase::free(0.0);
            for (_, force, moment, profile) in config.load_schedules()? {
                tip.force = VectorSchedule::new(force, profile.clone());
                tip.moment = VectorSchedule::new(moment, profile);
            }
            let model = BeamModel {
                patches: vec![PatchModel::new(cfg, tensors)],
                nodes: vec![
                    NodeModel::new("root", vec![PatchEnd { patch: 0, end: End::Start }], vec![NodePhase::clamped(0.0)]),
                    NodeModel::new("tip", vec![PatchEnd { patch: 0, end: End::End }], vec![tip]),
                ],
                material,
                temperature,
            };
            (model, None)
        }
        GeometryKind::StraightStentQuarter | GeometryKind::CurvedStentHalf => {
            let (model, program) = stent_model(config, material, tensors, temperature, &mut decisions)?;
            (model, Some(program))
        }
    };
    let s = config.solver_settings();
    decisions.push(("tol_residual".into(), format!("{:e} (equilibrated residual)", s.tol_residual)));
    decisions.push(("tol_increment".into(), format!("{:e}", s.tol_increment)));
    decisions.push(("max_iter".into(), s.max_iter.to_string()));
    decisions.push(("max_halvings".into(), s.max_halvings.to_string()));
    for (i, note) in config.notes.iter().enumerate() {
        decisions.push((format!("note_{i}"), note.clone()));
    }
    Ok(Scenario { config: config.clone(), model, program, decisions })
}

/// Orthonormal basis of the span of `vs`, dropping dependent vectors.
fn span_basis(vs: &[Vec3]) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = vec![];
    for v in vs {
        let mut w = *v;
        for q in &out {
            w -= q * q.dot(&w);
        }
        if w.norm() > 1e-8 * v.norm().max(1e-300) {
            out.push(w.normalize());
        }
    }
    out
}

fn stent_model(
    config: &ScenarioConfig,
    material: crate::material::PronySeries,
    tensors: crate::material::StiffnessTensors,
    temperature: Schedule,
    decisions: &mut Vec<(String, String)>,
) -> Result<(BeamModel, StentProgram)> {
    let layout = config.stent_layout()?;
    let prog = config.programming.as_ref().expect("validated");
    let (dr, ramp_end, release) = config.programming_si()?.expect("validated");
    let curved = config.geometry.kind == GeometryKind::CurvedStentHalf;
    let assembly = if curved {
        curved_stent_half(&build_curved_stent(&layout)?, &layout)?
    } else {
        straight_stent_quarter(&build_straight_stent(&layout)?, &layout)?
    };
    let configs = assembly_configs(&assembly)?;
    let ramp = Schedule::new(vec![(0.0, 0.0), (ramp_end, 1.0)])?;
    let prescribe = prog.prescribe.unwrap_or(Prescribe::Radial);
    let lambda = (layout.crown_radius - dr) / layout.crown_radius;

    let mut initial = vec![];
    let mut target = vec![];
    let mut radial_dirs = vec![];
    for node in &assembly.nodes {
        let p0 = node.position;
        let p_temp = if curved {
            let tag = node
                .crown
                .ok_or_else(|| Error::Geometry(format!("node at {p0:?} is not on a crown")))?;
            let axis = layout.axis.expect("curved layout");
            let contracted = Vec3::new(lambda * tag.local.x, lambda * tag.local.y, tag.local.z);
            let planar = Vec3::new(tag.local.x, tag.local.y, 0.0).normalize();
            if prog.straighten_axis {
                let psi = axis.sweep * tag.crown as f64 / (layout.crowns - 1) as f64;
                let c0 = axis.center + Vec3::x() * axis.radius;
                radial_dirs.push(planar);
                c0 + Vec3::z() * (axis.radius * psi) + contracted
            } else {
                let (center, frame) = assembly.crown_frames[tag.crown];
                radial_dirs.push(frame.apply(&planar));
                center + frame.apply(&contracted)
            }
        } else {
            let radial = Vec3::new(0.0, p0.y, p0.z).normalize();
            radial_dirs.push(radial);
            p0 - radial * dr
        };
        initial.push(p0);
        target.push(p_temp - p0);
    }

    // anchor: the lowest-index node on a symmetry plane
    let anchor = assembly
        .nodes
        .iter()
        .position(|n| !n.symmetry_normals.is_empty())
        .ok_or_else(|| Error::Geometry("no node on a symmetry plane".into()))?;

    let mut nodes = vec![];
    let mut node_ends = vec![];
    for (i, node) in assembly.nodes.iter().enumerate() {
        let in_plane: Vec<Vec3> = node
            .symmetry_normals
            .iter()
            .flat_map(|nrm| {
                let (a, b) = complement_pair(nrm);
                [a, b]
            })
            .collect();
        let sym_rotations = span_basis(&in_plane);
        let full = || -> Vec<TranslationConstraint> {
            [Vec3::x(), Vec3::y(), Vec3::z()]
                .iter()
                .map(|d| TranslationConstraint {
                    direction: *d,
                    target: Target::Prescribed(ramp.scaled(d.dot(&target[i]))),
                })
                .collect()
        };
        let translations = match prescribe {
            Prescribe::Radial if i != anchor => {
                let d = radial_dirs[i];
                let mut t = vec![TranslationConstraint { direction: d, target: Target::Prescribed(ramp.scaled(d.dot(&target[i]))) }];
                t.extend(span_basis(&[vec![d], node.symmetry_normals.clone()].concat()).into_iter().skip(1).map(|d| {
                    TranslationConstraint { direction: d, target: Target::Prescribed(Schedule::zero()) }
                }));
                t
            }
            _ => full(),
        };
        let dirichlet = NodePhase {
            translations,
            rotations: if prog.clamp_rotations { vec![Vec3::x(), Vec3::y(), Vec3::z()] } else { sym_rotations.clone() },
            ..NodePhase::free(0.0)
        };
        let mut free_t: Vec<TranslationConstraint> = span_basis(&node.symmetry_normals)
            .into_iter()
            .map(|d| TranslationConstraint { direction: d, target: Target::Prescribed(Schedule::zero()) })
            .collect();
        let mut free_r = sym_rotations;
        let mut reference = RotationReference::Initial;
        if i == anchor {
            let extra_t: &[Vec3] = if curved { &[Vec3::x(), Vec3::z()] } else { &[Vec3::x()] };
            for d in extra_t {
                free_t.push(TranslationConstraint { direction: *d, target: Target::Hold });
            }
            if curved {
                free_r = span_basis(&[free_r, vec![Vec3::y()]].concat());
                reference = RotationReference::Hold;
            }
        }
        let released = NodePhase { translations: free_t, rotations: free_r, rotation_reference: reference, ..NodePhase::free(release) };
        nodes.push(NodeModel::new(format!("n{i}"), node.ends.clone(), vec![dirichlet, released]));
        node_ends.push(node.ends[0]);
    }
    let patches = configs.into_iter().map(|c| PatchModel::new(c, tensors.clone())).collect();
    decisions.push(("programming_constraints".into(), format!(
        "{} translation prescribed at interface nodes, {}",
        match prescribe {
            Prescribe::Radial => "radial",
            Prescribe::Full => "full",
        },
        if prog.clamp_rotations { "rotations fixed" } else { "rotations free except symmetry" }
    )));
    decisions.push(("radial_contraction_m".into(), format!("{dr:e}")));
    decisions.push(("bridges_per_pair".into(), layout.bridges_per_pair.to_string()));
    decisions.push(("release_anchor".into(), format!(
        "node n{anchor}: {}",
        if curved { "x1, x3 translation and rotation about x2 held" } else { "x1 translation held" }
    )));
    if curved {
        decisions.push(("temporary_shape".into(), if prog.straighten_axis {
            "straightened axis, crowns contracted radially".into()
        } else {
            "crowns contracted radially on the curved axis".into()
        }));
    }
    decisions.push(("max_fit_residual_m".into(), format!("{:e}", assembly.max_fit_residual)));
    let model = BeamModel { patches, nodes, material, temperature };
    let program = StentProgram {
        assembly,
        node_ends,
        initial,
        target,
        ramp,
        release_time: release,
        radial_contraction: dr,
        anchor,
    };
    Ok((model, program))
}
