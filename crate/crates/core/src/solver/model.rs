//! Problem definition: patches, materials, loads and end conditions.

use crate::error::{Error, Result};
use crate::geometry::{End, InitialConfig, PatchEnd};
use crate::material::{PronySeries, StiffnessTensors};
use crate::so3::Vec3;

use super::schedule::{Schedule, VectorSchedule};

/// One beam patch with its section tensors and distributed spatial loads.
#[derive(Debug, Clone)]
pub struct PatchModel {
    pub config: InitialConfig,
    pub tensors: StiffnessTensors,
    pub distributed_force: VectorSchedule,
    pub distributed_moment: VectorSchedule,
}

impl PatchModel {
    pub fn new(config: InitialConfig, tensors: StiffnessTensors) -> Self {
        Self { config, tensors, distributed_force: VectorSchedule::zero(), distributed_moment: VectorSchedule::zero() }
    }
}

/// Target of a translational constraint, measured as the node displacement
/// component along the constraint direction.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Prescribed(Schedule),
    /// Freeze the value reached when the phase becomes active.
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationConstraint {
    pub direction: Vec3,
    pub target: Target,
}

/// Reference of the rotational constraints: the node rotation relative to
/// the reference has no component along any constrained direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationReference {
    Initial,
    Hold,
}

/// End conditions of a node from `start` on. Unconstrained directions
/// carry force (moment) balance with the external spatial loads.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePhase {
    pub start: f64,
    pub translations: Vec<TranslationConstraint>,
    pub rotations: Vec<Vec3>,
    pub rotation_reference: RotationReference,
    pub force: VectorSchedule,
    pub moment: VectorSchedule,
}

impl NodePhase {
    /// Unloaded free node.
    pub fn free(start: f64) -> Self {
        Self {
            start,
            translations: vec![],
            rotations: vec![],
            rotation_reference: RotationReference::Initial,
            force: VectorSchedule::zero(),
            moment: VectorSchedule::zero(),
        }
    }

    /// Fully clamped at the initial position and orientation.
    pub fn clamped(start: f64) -> Self {
        Self {
            translations: Vec3Basis::standard()
                .map(|d| TranslationConstraint { direction: d, target: Target::Prescribed(Schedule::zero()) })
                .to_vec(),
            rotations: Vec3Basis::standard().to_vec(),
            ..Self::free(start)
        }
    }

    /// Mirror-symmetry plane with unit normal `normal`: no normal
    /// translation, no rotation about in-plane axes.
    pub fn symmetry(start: f64, normal: Vec3) -> Self {
        let n = normal.normalize();
        let (a, b) = complement_pair(&n);
        Self {
            translations: vec![TranslationConstraint { direction: n, target: Target::Prescribed(Schedule::zero()) }],
            rotations: vec![a, b],
            ..Self::free(start)
        }
    }
}

struct Vec3Basis;

impl Vec3Basis {
    fn standard() -> [Vec3; 3] {
        [Vec3::x(), Vec3::y(), Vec3::z()]
    }
}

/// Two unit vectors completing `n` to a right-handed orthonormal basis.
pub fn complement_pair(n: &Vec3) -> (Vec3, Vec3) {
    let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let a = (seed - n * seed.dot(n)).normalize();
    (a, n.cross(&a))
}

/// Orthonormal basis whose leading vectors span `dirs` (Gram–Schmidt), and
/// the number of those leading vectors.
pub fn split_basis(dirs: &[Vec3]) -> Result<([Vec3; 3], usize)> {
    let mut out: Vec<Vec3> = Vec::with_capacity(3);
    for d in dirs {
        let mut v = *d;
        for q in &out {
            v -= q * q.dot(&v);
        }
        if v.norm() < 1e-8 * d.norm().max(1e-300) || d.norm() == 0.0 {
            return Err(Error::InvalidArgument("constraint directions are linearly dependent".into()));
        }
        out.push(v.normalize());
    }
    let k = out.len();
    if k > 3 {
        return Err(Error::InvalidArgument("more than three constraint directions".into()));
    }
    for seed in Vec3Basis::standard() {
        if out.len() == 3 {
            break;
        }
        let mut v = seed;
        for q in &out {
            v -= q * q.dot(&v);
        }
        if v.norm() > 1e-6 {
            out.push(v.normalize());
        }
    }
    Ok(([out[0], out[1], out[2]], k))
}

/// One or more coincident patch ends joined rigidly. The first end is
/// the master carrying the node conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub label: String,
    pub ends: Vec<PatchEnd>,
    pub phases: Vec<NodePhase>,
}

impl NodeModel {
    pub fn new(label: impl Into<String>, ends: Vec<PatchEnd>, phases: Vec<NodePhase>) -> Self {
        Self { label: label.into(), ends, phases }
    }

    /// Index of the phase in effect for a step ending at `t`.
    pub fn phase_index(&self, t: f64) -> usize {
        let mut idx = 0;
        for (i, p) in self.phases.iter().enumerate() {
            if t > p.start + 1e-12 * (1.0 + p.start.abs()) || i == 0 {
                idx = i;
            }
        }
        idx
    }
}

/// Complete problem: patches, nodes, material series and temperature.
#[derive(Debug, Clone)]
pub struct BeamModel {
    pub patches: Vec<PatchModel>,
    pub nodes: Vec<NodeModel>,
    pub material: PronySeries,
    pub temperature: Schedule,
}

impl BeamModel {
    pub fn dof_count(&self) -> usize {
        self.patches.iter().map(|p| 6 * p.config.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        let (lo, hi) = self.temperature.min_max();
        self.material.wlf.shift_factor(lo)?;
        self.material.wlf.shift_factor(hi)?;
        let mut seen = vec![[false; 2]; self.patches.len()];
        for p in &self.patches {
            if p.tensors.branch_count() != self.material.branches.len() {
                return Err(Error::InvalidArgument("section tensors do not match the material branch count".into()));
            }
            if p.config.len() < p.config.patch.degree() + 1 || p.config.len() < 3 {
                return Err(Error::InvalidArgument("patch needs at least max(p + 1, 3) control points".into()));
            }
        }
        for node in &self.nodes {
            if node.ends.is_empty() || node.phases.is_empty() {
                return Err(Error::InvalidArgument(format!("node `{}` needs ends and a phase", node.label)));
            }
            if node.phases.windows(2).any(|w| w[1].start < w[0].start) {
                return Err(Error::InvalidArgument(format!("node `{}`: phases not time-sorted", node.label)));
            }
            for ph in &node.phases {
                let dirs: Vec<Vec3> = ph.translations.iter().map(|c| c.direction).collect();
                split_basis(&dirs)?;
                split_basis(&ph.rotations)?;
            }
            for e in &node.ends {
                let slot = seen
                    .get_mut(e.patch)
                    .ok_or_else(|| Error::InvalidArgument(format!("node `{}` references patch {}", node.label, e.patch)))?;
                let k = matches!(e.end, End::End) as usize;
                if slot[k] {
                    return Err(Error::InvalidArgument(format!("patch {} end {:?} assigned twice", e.patch, e.end)));
                }
                slot[k] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s[0] || !s[1]) {
            return Err(Error::InvalidArgument(format!("patch {i} has an end without a node")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_splitting() {
        let (b, k) = split_basis(&[Vec3::new(0.0, 0.0, 2.0)]).unwrap();
        assert_eq!(k, 1);
        assert_eq!(b[0], Vec3::z());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((b[i].dot(&b[j]) - expect).abs() < 1e-14);
            }
        }
        assert!(split_basis(&[Vec3::x(), Vec3::x() * 2.0]).is_err());
        assert_eq!(split_basis(&[]).unwrap().1, 0);
    }

    #[test]
    fn phase_selection() {
        let n = NodeModel::new("a", vec![], vec![NodePhase::clamped(0.0), NodePhase::free(1.75)]);
        assert_eq!(n.phase_index(0.5), 0);
        assert_eq!(n.phase_index(1.75), 0);
        assert_eq!(n.phase_index(1.755), 1);
    }
}
