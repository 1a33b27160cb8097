//! Initial (stress-free) configuration of beam patches: centroid curve,
//! rotation-minimizing cross-section frames, initial curvature, and the
//! parametric builders for arches, straight beams and stent-like assemblies.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::so3::{exp_so3, Mat3, Rotation, Vec3};
use crate::splines::{chord_length_params, combine, fit_bspline, BasisTable, KnotVector, SplinePatch};

/// Largest parameter step of the frame integrator.
const FRAME_STEP: f64 = 1.0 / 2000.0;

/// Derivatives of a field with respect to `u` and to arc length `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDerivatives<T> {
    pub value: T,
    pub du: T,
    pub duu: T,
    pub ds: T,
    pub dss: T,
}

/// Converts u-derivatives into s-derivatives through the initial Jacobian:
/// `f,s = f,u / J`, `f,ss = f,uu / J² − f,u J,u / J³`.
pub fn arc_length_derivatives<T>(jacobian: f64, jacobian_u: f64, value: T, du: T, duu: T) -> ParamDerivatives<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T>,
{
    let j = jacobian;
    ParamDerivatives {
        value,
        du,
        duu,
        ds: du * (1.0 / j),
        dss: duu * (1.0 / (j * j)) - du * (jacobian_u / (j * j * j)),
    }
}

/// Arc-length derivatives `c,s`, `c,ss`, `c,sss` and `J`, `J,u` from the
/// u-derivatives of a curve.
fn curve_frame_data(d: &[Vec3]) -> Result<(f64, f64, [Vec3; 3])> {
    let (c1, c2, c3) = (d[1], d[2], d[3]);
    let j = c1.norm();
    if !(j >= 1e-12) {
        return Err(Error::Geometry(format!("degenerate tangent (‖c,u‖ = {j:e})")));
    }
    let ju = c1.dot(&c2) / j;
    let juu = (c2.dot(&c2) + c1.dot(&c3) - ju * ju) / j;
    let cs = c1 / j;
    let css = c2 / (j * j) - c1 * (ju / j.powi(3));
    let csss = (c3 / (j * j) - c2 * (3.0 * ju / j.powi(3)) - c1 * (juu / j.powi(3))
        + c1 * (3.0 * ju * ju / j.powi(4)))
        / j;
    Ok((j, ju, [cs, css, csss]))
}

/// Initial geometry at one collocation point.
#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub u: f64,
    /// Active basis functions with u-derivatives up to second order.
    pub basis: BasisTable,
    /// `R_j`, `R_j,s`, `R_j,ss` for the active functions.
    pub basis_s: [Vec<f64>; 3],
    pub jacobian: f64,
    pub jacobian_u: f64,
    pub position: Vec3,
    pub c_s: Vec3,
    pub c_ss: Vec3,
    pub rotation: Rotation,
    pub curvature: Vec3,
    pub curvature_s: Vec3,
    /// `Γ₀ = R₀ᵀ c₀,s` and its s-derivative.
    pub gamma: Vec3,
    pub gamma_s: Vec3,
}

/// Initial configuration of one beam patch, evaluated at its Greville points.
#[derive(Debug, Clone)]
pub struct InitialConfig {
    pub patch: SplinePatch,
    pub reference_direction: Vec3,
    pub points: Vec<InitialPoint>,
}

/// Rotation-minimizing frame propagation along a patch.
///
/// Integrates `dR/du = (J c,s × c,ss)~ R` with the fourth-order
/// two-point Gauss–Legendre Magnus scheme, so every step is an exact rotation.
pub struct FrameIntegrator<'a> {
    patch: &'a SplinePatch,
}

impl<'a> FrameIntegrator<'a> {
    pub fn new(patch: &'a SplinePatch) -> Self {
        Self { patch }
    }

    /// Spatial angular velocity per unit `u`.
    fn omega(&self, u: f64) -> Result<Vec3> {
        let d = self.patch.curve_eval(u.clamp(0.0, 1.0), 3)?;
        let (j, _, [cs, css, _]) = curve_frame_data(&d)?;
        Ok(cs.cross(&css) * j)
    }

    /// Seed frame at `u = 0`: `d3` along the tangent, `d1` the normalized
    /// projection of `reference` onto the normal plane.
    pub fn seed(&self, reference: &Vec3) -> Result<Rotation> {
        let d = self.patch.curve_eval(0.0, 1)?;
        let j = d[1].norm();
        if !(j >= 1e-12) {
            return Err(Error::Geometry("degenerate tangent at u = 0".into()));
        }
        let d3 = d[1] / j;
        let proj = reference - d3 * reference.dot(&d3);
        if proj.norm() < 1e-8 * reference.norm().max(1e-300) {
            return Err(Error::Geometry(
                "frame reference direction is parallel to the initial tangent".into(),
            ));
        }
        let d1 = proj.normalize();
        let d2 = d3.cross(&d1);
        Ok(Rotation::from_columns(&d1, &d2, &d3))
    }

    /// Transports `start` (given at `ua`) to `ub`.
    pub fn propagate(&self, start: &Rotation, ua: f64, ub: f64) -> Result<Rotation> {
        let span = ub - ua;
        if span == 0.0 {
            return Ok(*start);
        }
        let steps = (span.abs() / FRAME_STEP).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let g = 0.5 / 3f64.sqrt();
        let mut r = *start;
        for k in 0..steps {
            let u0 = ua + h * k as f64;
            let w1 = self.omega(u0 + h * (0.5 - g))?;
            let w2 = self.omega(u0 + h * (0.5 + g))?;
            let big = (w1 + w2) * (0.5 * h) + w2.cross(&w1) * (3f64.sqrt() * h * h / 12.0);
            r = exp_so3(&big).compose(&r);
        }
        Ok(r)
    }
}

impl InitialConfig {
    /// Builds the rotation-minimizing frame along `patch` and evaluates all
    /// initial quantities at the Greville abscissae.
    pub fn new(patch: SplinePatch, reference_direction: Vec3) -> Result<Self> {
        let integrator = FrameIntegrator::new(&patch);
        let mut frame = integrator.seed(&reference_direction)?;
        let mut last_u = 0.0;
        let mut points = Vec::with_capacity(patch.len());
        let mut prev: Option<Rotation> = None;
        for u in patch.greville() {
            frame = integrator.propagate(&frame, last_u, u)?;
            last_u = u;
            if let Some(p) = prev {
                let rel = p.transpose().compose(&frame).log().norm();
                if rel >= 0.5 * PI {
                    return Err(Error::Geometry(format!(
                        "frame turns by {rel:.3} rad between successive collocation points; refine the patch"
                    )));
                }
            }
            prev = Some(frame);
            points.push(Self::point_data(&patch, u, frame)?);
        }
        Ok(Self { patch, reference_direction, points })
    }

    fn point_data(patch: &SplinePatch, u: f64, rotation: Rotation) -> Result<InitialPoint> {
        let d = patch.curve_eval(u, 3)?;
        let (j, ju, [cs, css, csss]) = curve_frame_data(&d)?;
        let mut basis = patch.basis_eval(u, 2)?;
        basis.ders.truncate(3);
        let basis_s = basis_in_arc_length(&basis, j, ju);
        let curvature = rotation.apply_transpose(&cs.cross(&css));
        let curvature_s = rotation.apply_transpose(&cs.cross(&csss));
        let gamma = rotation.apply_transpose(&cs);
        let gamma_s = -curvature.cross(&gamma) + rotation.apply_transpose(&css);
        Ok(InitialPoint {
            u,
            basis,
            basis_s,
            jacobian: j,
            jacobian_u: ju,
            position: d[0],
            c_s: cs,
            c_ss: css,
            rotation,
            curvature,
            curvature_s,
            gamma,
            gamma_s,
        })
    }

    /// Frame at an arbitrary parameter, transported from the nearest
    /// collocation point below `u`.
    pub fn frame_at(&self, u: f64) -> Result<Rotation> {
        let start = self
            .points
            .iter()
            .rev()
            .find(|p| p.u <= u)
            .unwrap_or(&self.points[0]);
        FrameIntegrator::new(&self.patch).propagate(&start.rotation, start.u, u)
    }

    /// Initial curvature at an arbitrary parameter.
    pub fn curvature_at(&self, u: f64) -> Result<Vec3> {
        let d = self.patch.curve_eval(u, 3)?;
        let (_, _, [cs, css, _]) = curve_frame_data(&d)?;
        Ok(self.frame_at(u)?.apply_transpose(&cs.cross(&css)))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Length of the initial centroid curve (Gauss–Legendre, 8 points per span).
    pub fn length(&self) -> Result<f64> {
        let knots = self.patch.knots().knots();
        let (xs, ws) = gauss_legendre_8();
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            for (x, wt) in xs.iter().zip(ws.iter()) {
                let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
                total += 0.5 * (b - a) * wt * self.patch.curve_eval(u, 1)?[1].norm();
            }
        }
        Ok(total)
    }
}

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    let x = [
        -0.960_289_856_497_536_3,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329_0,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    let w = [
        0.101_228_536_290_376_3,
        0.222_381_034_453_374_5,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362_0,
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    (x, w)
}

/// `R_j`, `R_j,s`, `R_j,ss` from u-derivatives.
pub fn basis_in_arc_length(basis: &BasisTable, jacobian: f64, jacobian_u: f64) -> [Vec<f64>; 3] {
    let n = basis.ders[0].len();
    let mut s1 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for j in 0..n {
        let d = arc_length_derivatives(jacobian, jacobian_u, basis.ders[0][j], basis.ders[1][j], basis.ders[2][j]);
        s1.push(d.ds);
        s2.push(d.dss);
    }
    [basis.ders[0].clone(), s1, s2]
}

/// Evaluates a field stored on control coefficients at a collocation point:
/// value, `,s` and `,ss`.
pub fn field_at(point: &InitialPoint, coeffs: &[Vec3]) -> [Vec3; 3] {
    let mut out = [Vec3::zeros(); 3];
    for (k, row) in point.basis_s.iter().enumerate() {
        for (j, r) in row.iter().enumerate() {
            out[k] += coeffs[point.basis.first + j] * *r;
        }
    }
    out
}

/// Positions and u-derivatives at `u` for coefficients on the patch basis.
pub fn eval_coefficients(patch: &SplinePatch, coeffs: &[Vec3], u: f64, max_deriv: usize) -> Result<Vec<Vec3>> {
    Ok(combine(&patch.basis_eval(u, max_deriv)?, coeffs))
}

/// Straight patch from `a` to `b`.
pub fn build_straight(a: Vec3, b: Vec3, degree: usize, n: usize, reference: Vec3) -> Result<InitialConfig> {
    InitialConfig::new(SplinePatch::line(a, b, degree, n)?, reference)
}

/// Exact circular arch in the `x1–x2` plane, centred at the origin, from
/// `[radius, 0, 0]` counter-clockwise through `sweep` radians.
pub fn arch_patch(radius: f64, sweep: f64, degree: usize, n: usize) -> Result<SplinePatch> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("arch radius must be positive".into()));
    }
    if !(sweep > 0.0 && sweep < PI) {
        return Err(Error::InvalidArgument("arch sweep must lie in (0, π)".into()));
    }
    if degree < 2 {
        return Err(Error::InvalidArgument("exact arcs need degree ≥ 2".into()));
    }
    let half = 0.5 * sweep;
    let cps = vec![
        Vec3::new(radius, 0.0, 0.0),
        Vec3::new(radius, radius * half.tan(), 0.0),
        Vec3::new(radius * sweep.cos(), radius * sweep.sin(), 0.0),
    ];
    let bezier = SplinePatch::new(KnotVector::uniform(2, 3)?, cps, vec![1.0, half.cos(), 1.0])?;
    bezier.elevate_bezier(degree)?.refine_bezier_uniform(n)
}

/// Circular arch with the frame's `d1` normal to the arch plane.
pub fn build_arch(radius: f64, sweep: f64, degree: usize, n: usize) -> Result<InitialConfig> {
    InitialConfig::new(arch_patch(radius, sweep, degree, n)?, Vec3::z())
}

// ---------------------------------------------------------------------------
// Multi-patch assemblies
// ---------------------------------------------------------------------------

/// Which end of a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Start,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatchEnd {
    pub patch: usize,
    pub end: End,
}

/// Provenance of a crown node, used to map nodes between configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrownTag {
    pub crown: usize,
    /// Node position in the crown's own frame, relative to its centre.
    pub local: Vec3,
}

/// A point where one or more patch ends coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceNode {
    pub position: Vec3,
    pub ends: Vec<PatchEnd>,
    pub crown: Option<CrownTag>,
    /// Normals of the symmetry planes the node lies on.
    pub symmetry_normals: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct AssemblyPatch {
    pub patch: SplinePatch,
    pub reference_direction: Vec3,
    pub label: String,
    pub crown: Option<usize>,
}

/// Patches plus the interface-node table.
#[derive(Debug, Clone)]
pub struct BeamAssembly {
    pub patches: Vec<AssemblyPatch>,
    pub nodes: Vec<InterfaceNode>,
    /// Crown centres and axis directions (stent assemblies only).
    pub crown_frames: Vec<(Vec3, Rotation)>,
    /// Largest sample-to-curve distance over all fitted patches.
    pub max_fit_residual: f64,
}

impl BeamAssembly {
    /// Groups coincident patch ends (within `tol`) into interface nodes.
    pub fn from_patches(patches: Vec<AssemblyPatch>, tol: f64) -> Result<Self> {
        let mut nodes: Vec<InterfaceNode> = Vec::new();
        for (i, p) in patches.iter().enumerate() {
            let cps = p.patch.control_points();
            for (end, pos) in [(End::Start, cps[0]), (End::End, *cps.last().unwrap())] {
                let pe = PatchEnd { patch: i, end };
                match nodes.iter_mut().find(|n| (n.position - pos).norm() <= tol) {
                    Some(n) => n.ends.push(pe),
                    None => nodes.push(InterfaceNode {
                        position: pos,
                        ends: vec![pe],
                        crown: None,
                        symmetry_normals: vec![],
                    }),
                }
            }
        }
        Ok(Self { patches, nodes, crown_frames: vec![], max_fit_residual: 0.0 })
    }

    pub fn node_of(&self, pe: PatchEnd) -> Option<usize> {
        self.nodes.iter().position(|n| n.ends.contains(&pe))
    }

    /// Patch ends sharing a node with `pe`, excluding `pe` itself.
    pub fn partners(&self, pe: PatchEnd) -> Vec<PatchEnd> {
        self.node_of(pe)
            .map(|i| self.nodes[i].ends.iter().copied().filter(|e| *e != pe).collect())
            .unwrap_or_default()
    }

    pub fn end_position(&self, pe: PatchEnd) -> Vec3 {
        let cps = self.patches[pe.patch].patch.control_points();
        match pe.end {
            End::Start => cps[0],
            End::End => *cps.last().unwrap(),
        }
    }

    /// Keeps the patches whose control polygons lie in the half-spaces
    /// `x·n ≥ 0` for every normal, and marks nodes on the cutting planes.
    pub fn symmetric_part(&self, normals: &[Vec3], tol: f64) -> Result<Self> {
        let keep: Vec<AssemblyPatch> = self
            .patches
            .iter()
            .filter(|p| {
                p.patch
                    .control_points()
                    .iter()
                    .all(|c| normals.iter().all(|n| c.dot(n) >= -tol))
            })
            .cloned()
            .collect();
        let mut part = Self::from_patches(keep, tol)?;
        part.crown_frames = self.crown_frames.clone();
        part.max_fit_residual = self.max_fit_residual;
        for node in &mut part.nodes {
            node.crown = self
                .nodes
                .iter()
                .find(|n| (n.position - node.position).norm() <= tol)
                .and_then(|n| n.crown);
            node.symmetry_normals =
                normals.iter().copied().filter(|n| node.position.dot(n).abs() <= tol).collect();
        }
        for node in &part.nodes {
            let full = self
                .nodes
                .iter()
                .find(|n| (n.position - node.position).norm() <= tol)
                .ok_or_else(|| Error::Geometry("symmetric part created a new node".into()))?;
            if node.symmetry_normals.is_empty() && full.ends.len() != node.ends.len() {
                return Err(Error::Geometry(format!(
                    "patches cross the symmetry plane at {:?}",
                    node.position
                )));
            }
        }
        Ok(part)
    }

    /// Reflects the assembly through the plane with unit normal `normal`
    /// and merges the result with the original.
    pub fn mirrored(&self, normal: &Vec3, tol: f64) -> Result<Self> {
        let refl = Mat3::identity() - normal * normal.transpose() * 2.0;
        let mut patches = self.patches.clone();
        for p in &self.patches {
            patches.push(AssemblyPatch {
                patch: p.patch.transformed(|c| refl * c),
                reference_direction: refl * p.reference_direction,
                label: format!("{}-mirror", p.label),
                crown: p.crown,
            });
        }
        Self::from_patches(patches, tol)
    }
}

/// Parameters of a stent-like device built from sinusoidal crowns.
#[derive(Debug, Clone, PartialEq)]
pub struct StentLayout {
    pub crown_radius: f64,
    pub half_height: f64,
    pub wires: usize,
    pub crown_spacing: f64,
    pub crowns: usize,
    pub bridge_height: f64,
    pub bridges_per_pair: usize,
    pub degree: usize,
    pub control_points: usize,
    /// Samples per patch for the least-squares fit of sinusoidal shapes.
    pub fit_samples: usize,
    pub axis: Option<CurvedAxis>,
}

/// Circular stent axis `O + R_stent [cos ψ, 0, sin ψ]`, `ψ ∈ [0, sweep]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvedAxis {
    pub radius: f64,
    pub center: Vec3,
    pub sweep: f64,
}

impl StentLayout {
    pub fn validate(&self) -> Result<()> {
        let lengths = [self.crown_radius, self.half_height, self.crown_spacing];
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidArgument("stent lengths must be positive".into()));
        }
        if self.wires == 0 || self.wires % 2 != 0 {
            return Err(Error::InvalidArgument("wire count must be even and positive".into()));
        }
        if self.crowns == 0 {
            return Err(Error::InvalidArgument("need at least one crown".into()));
        }
        if self.bridges_per_pair == 0 {
            return Err(Error::InvalidArgument("need at least one bridge per crown pair".into()));
        }
        if self.fit_samples < self.control_points {
            return Err(Error::InvalidArgument("fit_samples must be ≥ control_points".into()));
        }
        if let Some(axis) = &self.axis {
            if !(axis.radius > 0.0 && axis.sweep > 0.0) {
                return Err(Error::InvalidArgument("curved axis needs positive radius and sweep".into()));
            }
            if self.crowns < 2 {
                return Err(Error::InvalidArgument("a curved axis needs at least two crowns".into()));
            }
        }
        Ok(())
    }

    /// Wire centroid in the crown frame (axis along local x3):
    /// `[R cos θ, R sin θ, h_c sin(n_w θ / 2)]`.
    pub fn wire_point(&self, theta: f64) -> Vec3 {
        Vec3::new(
            self.crown_radius * theta.cos(),
            self.crown_radius * theta.sin(),
            self.half_height * (0.5 * self.wires as f64 * theta).sin(),
        )
    }
}

/// One fitted half-wire of a crown, in the crown's own frame.
#[derive(Debug, Clone)]
pub struct CrownPatch {
    pub patch: SplinePatch,
    /// 1-based wire index `q`.
    pub wire: usize,
    pub theta_start: f64,
    pub theta_end: f64,
    pub fit_residual: f64,
}

fn fit_curve(f: impl Fn(f64) -> Vec3, layout: &StentLayout) -> Result<(SplinePatch, f64)> {
    let m = layout.fit_samples.max(layout.control_points + 1);
    let pts: Vec<Vec3> = (0..=m).map(|i| f(i as f64 / m as f64)).collect();
    let params = chord_length_params(&pts);
    let fit = fit_bspline(&pts, &params, layout.degree, layout.control_points)?;
    log::debug!("fitted patch: max residual {:e} m", fit.max_residual);
    Ok((fit.patch, fit.max_residual))
}

/// Reference crown: `n_w` wires, each split at its crest/trough into two
/// patches, wire `q` spanning `θ ∈ [(q−1)·2π/n_w, q·2π/n_w]`.
pub fn build_crown(layout: &StentLayout) -> Result<Vec<CrownPatch>> {
    layout.validate()?;
    let halves = 2 * layout.wires;
    let dtheta = PI / layout.wires as f64;
    let mut out = Vec::with_capacity(halves);
    for k in 0..halves {
        let (a, b) = (k as f64 * dtheta, (k + 1) as f64 * dtheta);
        let (ea, eb) = (layout.wire_point(a), layout.wire_point(b));
        let (mut patch, res) = fit_curve(|t| layout.wire_point(a + (b - a) * t), layout)?;
        // pin the shared endpoints to the formula values bit-for-bit
        let mut cps = patch.control_points().to_vec();
        cps[0] = ea;
        *cps.last_mut().unwrap() = eb;
        patch = patch.with_control_points(cps)?;
        out.push(CrownPatch { patch, wire: k / 2 + 1, theta_start: a, theta_end: b, fit_residual: res });
    }
    Ok(out)
}

fn rot_z(angle: f64) -> Rotation {
    Rotation::about_axis(&Vec3::z(), angle)
}

fn rot_y(angle: f64) -> Rotation {
    Rotation::about_axis(&Vec3::y(), angle)
}

/// Crown in its local frame with a crest moved to `θ = 0`, optionally
/// swapped crest-for-trough by `flip`.
fn oriented_crown(layout: &StentLayout, flip: Rotation) -> Result<(Vec<CrownPatch>, Rotation)> {
    let phase = rot_z(-PI / layout.wires as f64);
    let orient = flip.compose(&phase);
    Ok((build_crown(layout)?, orient))
}

/// Axial offset of a crown-local point after orientation (`+` = crest).
fn crown_axial(local: &Vec3) -> f64 {
    local.z
}

fn angle_of(v: &Vec3) -> f64 {
    let a = v.y.atan2(v.x);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Placed crown extreme: local coordinates plus global position.
#[derive(Clone, Copy, Debug)]
struct Extreme {
    local: Vec3,
    global: Vec3,
    angle: f64,
}

struct PlacedCrown {
    center: Vec3,
    frame: Rotation,
    crests: Vec<Extreme>,
    troughs: Vec<Extreme>,
}

fn place_crowns(
    layout: &StentLayout,
    placements: &[(Vec3, Rotation, Rotation)],
    patches: &mut Vec<AssemblyPatch>,
    max_res: &mut f64,
) -> Result<Vec<PlacedCrown>> {
    let tol = 1e-9 * layout.crown_radius;
    let mut placed = Vec::with_capacity(placements.len());
    for (k, (center, frame, flip)) in placements.iter().enumerate() {
        let (crown, orient) = oriented_crown(layout, *flip)?;
        let mut crests = vec![];
        let mut troughs = vec![];
        for cp in &crown {
            *max_res = max_res.max(cp.fit_residual);
            let to_global = |c: &Vec3| center + frame.apply(&orient.apply(c));
            let patch = cp.patch.transformed(to_global);
            let a_local = orient.apply(&cp.patch.control_points()[0]);
            let radial = Vec3::new(a_local.x, a_local.y, 0.0);
            patches.push(AssemblyPatch {
                patch,
                reference_direction: frame.apply(&radial),
                label: format!("crown{k}-w{}-{}", cp.wire, if cp.theta_start < cp.theta_end { "a" } else { "b" }),
                crown: Some(k),
            });
            for c in [cp.patch.control_points()[0], *cp.patch.control_points().last().unwrap()] {
                let local = orient.apply(&c);
                let ext = Extreme { local, global: center + frame.apply(&local), angle: angle_of(&local) };
                let z = crown_axial(&local);
                let list = if z > layout.half_height - tol {
                    &mut crests
                } else if z < -layout.half_height + tol {
                    &mut troughs
                } else {
                    continue;
                };
                if !list.iter().any(|e: &Extreme| (e.global - ext.global).norm() <= tol) {
                    list.push(ext);
                }
            }
        }
        crests.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());
        troughs.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());
        placed.push(PlacedCrown { center: *center, frame: *frame, crests, troughs });
    }
    Ok(placed)
}

/// Bridge endpoint pairs between consecutive crowns: for each target
/// angle `(2m+1)π/count` the nearest crest of crown `k` (ties go to the
/// lower angle) is paired with the trough of crown `k+1` at the same angle.
fn bridge_pairs(layout: &StentLayout, a: &PlacedCrown, b: &PlacedCrown) -> Result<Vec<(Extreme, Extreme)>> {
    if a.crests.len() != b.troughs.len() {
        return Err(Error::Geometry(format!(
            "crest/trough mismatch between crowns: {} crests vs {} troughs",
            a.crests.len(),
            b.troughs.len()
        )));
    }
    let count = layout.bridges_per_pair;
    let mut pairs: Vec<(Extreme, Extreme)> = Vec::with_capacity(count);
    for m in 0..count {
        let target = (2 * m + 1) as f64 * PI / count as f64;
        let mut best: Option<&Extreme> = None;
        for c in &a.crests {
            let d = angular_distance(c.angle, target);
            match best {
                Some(bst) if d >= angular_distance(bst.angle, target) - 1e-12 => {}
                _ => best = Some(c),
            }
        }
        let crest = *best.ok_or_else(|| Error::Geometry("crown has no crests".into()))?;
        let trough = *b
            .troughs
            .iter()
            .min_by(|x, y| {
                angular_distance(x.angle, crest.angle)
                    .partial_cmp(&angular_distance(y.angle, crest.angle))
                    .unwrap()
            })
            .ok_or_else(|| Error::Geometry("crown has no troughs".into()))?;
        if angular_distance(trough.angle, crest.angle) > 1e-9 {
            return Err(Error::Geometry(format!(
                "crest at {:.4} rad has no aligned trough on the next crown",
                crest.angle
            )));
        }
        if pairs.iter().any(|(c, _)| (c.global - crest.global).norm() < 1e-12) {
            return Err(Error::Geometry(format!("{count} bridges per pair reuse a crest")));
        }
        pairs.push((crest, trough));
    }
    Ok(pairs)
}

fn tag_crown_nodes(assembly: &mut BeamAssembly, placed: &[PlacedCrown], tol: f64) {
    for node in &mut assembly.nodes {
        for (k, c) in placed.iter().enumerate() {
            let local = c.frame.apply_transpose(&(node.position - c.center));
            if local.z.abs() <= 1.5 * assembly_half_height(placed, k) {
                let r = (local.x * local.x + local.y * local.y).sqrt();
                let on_crown = assembly
                    .patches
                    .iter()
                    .zip(0..)
                    .any(|(p, i)| p.crown == Some(k) && node.ends.iter().any(|e| e.patch == i));
                if on_crown && r > tol {
                    node.crown = Some(CrownTag { crown: k, local });
                    break;
                }
            }
        }
    }
}

fn assembly_half_height(placed: &[PlacedCrown], k: usize) -> f64 {
    placed[k]
        .crests
        .first()
        .map(|e| e.local.z.abs())
        .unwrap_or(f64::INFINITY)
}

/// Straight device along `x1`: crowns at `x1 = k·d_c`, odd crowns twisted
/// by π/2 about the axis, straight bridges from crests to troughs.
pub fn build_straight_stent(layout: &StentLayout) -> Result<BeamAssembly> {
    layout.validate()?;
    // crown frame: local x3 (axis) → x1, local x1 → x2, local x2 → x3
    let to_global = Rotation::from_columns(&Vec3::y(), &Vec3::z(), &Vec3::x());
    let placements: Vec<(Vec3, Rotation, Rotation)> = (0..layout.crowns)
        .map(|k| {
            let twist = if k % 2 == 1 { rot_z(0.5 * PI) } else { Rotation::identity() };
            (Vec3::x() * (k as f64 * layout.crown_spacing), to_global, twist)
        })
        .collect();
    let mut patches = vec![];
    let mut max_res: f64 = 0.0;
    let placed = place_crowns(layout, &placements, &mut patches, &mut max_res)?;
    for k in 0..placed.len().saturating_sub(1) {
        for (i, (a, b)) in bridge_pairs(layout, &placed[k], &placed[k + 1])?.into_iter().enumerate() {
            let radial = Vec3::new(0.0, a.global.y, a.global.z);
            patches.push(AssemblyPatch {
                patch: SplinePatch::line(a.global, b.global, layout.degree, layout.control_points)?,
                reference_direction: radial,
                label: format!("bridge{k}-{i}"),
                crown: None,
            });
        }
    }
    let tol = 1e-9 * layout.crown_radius;
    let mut asm = BeamAssembly::from_patches(patches, tol)?;
    tag_crown_nodes(&mut asm, &placed, tol);
    asm.crown_frames = placed.iter().map(|c| (c.center, c.frame)).collect();
    asm.max_fit_residual = max_res;
    Ok(asm)
}

/// Quarter of the straight device in `x2 ≥ 0, x3 ≥ 0`.
pub fn straight_stent_quarter(full: &BeamAssembly, layout: &StentLayout) -> Result<BeamAssembly> {
    full.symmetric_part(&[Vec3::y(), Vec3::z()], 1e-9 * layout.crown_radius)
}

/// Curved device: crowns deployed along the circular axis, crowns with odd
/// index pre-rotated by π about their local `x2`, sinusoidal bridges.
pub fn build_curved_stent(layout: &StentLayout) -> Result<BeamAssembly> {
    layout.validate()?;
    let axis = layout
        .axis
        .ok_or_else(|| Error::InvalidArgument("curved stent needs a curved axis".into()))?;
    let steps = (layout.crowns - 1) as f64;
    let placements: Vec<(Vec3, Rotation, Rotation)> = (0..layout.crowns)
        .map(|k| {
            let psi = axis.sweep * k as f64 / steps;
            let center = axis.center + Vec3::new(psi.cos(), 0.0, psi.sin()) * axis.radius;
            let flip = if k % 2 == 1 { rot_y(PI) } else { Rotation::identity() };
            (center, rot_y(-psi), flip)
        })
        .collect();
    let mut patches = vec![];
    let mut max_res: f64 = 0.0;
    let placed = place_crowns(layout, &placements, &mut patches, &mut max_res)?;
    for k in 0..placed.len() - 1 {
        let (ca, cb) = (&placed[k], &placed[k + 1]);
        for (i, (a, b)) in bridge_pairs(layout, ca, cb)?.into_iter().enumerate() {
            let (pa, pb) = (a.global, b.global);
            let chord = pb - pa;
            let mid_frame = rot_y(-0.5 * (angle_psi(&ca.frame) + angle_psi(&cb.frame)));
            let circ = mid_frame.apply(&Vec3::new(-a.angle.sin(), a.angle.cos(), 0.0));
            let offset_dir = (circ - chord * (circ.dot(&chord) / chord.norm_squared())).normalize();
            let hb = layout.bridge_height;
            let (mut patch, res) =
                fit_curve(|t| pa + chord * t + offset_dir * (hb * (2.0 * PI * t).sin()), layout)?;
            max_res = max_res.max(res);
            let mut cps = patch.control_points().to_vec();
            cps[0] = pa;
            *cps.last_mut().unwrap() = pb;
            patch = patch.with_control_points(cps)?;
            let radial = mid_frame.apply(&Vec3::new(a.angle.cos(), a.angle.sin(), 0.0));
            patches.push(AssemblyPatch { patch, reference_direction: radial, label: format!("bridge{k}-{i}"), crown: None });
        }
    }
    let tol = 1e-9 * layout.crown_radius;
    let mut asm = BeamAssembly::from_patches(patches, tol)?;
    tag_crown_nodes(&mut asm, &placed, tol);
    asm.crown_frames = placed.iter().map(|c| (c.center, c.frame)).collect();
    asm.max_fit_residual = max_res;
    Ok(asm)
}

/// Recovers ψ from a crown frame `R_y(−ψ)`.
fn angle_psi(frame: &Rotation) -> f64 {
    let m = frame.matrix();
    (-m[(0, 2)]).atan2(m[(2, 2)])
}

/// Half of the curved device in `x2 ≥ 0`.
pub fn curved_stent_half(full: &BeamAssembly, layout: &StentLayout) -> Result<BeamAssembly> {
    full.symmetric_part(&[Vec3::y()], 1e-9 * layout.crown_radius)
}

/// Builds initial configurations for every patch of an assembly.
pub fn assembly_configs(asm: &BeamAssembly) -> Result<Vec<InitialConfig>> {
    asm.patches
        .iter()
        .map(|p| InitialConfig::new(p.patch.clone(), p.reference_direction))
        .collect()
}

/// Maximum curvature-consistency defect `‖K₀ − axial(R₀ᵀR₀,s)‖` over the
/// given parameters, using central differences of step `eps` in `u`.
pub fn curvature_defect(config: &InitialConfig, us: &[f64], eps: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &u in us {
        let r = config.frame_at(u)?;
        let rp = FrameIntegrator::new(&config.patch).propagate(&r, u, u + eps)?;
        let rm = FrameIntegrator::new(&config.patch).propagate(&r, u, u - eps)?;
        let dr = (rp.matrix() - rm.matrix()) / (2.0 * eps);
        let j = config.patch.curve_eval(u, 1)?[1].norm();
        let k_fd = crate::so3::axial_unchecked(&(r.matrix().transpose() * dr)) / j;
        worst = worst.max((k_fd - config.curvature_at(u)?).norm());
    }
    Ok(worst)
}
