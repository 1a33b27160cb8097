//! Global assembly, Newton iteration and time stepping.

use crate::error::{Error, Result};
use crate::geometry::{End, PatchEnd};
use crate::material::StepMaterial;
use crate::so3::{dexp_right, Mat3, Rotation, Vec3};

use super::assembly::{assemble_row_force, assemble_row_moment, end_contributions, PointData, RowBlocks};
use super::linear::TripletMatrix;
use super::model::{split_basis, BeamModel, RotationReference, Target};
use super::state::{compute_strains, resultants, FrozenHistory, Kinematics, PatchState, Resultants};

/// Newton and step-control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Bound on the equilibrated residual `max_i |r_i| / max_j |J_ij|`.
    pub tol_residual: f64,
    pub tol_increment: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Residual-homotopy stages tried when plain Newton fails (0 disables).
    pub max_continuation_stages: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol_residual: 1e-12, tol_increment: 1e-10, max_iter: 25, max_halvings: 4, max_continuation_stages: 64 }
    }
}

/// Outcome of one accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub temperature: f64,
    pub iterations: usize,
    /// Equilibrated residual norm at every iterate.
    pub residuals: Vec<f64>,
    /// Number of sub-steps the step was split into (1 if no halving).
    pub substeps: usize,
}

/// Per-step frozen data.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub time: f64,
    pub h: f64,
    pub materials: Vec<StepMaterial>,
    pub frozen: Vec<Vec<FrozenHistory>>,
    pub phases: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct NodeRuntime {
    phase: usize,
    holds: Vec<f64>,
    rotation_ref: Rotation,
}

/// `max_i |r_i s_i|`, NaN if any entry is non-finite.
fn scaled_norm(r: &[f64], scales: &[f64]) -> f64 {
    if r.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    r.iter().zip(scales).map(|(a, s)| (a * s).abs()).fold(0.0, f64::max)
}

/// Quasi-static simulation: model plus evolving state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: BeamModel,
    pub settings: SolverSettings,
    pub time: f64,
    pub patches: Vec<PatchState>,
    offsets: Vec<usize>,
    nodes: Vec<NodeRuntime>,
    last_context: Option<StepContext>,
}

fn end_index(model: &BeamModel, e: PatchEnd) -> usize {
    match e.end {
        End::Start => 0,
        End::End => model.patches[e.patch].config.len() - 1,
    }
}

fn end_sign(e: PatchEnd) -> f64 {
    match e.end {
        End::Start => -1.0,
        End::End => 1.0,
    }
}

/// Inverse left Jacobian of the exponential map, `J_l(φ)⁻¹`.
fn left_jacobian_inverse(phi: &Vec3) -> Mat3 {
    dexp_right(&-phi).try_inverse().unwrap_or_else(Mat3::identity)
}

impl Simulation {
    pub fn new(model: BeamModel, settings: SolverSettings) -> Result<Self> {
        model.validate()?;
        let branches = model.material.branches.len();
        let patches: Vec<PatchState> =
            model.patches.iter().map(|p| PatchState::initial(&p.config, branches)).collect();
        let mut offsets = Vec::with_capacity(model.patches.len());
        let mut acc = 0;
        for p in &model.patches {
            offsets.push(acc);
            acc += 6 * p.config.len();
        }
        let nodes = model
            .nodes
            .iter()
            .map(|_| NodeRuntime {
                phase: usize::MAX,
                holds: vec![],
                rotation_ref: Rotation::identity(),
            })
            .collect();
        Ok(Self { model, settings, time: 0.0, patches, offsets, nodes, last_context: None })
    }

    pub fn dof_count(&self) -> usize {
        self.model.dof_count()
    }

    pub fn offset(&self, patch: usize) -> usize {
        self.offsets[patch]
    }

    pub fn temperature(&self) -> f64 {
        self.model.temperature.value(self.time)
    }

    /// Kinematics at every collocation point of a patch.
    pub fn kinematics(&self, patch: usize) -> Vec<Kinematics> {
        let cfg = &self.model.patches[patch].config;
        let st = &self.patches[patch];
        cfg.points
            .iter()
            .zip(&st.points)
            .map(|(ip, ps)| compute_strains(ip, ps, &st.control_points))
            .collect()
    }

    /// Centroid position of a patch at parameter `u`.
    pub fn position(&self, patch: usize, u: f64) -> Result<Vec3> {
        let p = &self.model.patches[patch].config.patch;
        crate::geometry::eval_coefficients(p, &self.patches[patch].control_points, u, 0).map(|v| v[0])
    }

    /// Displacement of a patch centroid point from its initial position.
    pub fn displacement(&self, patch: usize, u: f64) -> Result<Vec3> {
        let p = &self.model.patches[patch].config.patch;
        Ok(self.position(patch, u)? - p.curve_eval(u, 0)?[0])
    }

    pub fn end_position(&self, e: PatchEnd) -> Vec3 {
        let cps = &self.patches[e.patch].control_points;
        match e.end {
            End::Start => cps[0],
            End::End => cps[cps.len() - 1],
        }
    }

    pub fn end_displacement(&self, e: PatchEnd) -> Vec3 {
        let init = self.model.patches[e.patch].config.patch.control_points();
        let i = match e.end {
            End::Start => 0,
            End::End => init.len() - 1,
        };
        self.end_position(e) - init[i]
    }

    fn end_rotation(&self, e: PatchEnd) -> Rotation {
        self.patches[e.patch].points[end_index(&self.model, e)].rotation
    }

    fn initial_end_rotation(&self, e: PatchEnd) -> Rotation {
        self.model.patches[e.patch].config.points[end_index(&self.model, e)].rotation
    }

    /// Freezes history vectors and selects node phases for a step of size
    /// `h` starting at the current time.
    pub fn step_context(&mut self, h: f64) -> Result<StepContext> {
        let t1 = self.time + h;
        let mat = &self.model.material;
        let taus_n = mat.relaxation_times(self.model.temperature.value(self.time))?;
        let taus_1 = mat.relaxation_times(self.model.temperature.value(t1))?;
        let mut materials = Vec::with_capacity(self.model.patches.len());
        let mut frozen = Vec::with_capacity(self.model.patches.len());
        for (pi, pm) in self.model.patches.iter().enumerate() {
            let sm = StepMaterial::new(&pm.tensors, &taus_1, h);
            let kin = self.kinematics(pi);
            frozen.push(
                kin.iter()
                    .zip(&self.patches[pi].history)
                    .map(|(k, hist)| FrozenHistory::new(k, hist, &taus_n, h, &pm.tensors, &sm))
                    .collect(),
            );
            materials.push(sm);
        }
        let mut phases = Vec::with_capacity(self.nodes.len());
        for ni in 0..self.nodes.len() {
            let idx = self.model.nodes[ni].phase_index(t1);
            if self.nodes[ni].phase != idx {
                self.activate_phase(ni, idx);
            }
            phases.push(idx);
        }
        Ok(StepContext { time: t1, h, materials, frozen, phases })
    }

    fn activate_phase(&mut self, ni: usize, idx: usize) {
        let node = &self.model.nodes[ni];
        let master = node.ends[0];
        let phase = &node.phases[idx];
        let u = self.end_displacement(master);
        let holds = phase
            .translations
            .iter()
            .map(|c| match &c.target {
                Target::Hold => c.direction.dot(&u),
                Target::Prescribed(_) => 0.0,
            })
            .collect();
        let rotation_ref = match phase.rotation_reference {
            RotationReference::Initial => self.initial_end_rotation(master),
            RotationReference::Hold => self.end_rotation(master),
        };
        log::debug!("node `{}` enters phase {idx} at t = {}", node.label, self.time);
        self.nodes[ni] = NodeRuntime { phase: idx, holds, rotation_ref };
    }

    fn point_data<'a>(
        &'a self,
        ctx: &StepContext,
        patch: usize,
        i: usize,
        kin: &'a Kinematics,
        res: &'a Resultants,
    ) -> PointData<'a> {
        let pm = &self.model.patches[patch];
        PointData {
            initial: &pm.config.points[i],
            state: &self.patches[patch].points[i],
            kin,
            res,
            cn_bar: ctx.materials[patch].cn_bar,
            cm_bar: ctx.materials[patch].cm_bar,
            force: pm.distributed_force.value(ctx.time),
            moment: pm.distributed_moment.value(ctx.time),
        }
    }

    /// Assembles the residual and, if requested, the Jacobian of the full
    /// collocation system in the current state.
    pub fn assemble_system(&self, ctx: &StepContext, with_matrix: bool) -> (Option<TripletMatrix>, Vec<f64>) {
        let ndof = self.dof_count();
        let mut mat = with_matrix.then(|| TripletMatrix::new(ndof));
        let mut rhs = vec![0.0; ndof];
        let mut kins = Vec::with_capacity(self.patches.len());
        let mut ress = Vec::with_capacity(self.patches.len());
        for pi in 0..self.patches.len() {
            let kin = self.kinematics(pi);
            let res: Vec<Resultants> = kin
                .iter()
                .zip(&ctx.frozen[pi])
                .map(|(k, f)| resultants(k, &ctx.materials[pi], f))
                .collect();
            kins.push(kin);
            ress.push(res);
        }

        let put = |mat: &mut Option<TripletMatrix>, rhs: &mut [f64], row: usize, first_col: usize, rb: &RowBlocks, dir: Option<&Vec3>| {
            // `dir`: project the three equations onto one direction into `row`
            match dir {
                None => {
                    for a in 0..3 {
                        rhs[row + a] = rb.residual[a];
                    }
                }
                Some(d) => rhs[row] += d.dot(&rb.residual),
            }
            if let Some(m) = mat.as_mut() {
                for (k, (be, bt)) in rb.eta.iter().zip(&rb.theta).enumerate() {
                    let col = first_col + 6 * k;
                    match dir {
                        None => {
                            for a in 0..3 {
                                for b in 0..3 {
                                    m.add(row + a, col + b, be[(a, b)]);
                                    m.add(row + a, col + 3 + b, bt[(a, b)]);
                                }
                            }
                        }
                        Some(d) => {
                            let pe = be.transpose() * d;
                            let pt = bt.transpose() * d;
                            for b in 0..3 {
                                m.add(row, col + b, pe[b]);
                                m.add(row, col + 3 + b, pt[b]);
                            }
                        }
                    }
                }
            }
        };

        // field rows at interior collocation points
        for pi in 0..self.patches.len() {
            let cfg = &self.model.patches[pi].config;
            let n = cfg.len();
            for i in 1..n - 1 {
                let pd = self.point_data(ctx, pi, i, &kins[pi][i], &ress[pi][i]);
                let first_col = self.offsets[pi] + 6 * cfg.points[i].basis.first;
                let row = self.offsets[pi] + 6 * i;
                put(&mut mat, &mut rhs, row, first_col, &assemble_row_force(&pd), None);
                put(&mut mat, &mut rhs, row + 3, first_col, &assemble_row_moment(&pd), None);
            }
        }

        // node rows
        for (ni, node) in self.model.nodes.iter().enumerate() {
            let phase = &node.phases[ctx.phases[ni]];
            let rt = &self.nodes[ni];
            let master = node.ends[0];
            let mi = end_index(&self.model, master);
            let mrow = self.offsets[master.patch] + 6 * mi;
            let mcol = self.offsets[master.patch] + 6 * mi;
            let t = ctx.time;

            let tdirs: Vec<Vec3> = phase.translations.iter().map(|c| c.direction).collect();
            let (tbasis, nt) = split_basis(&tdirs).expect("validated");
            let (rbasis, nr) = split_basis(&phase.rotations).expect("validated");

            let u = self.end_displacement(master);
            for (k, c) in phase.translations.iter().enumerate() {
                let target = match &c.target {
                    Target::Prescribed(s) => s.value(t),
                    Target::Hold => rt.holds[k],
                };
                rhs[mrow + k] = c.direction.dot(&u) - target;
                if let Some(m) = mat.as_mut() {
                    for b in 0..3 {
                        m.add(mrow + k, mcol + b, c.direction[b]);
                    }
                }
            }
            let r_m = self.end_rotation(master);
            let phi = r_m.compose(&rt.rotation_ref.transpose()).log();
            let jl = left_jacobian_inverse(&phi) * r_m.matrix();
            for (k, d) in phase.rotations.iter().enumerate() {
                rhs[mrow + 3 + k] = d.dot(&phi);
                if let Some(m) = mat.as_mut() {
                    let row = jl.transpose() * d;
                    for b in 0..3 {
                        m.add(mrow + 3 + k, mcol + 3 + b, row[b]);
                    }
                }
            }
            // balance rows on the unconstrained directions
            let f_ext = phase.force.value(t);
            let m_ext = phase.moment.value(t);
            for k in nt..3 {
                rhs[mrow + k] = -tbasis[k].dot(&f_ext);
            }
            for k in nr..3 {
                rhs[mrow + 3 + k] = -rbasis[k].dot(&m_ext);
            }
            if nt < 3 || nr < 3 {
                for e in &node.ends {
                    let ei = end_index(&self.model, *e);
                    let pd = self.point_data(ctx, e.patch, ei, &kins[e.patch][ei], &ress[e.patch][ei]);
                    let (fb, mb) = end_contributions(&pd, end_sign(*e));
                    let first_col =
                        self.offsets[e.patch] + 6 * self.model.patches[e.patch].config.points[ei].basis.first;
                    for k in nt..3 {
                        put(&mut mat, &mut rhs, mrow + k, first_col, &fb, Some(&tbasis[k]));
                    }
                    for k in nr..3 {
                        put(&mut mat, &mut rhs, mrow + 3 + k, first_col, &mb, Some(&rbasis[k]));
                    }
                }
            }
            // slave compatibility rows
            for e in node.ends.iter().skip(1) {
                let ei = end_index(&self.model, *e);
                let srow = self.offsets[e.patch] + 6 * ei;
                let gap = self.end_position(*e) - self.end_position(master);
                let r_e = self.end_rotation(*e);
                let q_e = r_e.compose(&self.initial_end_rotation(*e).transpose());
                let q_m = r_m.compose(&self.initial_end_rotation(master).transpose());
                let rho = q_e.compose(&q_m.transpose()).log();
                let jinv = left_jacobian_inverse(&rho);
                let ae = jinv * r_e.matrix();
                let am = -(jinv * crate::so3::exp_so3(&rho).matrix() * r_m.matrix());
                for a in 0..3 {
                    rhs[srow + a] = gap[a];
                    rhs[srow + 3 + a] = rho[a];
                }
                if let Some(m) = mat.as_mut() {
                    for a in 0..3 {
                        m.add(srow + a, srow + a, 1.0);
                        m.add(srow + a, mcol + a, -1.0);
                        for b in 0..3 {
                            m.add(srow + 3 + a, srow + 3 + b, ae[(a, b)]);
                            m.add(srow + 3 + a, mcol + 3 + b, am[(a, b)]);
                        }
                    }
                }
            }
        }
        (mat, rhs)
    }

    /// Applies a global increment vector to all patches.
    pub fn apply_increment(&mut self, delta: &[f64], scale: f64) {
        for (pi, st) in self.patches.iter_mut().enumerate() {
            let cfg = &self.model.patches[pi].config;
            let o = self.offsets[pi];
            st.apply_increment(cfg, &delta[o..o + 6 * cfg.len()], scale);
        }
    }

    /// Newton–Raphson on the frozen step context. Returns the residual
    /// history; the state is left at the last iterate.
    pub fn newton_solve(&mut self, ctx: &StepContext) -> Result<Vec<f64>> {
        self.newton_shifted(ctx, None)
    }

    /// Newton on `r(x) − shift`.
    fn newton_shifted(&mut self, ctx: &StepContext, shift: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut history: Vec<f64> = Vec::new();
        let mut last_delta = f64::INFINITY;
        for it in 0..=self.settings.max_iter {
            let (mat, mut r) = self.assemble_system(ctx, true);
            if let Some(s) = shift {
                r.iter_mut().zip(s).for_each(|(a, b)| *a -= b);
            }
            let mat = mat.expect("matrix requested");
            let scales = mat.row_scales();
            let norm = scaled_norm(&r, &scales);
            if !norm.is_finite() {
                history.push(norm);
                break;
            }
            // round-off floor: tiny increments that no longer reduce the residual
            let stagnated = history.last().is_some_and(|&prev| norm >= 0.5 * prev) && last_delta <= 1e2 * self.settings.tol_increment;
            history.push(norm);
            if norm <= self.settings.tol_residual || stagnated {
                return Ok(history);
            }
            if it == self.settings.max_iter {
                break;
            }
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = mat.solve(&neg)?;
            self.apply_increment(&delta, 1.0);
            last_delta = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if last_delta <= self.settings.tol_increment {
                let (_, mut r) = self.assemble_system(ctx, false);
                if let Some(s) = shift {
                    r.iter_mut().zip(s).for_each(|(a, b)| *a -= b);
                }
                history.push(scaled_norm(&r, &scales));
                return Ok(history);
            }
        }
        Err(Error::NoConvergence {
            time: ctx.time,
            iterations: history.len().saturating_sub(1),
            residual: history.last().copied().unwrap_or(f64::NAN),
        })
    }

    fn commit_history(&mut self, ctx: &StepContext) {
        for pi in 0..self.patches.len() {
            let kin = self.kinematics(pi);
            let sm = &ctx.materials[pi];
            for (i, k) in kin.iter().enumerate() {
                self.patches[pi].history[i] = ctx.frozen[pi][i].updated_history(k, sm);
            }
        }
    }

    /// Follows `r(x) = (1 − λ) r(x₀)` from λ = 0 to 1 on a frozen context,
    /// for jumps (e.g. a sudden change of supports) that start outside the
    /// Newton basin. The end point is the ordinary step solution.
    fn continuation_solve(&mut self, ctx: &StepContext) -> Result<Vec<f64>> {
        let (_, r0) = self.assemble_system(ctx, false);
        let mut history = vec![];
        let (mut lambda, mut dl) = (0.0f64, 0.125f64);
        let mut stages = 0;
        while lambda < 1.0 {
            if stages == self.settings.max_continuation_stages || dl < 1.0 / 4096.0 {
                return Err(Error::NoConvergence {
                    time: ctx.time,
                    iterations: history.len(),
                    residual: history.last().copied().unwrap_or(f64::NAN),
                });
            }
            stages += 1;
            let next = (lambda + dl).min(1.0);
            let shift: Vec<f64> = r0.iter().map(|v| (1.0 - next) * v).collect();
            let saved = self.patches.clone();
            match self.newton_shifted(ctx, (next < 1.0).then_some(&shift[..])) {
                Ok(h) => {
                    log::trace!("continuation stage λ = {next}: {} iterations", h.len() - 1);
                    let fast = h.len() <= 5;
                    history.extend(h);
                    lambda = next;
                    if fast {
                        dl *= 2.0;
                    }
                }
                Err(e @ (Error::NoConvergence { .. } | Error::SingularSystem(_))) => {
                    log::trace!("continuation stage λ = {next} failed: {e}");
                    self.patches = saved;
                    dl *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        log::debug!("t = {}: continuation in {stages} stages", ctx.time);
        Ok(history)
    }

    /// One attempt at a step of size `h` without halving.
    pub fn try_step(&mut self, h: f64) -> Result<StepReport> {
        let ctx = self.step_context(h)?;
        let start = self.patches.clone();
        let residuals = match self.newton_solve(&ctx) {
            Ok(r) => r,
            Err(Error::NoConvergence { .. } | Error::SingularSystem(_)) if self.settings.max_continuation_stages > 0 => {
                self.patches = start;
                self.continuation_solve(&ctx)?
            }
            Err(e) => return Err(e),
        };
        self.commit_history(&ctx);
        self.time = ctx.time;
        self.last_context = Some(ctx);
        Ok(StepReport {
            time: self.time,
            temperature: self.temperature(),
            iterations: residuals.len() - 1,
            residuals,
            substeps: 1,
        })
    }

    /// Advances by `h`, halving the step (up to `max_halvings` times) when
    /// Newton fails.
    pub fn advance_step(&mut self, h: f64) -> Result<StepReport> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        self.advance_recursive(h, 0)
    }

    fn advance_recursive(&mut self, h: f64, depth: usize) -> Result<StepReport> {
        let patches = self.patches.clone();
        let nodes = self.nodes.clone();
        let time = self.time;
        match self.try_step(h) {
            Ok(r) => Ok(r),
            Err(e @ (Error::NoConvergence { .. } | Error::SingularSystem(_))) if depth < self.settings.max_halvings => {
                log::warn!("step at t = {time} with h = {h:e} failed ({e}); halving");
                self.patches = patches;
                self.nodes = nodes;
                self.time = time;
                let first = self.advance_recursive(0.5 * h, depth + 1)?;
                let second = self.advance_recursive(0.5 * h, depth + 1)?;
                let mut residuals = first.residuals;
                residuals.extend(second.residuals);
                Ok(StepReport {
                    time: second.time,
                    temperature: second.temperature,
                    iterations: first.iterations + second.iterations,
                    residuals,
                    substeps: first.substeps + second.substeps,
                })
            }
            Err(e) => {
                self.patches = patches;
                self.nodes = nodes;
                self.time = time;
                Err(e)
            }
        }
    }

    /// Context of the last accepted step.
    pub fn last_context(&self) -> Option<&StepContext> {
        self.last_context.as_ref()
    }

    /// Stress resultants at every collocation point of a patch, evaluated
    /// with the last accepted step's frozen history (zero before any step).
    pub fn resultants(&self, patch: usize) -> Vec<Resultants> {
        let kin = self.kinematics(patch);
        match &self.last_context {
            Some(ctx) => kin
                .iter()
                .zip(&ctx.frozen[patch])
                .map(|(k, f)| resultants(k, &ctx.materials[patch], f))
                .collect(),
            None => vec![Resultants { n: Vec3::zeros(), n_s: Vec3::zeros(), m: Vec3::zeros(), m_s: Vec3::zeros() }; kin.len()],
        }
    }
}
