//! Configuration state, strains and stress resultants at collocation points.

use crate::geometry::{field_at, InitialConfig, InitialPoint};
use crate::material::{history_stress, history_vector, update_viscous_strain, StepMaterial, StiffnessTensors};
use crate::so3::{dexp_right, dexp_right_derivative, exp_so3, Rotation, Vec3};

/// Rotation and curvature stored at a collocation point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointState {
    pub rotation: Rotation,
    pub curvature: Vec3,
    pub curvature_s: Vec3,
}

/// Viscous strains of one branch (or a frozen history vector with the
/// same layout): `Γ_α`, `Γ_α,s`, `K_α`, `K_α,s`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchStrains {
    pub gamma: Vec3,
    pub gamma_s: Vec3,
    pub kappa: Vec3,
    pub kappa_s: Vec3,
}

/// Degrees of freedom and viscous history of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchState {
    pub control_points: Vec<Vec3>,
    pub points: Vec<PointState>,
    /// `history[i][α]` at collocation point `i`.
    pub history: Vec<Vec<BranchStrains>>,
}

impl PatchState {
    pub fn initial(config: &InitialConfig, branches: usize) -> Self {
        Self {
            control_points: config.patch.control_points().to_vec(),
            points: config
                .points
                .iter()
                .map(|p| PointState { rotation: p.rotation, curvature: p.curvature, curvature_s: p.curvature_s })
                .collect(),
            history: vec![vec![BranchStrains::default(); branches]; config.len()],
        }
    }

    /// Adds `scale·δ` where `delta` holds `[δη_j, δΘ_j]` per control
    /// point: translations additively, rotations through `R ← R exp(Θ̃)`
    /// with the matching curvature update.
    pub fn apply_increment(&mut self, config: &InitialConfig, delta: &[f64], scale: f64) {
        let n = self.control_points.len();
        let mut theta = Vec::with_capacity(n);
        for j in 0..n {
            let d = &delta[6 * j..6 * j + 6];
            self.control_points[j] += Vec3::new(d[0], d[1], d[2]) * scale;
            theta.push(Vec3::new(d[3], d[4], d[5]) * scale);
        }
        for (ip, ps) in config.points.iter().zip(self.points.iter_mut()) {
            let [th, th_s, th_ss] = field_at(ip, &theta);
            update_point(ps, &th, &th_s, &th_ss);
        }
    }
}

/// `R ← R exp(Θ̃)`, `K ← exp(−Θ̃)K + T(Θ)Θ,s` and the exact derivative
/// of the latter for `K,s`.
pub fn update_point(ps: &mut PointState, th: &Vec3, th_s: &Vec3, th_ss: &Vec3) {
    let q = exp_so3(th);
    let e = q.matrix().transpose();
    let t = dexp_right(th);
    let dt = dexp_right_derivative(th, th_s);
    let w = t * th_s;
    let ek = e * ps.curvature;
    ps.curvature_s = -w.cross(&ek) + e * ps.curvature_s + dt * th_s + t * th_ss;
    ps.curvature = ek + w;
    ps.rotation = ps.rotation.compose(&q).with_drift_correction();
}

/// Centroid derivatives and material strains at a collocation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Vec3,
    pub c_s: Vec3,
    pub c_ss: Vec3,
    /// `Γ = Rᵀ c,s` and `Γ,s = −K × Γ + Rᵀ c,ss`.
    pub gamma: Vec3,
    pub gamma_s: Vec3,
    /// `Γ_N = Γ − Γ₀`.
    pub strain: Vec3,
    pub strain_s: Vec3,
    /// `K_M = K − K₀`.
    pub curvature_strain: Vec3,
    pub curvature_strain_s: Vec3,
}

pub fn compute_strains(ip: &InitialPoint, ps: &PointState, control_points: &[Vec3]) -> Kinematics {
    let [c, c_s, c_ss] = field_at(ip, control_points);
    let gamma = ps.rotation.apply_transpose(&c_s);
    let gamma_s = -ps.curvature.cross(&gamma) + ps.rotation.apply_transpose(&c_ss);
    Kinematics {
        position: c,
        c_s,
        c_ss,
        gamma,
        gamma_s,
        strain: gamma - ip.gamma,
        strain_s: gamma_s - ip.gamma_s,
        curvature_strain: ps.curvature - ip.curvature,
        curvature_strain_s: ps.curvature_s - ip.curvature_s,
    }
}

/// Step-frozen history data at a collocation point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenHistory {
    pub psi: Vec<BranchStrains>,
    /// `Σ b_α C_α Ψ_α` and its s-derivative, for `N` and `M`.
    pub phi_n: Vec3,
    pub phi_n_s: Vec3,
    pub phi_m: Vec3,
    pub phi_m_s: Vec3,
}

impl FrozenHistory {
    /// History vectors from the strains at `tⁿ` and `τⁿ`.
    pub fn new(
        kin: &Kinematics,
        history: &[BranchStrains],
        taus_n: &[f64],
        h: f64,
        tensors: &StiffnessTensors,
        mat: &StepMaterial,
    ) -> Self {
        let psi: Vec<BranchStrains> = history
            .iter()
            .zip(taus_n)
            .map(|(b, &tau)| BranchStrains {
                gamma: history_vector(&kin.strain, &b.gamma, tau, h),
                gamma_s: history_vector(&kin.strain_s, &b.gamma_s, tau, h),
                kappa: history_vector(&kin.curvature_strain, &b.kappa, tau, h),
                kappa_s: history_vector(&kin.curvature_strain_s, &b.kappa_s, tau, h),
            })
            .collect();
        let pick = |f: fn(&BranchStrains) -> Vec3| psi.iter().map(f).collect::<Vec<_>>();
        let w = &mat.weights;
        Self {
            phi_n: history_stress(&pick(|b| b.gamma), &tensors.cn, w),
            phi_n_s: history_stress(&pick(|b| b.gamma_s), &tensors.cn, w),
            phi_m: history_stress(&pick(|b| b.kappa), &tensors.cm, w),
            phi_m_s: history_stress(&pick(|b| b.kappa_s), &tensors.cm, w),
            psi,
        }
    }

    /// Viscous strains at `t^{n+1}` from the converged strains.
    pub fn updated_history(&self, kin: &Kinematics, mat: &StepMaterial) -> Vec<BranchStrains> {
        self.psi
            .iter()
            .zip(&mat.weights)
            .map(|(p, &w)| BranchStrains {
                gamma: update_viscous_strain(&kin.strain, &p.gamma, w),
                gamma_s: update_viscous_strain(&kin.strain_s, &p.gamma_s, w),
                kappa: update_viscous_strain(&kin.curvature_strain, &p.kappa, w),
                kappa_s: update_viscous_strain(&kin.curvature_strain_s, &p.kappa_s, w),
            })
            .collect()
    }
}

/// Material stress resultants and their s-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resultants {
    pub n: Vec3,
    pub n_s: Vec3,
    pub m: Vec3,
    pub m_s: Vec3,
}

/// `N = C̄_N Γ_N − Φ_N`, `M = C̄_M K_M − Φ_M` and their s-derivatives.
pub fn resultants(kin: &Kinematics, mat: &StepMaterial, frozen: &FrozenHistory) -> Resultants {
    Resultants {
        n: mat.cn_bar.component_mul(&kin.strain) - frozen.phi_n,
        n_s: mat.cn_bar.component_mul(&kin.strain_s) - frozen.phi_n_s,
        m: mat.cm_bar.component_mul(&kin.curvature_strain) - frozen.phi_m,
        m_s: mat.cm_bar.component_mul(&kin.curvature_strain_s) - frozen.phi_m_s,
    }
}
