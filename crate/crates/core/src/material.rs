//! Temperature-dependent generalized Maxwell material for beam sections.
//!
//! Stiffness tensors are diagonal and stored as their diagonals (`Vec3`).
//! All moduli are in Pa, times in s, temperatures in °C.

use crate::error::{Error, Result};
use crate::so3::Vec3;

/// WLF shift-factor parameters. `t_g` doubles as the reference temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlfParams {
    pub c1: f64,
    pub c2: f64,
    pub t_g: f64,
}

impl WlfParams {
    pub const VAN_MANEN: WlfParams = WlfParams { c1: 14.59, c2: 48.43, t_g: 70.0 };
    pub const LIN: WlfParams = WlfParams { c1: 17.44, c2: 51.60, t_g: 66.9 };

    pub fn new(c1: f64, c2: f64, t_g: f64) -> Result<Self> {
        if !(c2 > 0.0) || !c1.is_finite() || !t_g.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid WLF parameters ({c1}, {c2}, {t_g})")));
        }
        Ok(Self { c1, c2, t_g })
    }

    /// `a_T = −C1 (T − T_G) / (C2 + T − T_G)`.
    pub fn shift_factor(&self, temperature: f64) -> Result<f64> {
        let dt = temperature - self.t_g;
        let denominator = self.c2 + dt;
        if !(denominator > 0.0) {
            return Err(Error::TemperatureOutOfRange { temperature, denominator });
        }
        Ok(-self.c1 * dt / denominator)
    }

    /// `10^{a_T}`.
    pub fn multiplier(&self, temperature: f64) -> Result<f64> {
        Ok(10f64.powf(self.shift_factor(temperature)?))
    }
}

/// One spring–dashpot branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellBranch {
    /// Young's modulus `E_α` [Pa].
    pub modulus: f64,
    /// Relaxation time at `T_G` [s].
    pub tau_g: f64,
}

impl MaxwellBranch {
    pub fn shear_modulus(&self, poisson: f64) -> f64 {
        self.modulus / (2.0 * (1.0 + poisson))
    }

    /// `τ_α(T) = τ_{G,α} 10^{a_T}`.
    pub fn relaxation_time(&self, wlf: &WlfParams, temperature: f64) -> Result<f64> {
        Ok(self.tau_g * wlf.multiplier(temperature)?)
    }
}

/// Prony series with WLF shifting.
#[derive(Debug, Clone, PartialEq)]
pub struct PronySeries {
    pub name: String,
    /// Equilibrium modulus `E_∞` [Pa].
    pub e_inf: f64,
    pub branches: Vec<MaxwellBranch>,
    pub wlf: WlfParams,
    pub poisson: f64,
}

const PLA_TABLE: [(f64, f64); 15] = [
    (20.12, 1e-10),
    (50.31, 1e-9),
    (81.37, 1e-8),
    (97.02, 1e-7),
    (173.70, 1e-6),
    (225.60, 1e-5),
    (292.64, 1e-4),
    (474.56, 1e-3),
    (449.43, 1e-2),
    (237.98, 1e-1),
    (114.16, 1e0),
    (51.82, 1e1),
    (29.98, 1e2),
    (14.40, 1e3),
    (0.72, 1e5),
];

impl PronySeries {
    pub const PLA_VAN_MANEN: &'static str = "PLA-vanManen";

    /// 15-branch PLA series with the first-row WLF constants and ν = 0.33.
    pub fn pla_van_manen() -> Self {
        Self {
            name: Self::PLA_VAN_MANEN.into(),
            e_inf: 80.59e6,
            branches: PLA_TABLE
                .iter()
                .map(|&(e, tau_g)| MaxwellBranch { modulus: e * 1e6, tau_g })
                .collect(),
            wlf: WlfParams::VAN_MANEN,
            poisson: 0.33,
        }
    }

    /// Equilibrium spring only.
    pub fn elastic(name: &str, modulus: f64, poisson: f64) -> Self {
        Self { name: name.into(), e_inf: modulus, branches: vec![], wlf: WlfParams::VAN_MANEN, poisson }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            Self::PLA_VAN_MANEN => Ok(Self::pla_van_manen()),
            _ => Err(Error::Config(format!("unknown material `{name}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_inf >= 0.0) {
            return Err(Error::InvalidArgument("E_inf must be nonnegative".into()));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::InvalidArgument(format!("Poisson ratio {} out of range", self.poisson)));
        }
        for (i, b) in self.branches.iter().enumerate() {
            if !(b.modulus >= 0.0) || !(b.tau_g > 0.0) {
                return Err(Error::InvalidArgument(format!("branch {}: need E ≥ 0 and τ_G > 0", i + 1)));
            }
        }
        WlfParams::new(self.wlf.c1, self.wlf.c2, self.wlf.t_g).map(|_| ())
    }

    /// Instantaneous (glassy) modulus `E_∞ + Σ E_α`.
    pub fn instantaneous_modulus(&self) -> f64 {
        self.e_inf + self.branches.iter().map(|b| b.modulus).sum::<f64>()
    }

    pub fn relaxation_times(&self, temperature: f64) -> Result<Vec<f64>> {
        let m = self.wlf.multiplier(temperature)?;
        Ok(self.branches.iter().map(|b| b.tau_g * m).collect())
    }

    /// Relaxation modulus `E(t) = E_∞ + Σ E_α exp(−t/τ_α(T))` at constant `T`.
    pub fn relaxation_modulus(&self, t: f64, temperature: f64) -> Result<f64> {
        let taus = self.relaxation_times(temperature)?;
        Ok(self.e_inf
            + self
                .branches
                .iter()
                .zip(taus)
                .map(|(b, tau)| b.modulus * (-t / tau).exp())
                .sum::<f64>())
    }
}

/// Cross-section geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionProperties {
    pub area: f64,
    pub i1: f64,
    pub i2: f64,
    pub torsion: f64,
    pub shear_correction: f64,
}

impl SectionProperties {
    pub fn circular(diameter: f64, shear_correction: f64) -> Result<Self> {
        if !(diameter > 0.0 && shear_correction > 0.0) {
            return Err(Error::InvalidArgument("diameter and shear correction must be positive".into()));
        }
        let d2 = diameter * diameter;
        let inertia = std::f64::consts::PI * d2 * d2 / 64.0;
        Ok(Self {
            area: std::f64::consts::PI * d2 / 4.0,
            i1: inertia,
            i2: inertia,
            torsion: 2.0 * inertia,
            shear_correction,
        })
    }
}

/// Diagonals of the equilibrium and branch stiffness tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessTensors {
    pub cn_inf: Vec3,
    pub cm_inf: Vec3,
    pub cn: Vec<Vec3>,
    pub cm: Vec<Vec3>,
}

impl StiffnessTensors {
    pub fn branch_count(&self) -> usize {
        self.cn.len()
    }

    pub fn cn0(&self) -> Vec3 {
        self.cn.iter().fold(self.cn_inf, |acc, c| acc + c)
    }

    pub fn cm0(&self) -> Vec3 {
        self.cm.iter().fold(self.cm_inf, |acc, c| acc + c)
    }
}

fn section_diagonals(e: f64, g: f64, s: &SectionProperties) -> (Vec3, Vec3) {
    let ga = g * s.shear_correction * s.area;
    (Vec3::new(ga, ga, e * s.area), Vec3::new(e * s.i1, e * s.i2, g * s.torsion))
}

/// `C_N = diag(κGA, κGA, EA)`, `C_M = diag(EI₁, EI₂, GJ_t)` per spring.
pub fn build_section_tensors(series: &PronySeries, section: &SectionProperties) -> StiffnessTensors {
    let nu = series.poisson;
    let (cn_inf, cm_inf) = section_diagonals(series.e_inf, series.e_inf / (2.0 * (1.0 + nu)), section);
    let (cn, cm) = series
        .branches
        .iter()
        .map(|b| section_diagonals(b.modulus, b.shear_modulus(nu), section))
        .unzip();
    StiffnessTensors { cn_inf, cm_inf, cn, cm }
}

/// Trapezoidal branch weights for a step of size `h` with `τ = τ^{n+1}`:
/// `a = h / (2τ + h)`, `b = τ / (2τ + h)`. Written in `r = h/τ` so that
/// `τ → ∞` and `τ → 0` stay finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchWeights {
    pub a: f64,
    pub b: f64,
}

impl BranchWeights {
    pub fn new(tau: f64, h: f64) -> Self {
        let r = h / tau;
        Self { a: r / (2.0 + r), b: 1.0 / (2.0 + r) }
    }
}

pub fn branch_weights(taus: &[f64], h: f64) -> Vec<BranchWeights> {
    taus.iter().map(|&t| BranchWeights::new(t, h)).collect()
}

/// `C̄_N = C_N0 − Σ a_α C_Nα` and the same for `C̄_M`.
pub fn effective_stiffness(tensors: &StiffnessTensors, taus: &[f64], h: f64) -> (Vec3, Vec3) {
    let w = branch_weights(taus, h);
    effective_from_weights(tensors, &w)
}

pub fn effective_from_weights(tensors: &StiffnessTensors, w: &[BranchWeights]) -> (Vec3, Vec3) {
    let mut cn = tensors.cn0();
    let mut cm = tensors.cm0();
    for ((n, m), wa) in tensors.cn.iter().zip(&tensors.cm).zip(w) {
        cn -= n * wa.a;
        cm -= m * wa.a;
    }
    (cn, cm)
}

/// `Ψ = (h/τⁿ) Γⁿ + ((2τⁿ − h)/τⁿ) Γ_αⁿ` for one branch.
pub fn history_vector(strain: &Vec3, branch_strain: &Vec3, tau_n: f64, h: f64) -> Vec3 {
    let r = h / tau_n;
    strain * r + branch_strain * (2.0 - r)
}

/// History vectors of every branch.
pub fn history_vectors(strain: &Vec3, branch_strains: &[Vec3], taus_n: &[f64], h: f64) -> Vec<Vec3> {
    branch_strains
        .iter()
        .zip(taus_n)
        .map(|(g, &t)| history_vector(strain, g, t, h))
        .collect()
}

/// `Γ_α^{n+1} = a Γ^{n+1} + b Ψ`.
pub fn update_viscous_strain(strain: &Vec3, psi: &Vec3, w: BranchWeights) -> Vec3 {
    strain * w.a + psi * w.b
}

pub fn update_viscous_strains(strain: &Vec3, psis: &[Vec3], w: &[BranchWeights]) -> Vec<Vec3> {
    psis.iter().zip(w).map(|(p, wa)| update_viscous_strain(strain, p, *wa)).collect()
}

/// Direct Prony form `C_∞ Γ + Σ C_α (Γ − Γ_α)`.
pub fn stress_direct(strain: &Vec3, branch_strains: &[Vec3], c_inf: &Vec3, c: &[Vec3]) -> Vec3 {
    let mut s = c_inf.component_mul(strain);
    for (ca, ga) in c.iter().zip(branch_strains) {
        s += ca.component_mul(&(strain - ga));
    }
    s
}

/// History part `Φ = Σ b_α C_α Ψ_α` of the effective-stiffness form.
pub fn history_stress(psis: &[Vec3], c: &[Vec3], w: &[BranchWeights]) -> Vec3 {
    psis.iter()
        .zip(c)
        .zip(w)
        .fold(Vec3::zeros(), |acc, ((p, ca), wa)| acc + ca.component_mul(p) * wa.b)
}

/// Effective form `C̄ Γ − Σ b_α C_α Ψ_α`.
pub fn stress_effective(strain: &Vec3, c_bar: &Vec3, psis: &[Vec3], c: &[Vec3], w: &[BranchWeights]) -> Vec3 {
    c_bar.component_mul(strain) - history_stress(psis, c, w)
}

/// Material response of one section for a time step: effective stiffness
/// and branch weights for both resultants.
#[derive(Debug, Clone)]
pub struct StepMaterial {
    pub weights: Vec<BranchWeights>,
    pub cn_bar: Vec3,
    pub cm_bar: Vec3,
}

impl StepMaterial {
    pub fn new(tensors: &StiffnessTensors, taus_next: &[f64], h: f64) -> Self {
        let weights = branch_weights(taus_next, h);
        let (cn_bar, cm_bar) = effective_from_weights(tensors, &weights);
        Self { weights, cn_bar, cm_bar }
    }
}
