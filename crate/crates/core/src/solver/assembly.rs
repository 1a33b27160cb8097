//! Linearized collocation rows.
//!
//! Unknowns per control point are `[δη_j, δΘ_j]`: spatial translation and
//! material rotation increments. Field rows use the material form of the
//! balance laws, end rows use the spatial form.

use crate::geometry::InitialPoint;
use crate::so3::{hat, Mat3, Vec3};

use super::state::{Kinematics, PointState, Resultants};

/// Everything the row kernels need at one collocation point.
#[derive(Debug, Clone, Copy)]
pub struct PointData<'a> {
    pub initial: &'a InitialPoint,
    pub state: &'a PointState,
    pub kin: &'a Kinematics,
    pub res: &'a Resultants,
    pub cn_bar: Vec3,
    pub cm_bar: Vec3,
    /// Distributed spatial loads `n̄`, `m̄`.
    pub force: Vec3,
    pub moment: Vec3,
}

/// Three equations at a point: residual and, per active basis function,
/// coefficient blocks on `δη_j` and `δΘ_j`.
#[derive(Debug, Clone)]
pub struct RowBlocks {
    pub residual: Vec3,
    pub eta: Vec<Mat3>,
    pub theta: Vec<Mat3>,
}

impl RowBlocks {
    /// Linear action on per-control-point increments (test helper).
    pub fn apply(&self, first: usize, eta: &[Vec3], theta: &[Vec3]) -> Vec3 {
        let mut out = Vec3::zeros();
        for (k, (a, b)) in self.eta.iter().zip(&self.theta).enumerate() {
            out += a * eta[first + k] + b * theta[first + k];
        }
        out
    }
}

fn diag(v: &Vec3) -> Mat3 {
    Mat3::from_diagonal(v)
}

/// Force balance `F = K × N + N,s + Rᵀn̄` and its linearization.
pub fn assemble_row_force(pd: &PointData) -> RowBlocks {
    let r = pd.state.rotation.matrix();
    let rt = r.transpose();
    let k = hat(&pd.state.curvature);
    let nn = hat(&pd.res.n);
    let g = hat(&pd.kin.gamma);
    let gs = hat(&pd.kin.gamma_s);
    let c = diag(&pd.cn_bar);
    let nbar = rt * pd.force;
    let residual = pd.state.curvature.cross(&pd.res.n) + pd.res.n_s + nbar;

    let eta1 = (k * c - c * k) * rt;
    let eta2 = c * rt;
    let th1 = c * g - nn;
    let th0 = -nn * k + k * c * g + c * gs + hat(&nbar);
    let [b0, b1, b2] = &pd.initial.basis_s;
    let eta = (0..b0.len()).map(|j| eta2 * b2[j] + eta1 * b1[j]).collect();
    let theta = (0..b0.len()).map(|j| th1 * b1[j] + th0 * b0[j]).collect();
    RowBlocks { residual, eta, theta }
}

/// Moment balance `T = K × M + M,s + Γ × N + Rᵀm̄` and its linearization.
pub fn assemble_row_moment(pd: &PointData) -> RowBlocks {
    let r = pd.state.rotation.matrix();
    let rt = r.transpose();
    let k = hat(&pd.state.curvature);
    let ks = hat(&pd.state.curvature_s);
    let nn = hat(&pd.res.n);
    let mm = hat(&pd.res.m);
    let g = hat(&pd.kin.gamma);
    let cn = diag(&pd.cn_bar);
    let cm = diag(&pd.cm_bar);
    let mbar = rt * pd.moment;
    let residual =
        pd.state.curvature.cross(&pd.res.m) + pd.res.m_s + pd.kin.gamma.cross(&pd.res.n) + mbar;

    let gcn = g * cn - nn;
    let eta1 = gcn * rt;
    let th2 = cm;
    let th1 = k * cm - mm + cm * k;
    let th0 = k * cm * k - mm * k + cm * ks + gcn * g + hat(&mbar);
    let [b0, b1, b2] = &pd.initial.basis_s;
    let eta = (0..b0.len()).map(|j| eta1 * b1[j]).collect();
    let theta = (0..b0.len()).map(|j| th2 * b2[j] + th1 * b1[j] + th0 * b0[j]).collect();
    RowBlocks { residual, eta, theta }
}

/// Spatial end force `σ R N` and moment `σ R M` contributed by a patch end
/// (`σ = +1` at `u = 1`, `−1` at `u = 0`), with their linearizations.
/// A free end is in balance when these equal the applied end loads.
pub fn end_contributions(pd: &PointData, sigma: f64) -> (RowBlocks, RowBlocks) {
    let r = *pd.state.rotation.matrix();
    let rt = r.transpose();
    let cn = diag(&pd.cn_bar);
    let cm = diag(&pd.cm_bar);
    let g = hat(&pd.kin.gamma);
    let k = hat(&pd.state.curvature);
    let f_eta1 = r * cn * rt * sigma;
    let f_th0 = r * (cn * g - hat(&pd.res.n)) * sigma;
    let m_th1 = r * cm * sigma;
    let m_th0 = r * (cm * k - hat(&pd.res.m)) * sigma;
    let [b0, b1, _] = &pd.initial.basis_s;
    let n = b0.len();
    let force = RowBlocks {
        residual: r * pd.res.n * sigma,
        eta: (0..n).map(|j| f_eta1 * b1[j]).collect(),
        theta: (0..n).map(|j| f_th0 * b0[j]).collect(),
    };
    let moment = RowBlocks {
        residual: r * pd.res.m * sigma,
        eta: vec![Mat3::zeros(); n],
        theta: (0..n).map(|j| m_th1 * b1[j] + m_th0 * b0[j]).collect(),
    };
    (force, moment)
}

/// Neumann rows of a single free end under applied spatial end loads:
/// `σ R N − n̄_c = 0` and `σ R M − m̄_c = 0`.
pub fn assemble_neumann_rows(pd: &PointData, sigma: f64, force: &Vec3, moment: &Vec3) -> (RowBlocks, RowBlocks) {
    let (mut f, mut m) = end_contributions(pd, sigma);
    f.residual -= force;
    m.residual -= moment;
    (f, m)
}
