//! Strong-form collocation solver for the time-discretized beam equations.

pub mod assembly;
pub mod linear;
pub mod model;
pub mod schedule;
pub mod simulation;
pub mod state;

#[cfg(test)]
mod tests;

pub use model::{BeamModel, NodeModel, NodePhase, PatchModel, RotationReference, Target, TranslationConstraint};
pub use schedule::{Schedule, VectorSchedule};
pub use simulation::{Simulation, SolverSettings, StepContext, StepReport};
pub use state::{compute_strains, Kinematics, PatchState, PointState, Resultants};

use crate::error::{Error, Result};
use crate::so3::Vec3;

/// Relative discrete L2 error `‖u_r − u_h‖ / ‖u_r‖` over matching grids.
pub fn l2_error(approx: &[Vec3], reference: &[Vec3]) -> Result<f64> {
    if approx.len() != reference.len() {
        return Err(Error::InvalidArgument("grids do not match".into()));
    }
    let den: f64 = reference.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = approx.iter().zip(reference).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
    Ok(num / den)
}
