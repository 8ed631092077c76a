//! Pixel-space gradient descent on `MSE + λ_dis · DIS`, and the
//! finite-difference oracle used to validate every analytic gradient.

mod descent;
mod gradcheck;
mod validation;

pub use descent::{
    perturbed_init, run_descent, total_loss, total_loss_grad, OptimizeConfig, OptimizeTrace,
    TotalObjective, TraceRecord,
};
pub use gradcheck::{
    check_gradient, finite_diff_grad, relative_error, GradCheckReport, REL_ERROR_FLOOR,
};
pub use validation::{validate_gradients, GradCheckCase};
