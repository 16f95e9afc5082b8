//! Curves of Lagrangians with a prescribed set of conjugate instants.
//!
//! The chain is: a smooth `f ≥ 0` vanishing exactly on `F`, `R = 1 − f`, the
//! curve of forms `ρ(t)`, its Lagrangian graph on `[c, b]`, the extension back
//! to `ξ(a) = L₀` and finally the differential system realizing the curve.

mod extend;
mod pipeline;
mod set;
mod vanish;

pub use extend::{
    chart_jet, extend_average, extend_forms, extend_lagrangian, extend_lagrangian_with, plan_average, AverageExtension, AveragePlan,
    FormExtension, LagrangianExtension, MatFn,
};
pub use pipeline::{
    build_prescribed, build_prescribed_with, compare_with_set, refinement_schedule, PrescribeOptions, Prescribed,
    SetComparison,
};
pub use set::ClosedSetDescriptor;
pub use vanish::{
    flat_exp, rho_curve, rho_derivative, rho_jet, smooth_step, RadiusCurve, ScalarCurve, VanishingFunction,
    VanishingOptions, vanishing_function,
};
