//! Constraint-conserving functional derivatives on discretized 1-D fields.
//!
//! A field `rho` on a grid carries a conserved integral `K = sum_i w_i
//! f(x_i, rho_i)` for an invertible per-node density `f`. Differentiating a
//! functional while holding `K` fixed is ambiguous along the `f'` direction;
//! this crate implements the family of restricted derivatives that resolve
//! the ambiguity, the projection of changes onto the constraint set, the
//! degree-zero extension that removes the constraint altogether, and
//! diagnostics (directional probes, homogeneity checks, a projected descent
//! flow) that exercise those operators against each other.
//!
//! ```
//! use kfunc_core::{k_derivative, k_value, ConstraintSpec, Field, Grid, KTarget};
//!
//! let grid = Grid::periodic(64, 1.0)?;
//! let rho = Field::from_fn(&grid, |x| 1.5 + (2.0 * std::f64::consts::PI * x).sin())?;
//! let c = ConstraintSpec::identity();
//! let k = KTarget::new(k_value(&rho, &c)?)?;
//!
//! // Gradient of A = integral of rho^2, then the mass-conserving version.
//! let g = rho.scale(2.0)?;
//! let kd = k_derivative(&g, &rho, &c, &k)?;
//!
//! // The conserving derivative annihilates uniform shifts of the gradient.
//! let shifted = k_derivative(&g.map(|v| v + 3.0)?, &rho, &c, &k)?;
//! assert!(kd.max_abs_diff(&shifted)? < 1e-12);
//! # Ok::<(), kfunc_core::Error>(())
//! ```

pub mod constraint;
pub mod decompose;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod gateaux;
pub mod grid;
pub mod kderiv;
pub mod profiles;
pub mod verify;

pub use constraint::{deformed_path, extend, k_value, ConstraintSpec, Interval, KTarget};
pub use decompose::{l_split, shape, shape_route_residual, shape_split, ShapeSplit};
pub use error::{Error, Result};
pub use flow::{flow_step, minimize, FlowOptions, FlowRecord, FlowStatus, FlowTrace};
pub use functionals::{Functional, HomogeneityMeta};
pub use gateaux::{
    chain_rule_residual, directional, directional_residual, directional_residual_with,
    directional_with, ChainRuleCheck, PathProbe, ProbeOptions,
};
pub use grid::{fd_gradient, Field, Grid, DEFAULT_FD_STEP};
pub use kderiv::{
    homogeneity_residual, k_derivative, multiplier, project_change, u_derivative, WeightChoice,
};
pub use profiles::{smooth_direction, smooth_positive, Profile};
pub use verify::{run_all, run_all_with, CaseResult, Report, REQUIRED_IDENTITIES};
