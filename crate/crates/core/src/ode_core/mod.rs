//! Generic numerical kernels shared by the solver modules.

mod dop853_tableau;
mod integrate;
mod lsq;
mod newton;
mod quad;
mod roots;
mod sensitivity;

pub use integrate::{integrate, Direction, EventRecord, EventSpec, IntegrationError, IntegratorConfig, Trajectory};
pub use lsq::{linear_lsq, LeastSquaresFit, LsqError};
pub use newton::{newton_solve, newton_solve_joint, NewtonError, NewtonOptions, NewtonResult};
pub use quad::{quad_adaptive, QuadError, QuadResult};
pub use roots::{bisect, find_root, BisectError, RootError};
pub use sensitivity::VariationalSystem;
