//! Collocation isogeometric boundary element solver for 3-D linear
//! elasticity on finite domains containing elastic inclusions.
//!
//! The boundary is a set of NURBS patches carrying a geometry-independent
//! field approximation. Inclusions with elastic properties different from
//! the domain are handled with an initial-stress volume term: general
//! inclusions are bounded by two NURBS surfaces and integrated with Gauss
//! rules, reinforcement bars (rock bolts) are linear inclusions integrated
//! analytically. Strains at interior grid points are recovered by
//! differentiating the interpolated displacements, so no hypersingular
//! kernels appear. The coupled problem is solved either in one step, as a
//! full block system, or by modified Newton-Raphson iteration.

// index-based loops below mirror the standard basis/elevation recurrences,
// and negated comparisons like !(x > 0.0) deliberately reject NaN
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::explicit_counter_loop
)]

pub mod assembly;
pub mod grid;
pub mod inclusion;
pub mod kernels;
pub mod model;
pub mod nurbs;
pub mod oracles;
pub mod par;
pub mod quad;
pub mod results;
pub mod solver;

/// 3-D coordinate / vector type used throughout.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 kernel block (U, T).
pub type Mat3 = nalgebra::Matrix3<f64>;
/// 3x6 kernel block (E in Voigt columns).
pub type KernelBlock = nalgebra::SMatrix<f64, 3, 6>;
/// Voigt 6-vector, ordered (11, 22, 33, 12, 23, 13).
pub type Voigt = nalgebra::Vector6<f64>;
/// 6x6 constitutive matrix.
pub type Mat6 = nalgebra::Matrix6<f64>;
