//! Numerical laboratory for recurrence properties of operator families on
//! finite-dimensional complex coordinate spaces.
//!
//! The crate works with finite truncations: vectors live in `C^n`, operators
//! are structured or dense `n x n` maps, and an *operator set* is an indexed
//! family `T_1, T_2, ...` enumerated up to a budget. On top of that sit the
//! recurrence questions this library answers:
//!
//! * how close does some member of the family return a vector to itself
//!   ([`recurrence::residual`]),
//! * does a ball return to meet itself under some member
//!   ([`recurrence::certify_recurrent_set`]), and
//! * can a vector with certified return bounds be constructed by nested-ball
//!   refinement ([`recurrence::construct_recurrent_vector`]).
//!
//! Supporting modules handle witness transport along commuting or
//! intertwining maps ([`transforms`]) and regularized operator groups of the
//! form `S(z) = exp(zA) C` ([`groups`]).
//!
//! Everything is deterministic: sampling goes through explicitly seeded
//! generators, enumeration order is fixed, and negative answers are always
//! relative to the enumeration budget that produced them.

/// Version of this library, for embedding in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod groups;
mod linalg;
pub mod operators;
pub mod recurrence;
pub mod scenarios;
pub mod sets;
pub mod space;
pub mod specs;
pub mod transforms;

pub use num_complex::Complex64;
