//! Numerical laboratory for weakly chaotic interval maps: sensitivity to
//! initial conditions via tube radii, orbit information via compression,
//! and the renewal structure of piecewise-linear Manneville maps.

// Comparisons such as `!(x > 0.0)` are negated on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod codes;
pub mod complexity;
pub mod maps;
pub mod recurrence;
pub mod sensitivity;
pub mod symbolic;
