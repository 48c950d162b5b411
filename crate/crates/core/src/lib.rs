// Negated float comparisons such as `!(x > 0.0)` are deliberate: they also
// reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod rng;
pub mod sensor;
pub mod sh;
pub mod occupancy;
pub mod coverage;
pub mod stats;
pub mod theorem;
pub mod planner;
pub mod bench;
