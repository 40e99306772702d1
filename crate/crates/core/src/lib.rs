//! Digital twin of a monolithic-OPO squeezed-light source.

// `!(x > 0.0)` is how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod apparatus;
pub mod bench;
pub mod config;
pub mod control;
pub mod optics;
pub mod runs;
pub mod search;
pub mod session;
