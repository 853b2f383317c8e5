// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod ed;
pub mod error;
pub mod io;
pub mod lattice;
pub mod phase;
pub mod qmc;
pub mod quench;
