#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod arcs;
pub mod chains;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod periods;
pub mod rational;
pub mod shadow;
pub mod special;
