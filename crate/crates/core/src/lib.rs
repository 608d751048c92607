//! Pseudospectral laboratory for the periodic two-component μ-Hunter-Saxton
//! system: spectral primitives, Littlewood-Paley analysis, the evolution
//! itself, characteristics of the velocity field and a Picard scheme built
//! on transport solves.
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod characteristics;
pub mod dynamics;
pub mod picard;
pub mod spectral;
