//! Fourier-model solvers for the twisted and horocycle-map cohomological
//! equations in irreducible unitary representations of SL(2,R), with
//! numerical checks of their tame and sharp estimates.
//!
//! Functions live on logarithmic grids over `xi` (see [`grid`]); the
//! representation enters only through `nu` in the vector fields of
//! [`operators`].

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod families;
pub mod grid;
pub mod harness;
pub mod operators;
pub mod product;
pub mod record;
pub mod repr;
pub mod sharpness;
pub mod solvers;

pub use error::{Error, Result};
pub use grid::{build_grid, interpolate_at, l2nu_norm, sample, Domain, GridFunction, LogGrid};
pub use operators::{
    apply_field, apply_monomial, commutator_defect, green_v, scale_arg, sobolev_norm, Basis,
    Family, Field, FieldTag, Monomial, SobolevSpec,
};
pub use record::ExperimentRecord;
pub use repr::{classify_series, ReprParams, Series};
