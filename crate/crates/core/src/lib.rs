//! Bisector line fields of pairs of planar vector fields.
//!
//! A [`ProtoLineField`](fields::ProtoLineField) is a pair `(X, Y)` plus a
//! metric; away from the zeros of either field its bisector is a line field.
//! This crate locates the singularities of that line field, computes their
//! half-integer indices, classifies hyperbolic ones as Lemon, Monstar or Star,
//! checks the classification through a polar blow-up, traces phase portraits
//! and builds the bracket-generated metric of a field pair.

pub mod blowup;
pub mod expr;
pub mod fields;
pub mod index;
pub mod linear;
pub mod metric;
pub mod portrait;
pub mod scan;
pub mod singularity;
