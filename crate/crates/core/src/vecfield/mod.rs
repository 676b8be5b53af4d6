//! Vector fields, Lie brackets, derived flags, pointwise rank and reduction modulo a
//! frame, and one- and two-forms.

mod field;
mod flag;
mod forms;
pub mod linalg;

use thiserror::Error;

use crate::scalar::ScalarError;

pub use field::{
    assignment, box_around, box_points, lie_bracket, rank_at, rational_point, reduce_many_symbolic,
    reduce_mod, reduce_mod_symbolic, Frame, Point, Reduction, SymbolicReduction, VectorField,
};
pub use flag::{derived_flag, DistributionFlag};
pub use forms::{
    cauchy_characteristic_at, check_contact, contact_coefficient, exterior_derivative,
    exterior_derivative2, OneForm, TwoForm,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VecFieldError {
    #[error("fields live on different charts")]
    ChartMismatch,
    #[error("expected {expected} components, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("frame of {len} fields has rank {rank} at the base point")]
    DependentFrame { rank: usize, len: usize },
    #[error("contact test needs a 5-dimensional chart, got {0}")]
    NotFiveDimensional(usize),
    #[error("base point must have rational coordinates")]
    NonRationalBase,
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}
