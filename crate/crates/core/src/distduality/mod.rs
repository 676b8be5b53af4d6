//! (2,3,5)-distributions, their Cartan prolongation to a pseudo-product structure
//! E = K ⊕ L with growth (2,3,4,5,6), and checks of the defining bracket relations.

mod d235;
mod pseudo;

use thiserror::Error;

use crate::scalar::ScalarError;
use crate::vecfield::VecFieldError;

pub use d235::{
    check_235, prolong_235, solve_e, Check235Report, Distribution235, FiberChart, Prolongation,
    SolvedE, DEFAULT_SAMPLES,
};
pub use pseudo::{
    symbol_algebra_at, verify_pseudo_product, Condition, ConditionResult, ConditionWitness,
    Failure, Line, PseudoProductReport, PseudoProductStructure, SymbolAlgebraReport,
    SymbolRelation, CONDITIONS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("expected a {expected}-dimensional chart, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("generators are dependent at the base point")]
    DependentGenerators,
    #[error("growth vector {got:?}, expected {expected:?}")]
    Growth {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("the coefficient of e vanishes identically at the base point")]
    VanishingCoefficient,
    #[error("e has no closed form on the sample box")]
    NoClosedForm,
    #[error(transparent)]
    VecField(#[from] VecFieldError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}
