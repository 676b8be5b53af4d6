//! Control systems, abnormal bi-extremals of the constrained Hamiltonian system, their
//! classification, and numeric cross-checks of singular paths against the dual side.

mod duality;
mod extremal;
mod ode;
mod system;

use thiserror::Error;

use crate::conedual::ConeError;
use crate::distduality::DistError;
use crate::scalar::ScalarError;
use crate::vecfield::VecFieldError;

pub use duality::{
    fibre_lift, integrate_flow, leaf_project, singular_path_field, verify_duality,
    verify_duality_batch, DualityOptions, DualityReport, Side, SliceSpec,
};
pub use extremal::{
    annihilating_costate, classify_biextremal, initial_costate, integrate_biextremal, lift_leaf,
    BiExtremalOptions, BiExtremalTrace, Classification, ClassificationReport, CLASSIFY_TOL,
    NEWTON_TOL,
};
pub use ode::{dopri5, dopri_step, integrate_on_grid, StepControl};
pub use system::{hamiltonian, ControlSystem, HamiltonianData};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("Newton iteration on ∂H/∂u = 0 diverged")]
    NewtonDivergence,
    #[error("the constraint Jacobian lost rank")]
    RankDrop,
    #[error("the costate vanished")]
    CostateVanished,
    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("the path is not a graph over the parametrizing coordinate")]
    NotGraph,
    #[error("non-finite value during integration")]
    NonFinite,
    #[error("no slice crossing within the time limit")]
    NoCrossing,
    #[error("the flow is tangent to the slice")]
    Tangential,
    #[error("invalid side `{0}`, expected K or L")]
    InvalidSide(String),
    #[error("{leg} leg failed: {source}")]
    Leg {
        leg: &'static str,
        source: Box<PathError>,
    },
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    VecField(#[from] VecFieldError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}
