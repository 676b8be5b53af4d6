//! Cone structures C ⊂ TX in normal form over the chart (x, θ): non-degeneracy,
//! Lagrangian and osculating checks, and the pseudo-product structure they induce.

mod checks;
mod family;
mod models;

use thiserror::Error;

use crate::distduality::DistError;
use crate::scalar::ScalarError;
use crate::vecfield::VecFieldError;

pub use checks::{
    check_lagrangian, check_nondegenerate, check_osculating_condition, cone_generator, osculating,
    prolong_cone, solve_u, theta_interval, LagrangianReport, OsculatingConditionReport,
    OsculatingData, SolvedU,
};
pub use family::{theta_half_width, x_half_width, ConeFamily, DirectionField};
pub use models::{
    builtin_model, cubic_a, hilbert_cartan, noncubic_bc, standard_contact_form, x_chart, y_chart,
    Model, BUILTIN_MODELS, THETA,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("cone families live on a 5-dimensional chart, got {0}")]
    Dimension(usize),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("`{name}` must vanish to order {required} at θ = 0, but derivative {found} does not")]
    Order {
        name: String,
        required: u32,
        found: u32,
    },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("osculating bundle of expected rank {expected} has rank {rank}")]
    OsculatingRank { expected: usize, rank: usize },
    #[error("the coefficient of U vanishes near the base point")]
    VanishingCoefficient,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    VecField(#[from] VecFieldError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}
