//! Symbolic and numeric machinery for the duality between (2,3,5)-distributions and
//! non-degenerate Lagrangian cone structures.

pub mod conedual;
pub mod distduality;
pub mod paths;
pub mod scalar;
pub mod vecfield;
