use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("point {point:?} is outside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("trajectory left the domain at node {index}")]
    ExitedDomain { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("constraint residual {residual:e} exceeds {limit:e}")]
    Residual { residual: f64, limit: f64 },
    #[error("endpoints do not match: distance {0:e}")]
    EndpointMismatch(f64),
    #[error("junction covector too large: {0:e}")]
    JunctionCovector(f64),
    #[error("elements are not composable: mismatch {0:e}")]
    NotComposable(f64),
    #[error("gauge field does not vanish at the boundary (|beta| = {0:e})")]
    GaugeBoundary(f64),
    #[error("invalid structure constants: {0}")]
    StructureConstants(String),
    #[error("invalid Lie algebra data: {0}")]
    LieAlgebra(String),
    #[error("group element is too close to the cut locus: {0}")]
    CutLocus(String),
    #[error("H(u) = {value:e} <= 0 at node {index}")]
    NonPositiveScale { index: usize, value: f64 },
    #[error("rescaling undefined: C = {c} at node {index}")]
    CriticalStratum { index: usize, c: f64 },
    #[error("radial profile vanishes near R = {0}")]
    VanishingProfile(f64),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Eval(_) => "eval",
            Error::OutsideDomain { .. } => "outside_domain",
            Error::ExitedDomain { .. } => "exited_domain",
            Error::Dimension { .. } => "dimension",
            Error::Grid(_) => "grid",
            Error::Residual { .. } => "residual",
            Error::EndpointMismatch(_) => "endpoint_mismatch",
            Error::JunctionCovector(_) => "junction_covector",
            Error::NotComposable(_) => "not_composable",
            Error::GaugeBoundary(_) => "gauge_boundary",
            Error::StructureConstants(_) => "structure_constants",
            Error::LieAlgebra(_) => "lie_algebra",
            Error::CutLocus(_) => "cut_locus",
            Error::NonPositiveScale { .. } => "non_positive_scale",
            Error::CriticalStratum { .. } => "critical_stratum",
            Error::VanishingProfile(_) => "vanishing_profile",
            Error::Sampling(_) => "sampling",
            Error::Invalid(_) => "invalid",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
