use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("division by a jet whose constant term has magnitude {magnitude:e}")]
    DivisionBySingularJet { magnitude: f64 },

    #[error("jet spaces differ: ({left_vars} vars, order {left_order}) vs ({right_vars} vars, order {right_order})")]
    MismatchedJetSpaces {
        left_vars: usize,
        left_order: usize,
        right_vars: usize,
        right_order: usize,
    },

    #[error("pivot variable {var} has linear coefficient {magnitude:e}, below tolerance")]
    SingularPivot { var: usize, magnitude: f64 },

    #[error("jet has nonzero constant term {magnitude:e}; implicit solve needs a zero")]
    NonzeroConstantTerm { magnitude: f64 },

    #[error("parse error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Parse {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("symbol index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("expression is not real-valued (imaginary part {imag:e})")]
    NotRealValued { imag: f64 },

    #[error("w-symbols require a chart carrying dual-map jets")]
    DualSymbolsUnavailable,

    #[error("invalid surface spec {spec:?}: {reason}")]
    InvalidSurfaceSpec { spec: String, reason: String },

    #[error("no complex tangent hyperplane condition fails: |sum z_j drho/dz_j| = {magnitude:e}")]
    NoHitZeroViolated { magnitude: f64 },

    #[error("gradient of the defining function vanishes ({magnitude:e})")]
    DegenerateGradient { magnitude: f64 },

    #[error("point is not on the surface: |rho| = {residual:e}")]
    NotOnSurface { residual: f64 },

    #[error("projection to surface did not converge after {iterations} iterations")]
    ProjectionDiverged { iterations: usize },

    #[error("could not find a coordinate change satisfying the pair-sum condition after {attempts} attempts")]
    RepairFailed { attempts: usize },

    #[error("degenerate frame: constant-term condition number {condition:e}")]
    DegenerateFrame { condition: f64 },

    #[error("dependent equation {row} has residual {residual:e}")]
    ResidualTooLarge { row: String, residual: f64 },

    #[error("dual map derivative on H is degenerate: condition number {condition:e}")]
    DegenerateDual { condition: f64 },

    #[error("graph of the dual map is not totally real: smallest principal angle {angle:e}")]
    NotTotallyReal { angle: f64 },

    #[error("operation requires {requirement}, got n = {n}")]
    Dimension { requirement: &'static str, n: usize },

    #[error("jet order {order} too low, need at least {needed}")]
    OrderTooLow { order: usize, needed: usize },

    #[error("{0}")]
    Usage(String),
}
