//! Executable checks of the label-shift analysis: the exact-alignment lower
//! bound, the relaxed construction that achieves zero error, the target-error
//! decomposition and an empirical audit of the target-error bound.

mod audit;
mod decomposition;
pub mod knn;
mod prop;

pub use audit::{audit_bound, theorem_bound, AuditParams, AuditStatus, BoundAudit};
pub use decomposition::{risk_decomposition, LabelEstimate, RiskDecomposition};
pub use prop::{
    min_admissible_beta, prop1_lower_bound, prop2_build_and_check, ratio_bound, AffinePiece, Prop2Construction,
    Prop2Report, EXACT_TOL, SAMPLING_POINTS, SAMPLING_TOL,
};
