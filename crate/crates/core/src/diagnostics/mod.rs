//! Discrete analogues of the model's a priori bounds: per-step monitors,
//! post-run audits, a grid-refinement blow-up classifier and weak-form
//! residuals.

pub mod audit;
pub mod monitors;
pub mod refinement;
pub mod weak;

pub use audit::{
    boundedness_audit, boundedness_audit_with, mass_ledger_check, min_v_lower_bound_check, BoundednessAudit,
    MassLedger, MinVCheck, MonitorAudit,
};
pub use monitors::{record, DiagnosticsRecord, DiagnosticsRecorder, DiagnosticsRow, COLUMNS};
pub use refinement::{classify_peaks, refinement_blowup_classifier, Classification, RefinementReport};
pub use weak::{weak_residual, CosineBump, TestFunction, WeakResidualReport};
