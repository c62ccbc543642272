//! Post-run audits over a diagnostics record.

use serde::Serialize;

use super::monitors::{DiagnosticsRecord, DiagnosticsRow};
use crate::error::{Error, Result};

pub const MIN_AUDIT_ROWS: usize = 20;
pub const DEFAULT_PLATEAU_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinVCheck {
    pub passed: bool,
    /// Smallest `min_v(t) / (v0_min e^{-t})` over all rows.
    pub worst_ratio: f64,
    pub worst_t: f64,
}

/// Checks `min_v(t) >= v0_min e^{-t} (1 - 1e-6) - 1e-10` on every row.
pub fn min_v_lower_bound_check(rec: &DiagnosticsRecord, v0_min: f64) -> Result<MinVCheck> {
    if rec.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let mut passed = true;
    let mut worst_ratio = f64::INFINITY;
    let mut worst_t = 0.0;
    for row in &rec.rows {
        let bound = v0_min * (-row.t).exp();
        if row.min_v < bound * (1.0 - 1e-6) - 1e-10 {
            passed = false;
        }
        let ratio = row.min_v / bound;
        if ratio < worst_ratio {
            worst_ratio = ratio;
            worst_t = row.t;
        }
    }
    Ok(MinVCheck {
        passed,
        worst_ratio,
        worst_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorAudit {
    pub name: &'static str,
    pub sup: f64,
    pub middle_half_sup: f64,
    pub last_quarter_sup: f64,
    pub plateaued: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessAudit {
    /// `m > 3/2`, the regime where the monitors are expected to stay bounded.
    pub in_bounded_regime: bool,
    pub plateau_factor: f64,
    pub monitors: Vec<MonitorAudit>,
}

impl BoundednessAudit {
    pub fn all_plateaued(&self) -> bool {
        self.monitors.iter().all(|m| m.plateaued)
    }

    pub fn monitor(&self, name: &str) -> Option<&MonitorAudit> {
        self.monitors.iter().find(|m| m.name == name)
    }
}

type Extractor = (&'static str, fn(&DiagnosticsRow) -> f64);

/// Sup of `linf_u`, `w1q_v_2m1`, `i_u`, `i_v` and a plateau test per monitor:
/// the sup over the last quarter of the time span must not exceed
/// `plateau_factor` times the sup over the middle half.
pub fn boundedness_audit(rec: &DiagnosticsRecord, m: f64) -> Result<BoundednessAudit> {
    boundedness_audit_with(rec, m, DEFAULT_PLATEAU_FACTOR)
}

pub fn boundedness_audit_with(rec: &DiagnosticsRecord, m: f64, plateau_factor: f64) -> Result<BoundednessAudit> {
    if rec.len() < MIN_AUDIT_ROWS {
        return Err(Error::InsufficientRows {
            rows: rec.len(),
            needed: MIN_AUDIT_ROWS,
        });
    }
    let t0 = rec.rows[0].t;
    let t1 = rec.rows[rec.len() - 1].t;
    let span = t1 - t0;
    let (mid_lo, mid_hi, last_lo) = (t0 + 0.25 * span, t0 + 0.75 * span, t0 + 0.75 * span);

    let extractors: [Extractor; 4] = [
        ("linf_u", |r| r.linf_u),
        ("w1q_v_2m1", |r| r.w1q_v_2m1),
        ("i_u", |r| r.i_u),
        ("i_v", |r| r.i_v),
    ];
    let monitors = extractors
        .iter()
        .map(|&(name, f)| {
            let mut sup = f64::NEG_INFINITY;
            let mut mid = f64::NEG_INFINITY;
            let mut last = f64::NEG_INFINITY;
            for row in &rec.rows {
                let x = f(row);
                sup = sup.max(x);
                if row.t >= mid_lo && row.t <= mid_hi {
                    mid = mid.max(x);
                }
                if row.t >= last_lo {
                    last = last.max(x);
                }
            }
            MonitorAudit {
                name,
                sup,
                middle_half_sup: mid,
                last_quarter_sup: last,
                plateaued: sup.is_finite() && last <= plateau_factor * mid,
            }
        })
        .collect();
    Ok(BoundednessAudit {
        in_bounded_regime: m > 1.5,
        plateau_factor,
        monitors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassLedger {
    /// `sum |delta mass_u - source_increment - clipped|` over consecutive rows.
    pub cumulative_defect: f64,
    pub clipped_mass: f64,
    pub initial_mass: f64,
    /// Largest relative flux-divergence integral seen.
    pub worst_flux_div: f64,
}

impl MassLedger {
    /// `cumulative_defect <= rel_tol * initial_mass + clipped_mass`.
    pub fn closes(&self, rel_tol: f64) -> bool {
        self.cumulative_defect <= rel_tol * self.initial_mass + self.clipped_mass
    }
}

/// Audits the discrete balance `d/dt int u = int (-u v + B1)` row by row.
pub fn mass_ledger_check(rec: &DiagnosticsRecord) -> Result<MassLedger> {
    if rec.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let mut cumulative_defect = 0.0;
    let mut worst_flux_div: f64 = 0.0;
    for w in rec.rows.windows(2) {
        let clipped = w[1].clipped_mass_cumulative - w[0].clipped_mass_cumulative;
        cumulative_defect += (w[1].mass_u - w[0].mass_u - w[1].source_increment - clipped).abs();
        worst_flux_div = worst_flux_div.max(w[1].flux_div_defect.abs() / w[1].flux_div_scale.max(1.0));
    }
    let last = rec.rows.last().expect("record is nonempty");
    Ok(MassLedger {
        cumulative_defect,
        clipped_mass: last.clipped_mass_cumulative,
        initial_mass: rec.rows[0].mass_u,
        worst_flux_div,
    })
}
