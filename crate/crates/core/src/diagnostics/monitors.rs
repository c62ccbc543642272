//! Per-step monitor rows and the recorder that fills them.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pow, Grid};
use crate::model::{ModelParams, SimState};

/// Exponent of the attractiveness weight `v^(p-2)` in the gradient monitor.
pub const GRADIENT_WEIGHT_P: f64 = 0.5;

/// Fixed CSV column order.
pub const COLUMNS: [&str; 16] = [
    "t",
    "step",
    "dt",
    "mass_u",
    "mass_v",
    "min_v",
    "linf_u",
    "w1q_v_3",
    "w1q_v_2m1",
    "concentration_index",
    "clipped_mass_cumulative",
    "i_v",
    "i_u",
    "source_increment",
    "flux_div_defect",
    "flux_div_scale",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub step: u64,
    /// Length of the last accepted step (0 on the initial row).
    pub dt: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub min_v: f64,
    pub linf_u: f64,
    pub w1q_v_3: f64,
    /// W^{1,q} norm of v with q = 2m - 1.
    pub w1q_v_2m1: f64,
    /// `linf_u / (mass_u / |domain|)`; 0 when u vanishes identically.
    pub concentration_index: f64,
    pub clipped_mass_cumulative: f64,
    /// Trailing unit-window integral of `int v^(p-2) |grad v|^2`, p = 1/2.
    pub i_v: f64,
    /// Trailing unit-window integral of `int u^(2m-1)`.
    pub i_u: f64,
    /// Time-integrated `int (-u v + B1)` accumulated by the scheme since the
    /// previous row.
    pub source_increment: f64,
    /// Largest `|int div F|` over the stages since the previous row.
    pub flux_div_defect: f64,
    /// Magnitude scale the defect is measured against.
    pub flux_div_scale: f64,
}

impl DiagnosticsRow {
    pub fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.step as f64,
            self.dt,
            self.mass_u,
            self.mass_v,
            self.min_v,
            self.linf_u,
            self.w1q_v_3,
            self.w1q_v_2m1,
            self.concentration_index,
            self.clipped_mass_cumulative,
            self.i_v,
            self.i_u,
            self.source_increment,
            self.flux_div_defect,
            self.flux_div_scale,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&DiagnosticsRow> {
        self.rows.last()
    }

    pub fn column(&self, f: impl Fn(&DiagnosticsRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn peak_linf_u(&self) -> f64 {
        self.rows.iter().fold(0.0, |a, r| a.max(r.linf_u))
    }
}

/// Integral of a sampled signal over the trailing window `[t - width, t]`,
/// trapezoid rule with linear interpolation at the window edge.
#[derive(Debug, Clone)]
pub struct TrailingIntegral {
    width: f64,
    // (t_start, f_start, t_end, f_end)
    segments: VecDeque<(f64, f64, f64, f64)>,
    full_sum: f64,
    last: Option<(f64, f64)>,
    pushes: u64,
}

impl TrailingIntegral {
    pub fn new(width: f64) -> Self {
        Self {
            width,
            segments: VecDeque::new(),
            full_sum: 0.0,
            last: None,
            pushes: 0,
        }
    }

    pub fn push(&mut self, t: f64, f: f64) -> f64 {
        if let Some((t0, f0)) = self.last {
            if t > t0 {
                self.segments.push_back((t0, f0, t, f));
                self.full_sum += 0.5 * (f0 + f) * (t - t0);
            }
        }
        self.last = Some((t, f));
        let left = t - self.width;
        while let Some(&(a, fa, b, fb)) = self.segments.front() {
            if b <= left {
                self.full_sum -= 0.5 * (fa + fb) * (b - a);
                self.segments.pop_front();
            } else {
                break;
            }
        }
        // drift from repeated add/subtract is removed by re-summing the window
        self.pushes += 1;
        if self.pushes.is_multiple_of(4096) {
            self.full_sum = self
                .segments
                .iter()
                .map(|&(a, fa, b, fb)| 0.5 * (fa + fb) * (b - a))
                .sum();
        }
        self.value_at(left)
    }

    fn value_at(&self, left: f64) -> f64 {
        match self.segments.front() {
            Some(&(a, fa, b, fb)) if a < left => {
                let s = (left - a) / (b - a);
                let f_left = fa + s * (fb - fa);
                let cut = 0.5 * (fa + f_left) * (left - a);
                self.full_sum - cut
            }
            _ => self.full_sum,
        }
    }
}

/// Instantaneous integrands computed in a single pass over the grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Snapshot {
    pub mass_u: f64,
    pub mass_v: f64,
    pub min_v: f64,
    pub linf_u: f64,
    pub w1q_v_3: f64,
    pub w1q_v_2m1: f64,
    pub grad_weighted: f64,
    pub u_power: f64,
}

pub(crate) fn measure(state: &SimState, m: f64) -> Snapshot {
    let grid: &Grid = state.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let area = grid.cell_area();
    let (ihx, ihy) = (0.5 / grid.hx(), 0.5 / grid.hy());
    let u = state.u.values();
    let v = state.v.values();
    let q = 2.0 * m - 1.0;
    let wexp = GRADIENT_WEIGHT_P - 2.0;

    let (mut su, mut sv, mut s3, mut sq, mut sgw, mut sup) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut min_v = f64::INFINITY;
    let mut linf_u: f64 = 0.0;
    for j in 0..ny {
        let jm = if j == 0 { 0 } else { j - 1 };
        let jp = if j + 1 == ny { j } else { j + 1 };
        for i in 0..nx {
            let im = if i == 0 { 0 } else { i - 1 };
            let ip = if i + 1 == nx { i } else { i + 1 };
            let k = i + nx * j;
            let (uk, vk) = (u[k], v[k]);
            let gx = (v[ip + nx * j] - v[im + nx * j]) * ihx;
            let gy = (v[i + nx * jp] - v[i + nx * jm]) * ihy;
            let g2 = gx * gx + gy * gy;
            let g = g2.sqrt();
            let va = vk.abs();
            su += uk;
            sv += vk;
            min_v = min_v.min(vk);
            linf_u = linf_u.max(uk.abs());
            s3 += va * va * va + g2 * g;
            sq += pow(va, q) + pow(g, q);
            sgw += pow(vk, wexp) * g2;
            sup += pow(uk.abs(), q);
        }
    }
    Snapshot {
        mass_u: su * area,
        mass_v: sv * area,
        min_v,
        linf_u,
        w1q_v_3: (s3 * area).cbrt(),
        w1q_v_2m1: (sq * area).powf(1.0 / q),
        grad_weighted: sgw * area,
        u_power: sup * area,
    }
}

/// What the integrator accumulated between two recorded rows.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepLedger {
    pub dt: f64,
    pub source_increment: f64,
    pub clipped_mass: f64,
    pub flux_div_defect: f64,
    pub flux_div_scale: f64,
}

impl StepLedger {
    pub fn absorb(&mut self, other: &StepLedger) {
        self.dt = other.dt;
        self.source_increment += other.source_increment;
        self.clipped_mass += other.clipped_mass;
        if other.flux_div_defect.abs() / other.flux_div_scale.max(1.0)
            >= self.flux_div_defect.abs() / self.flux_div_scale.max(1.0)
        {
            self.flux_div_defect = other.flux_div_defect;
            self.flux_div_scale = other.flux_div_scale;
        }
    }
}

/// Appends monitor rows and advances the trailing-window accumulators.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecorder {
    record: DiagnosticsRecord,
    i_v: TrailingIntegral,
    i_u: TrailingIntegral,
    clipped_total: f64,
}

impl Default for DiagnosticsRecorder {
    fn default() -> Self {
        Self::new()
    }
}

impl DiagnosticsRecorder {
    pub fn new() -> Self {
        Self {
            record: DiagnosticsRecord::new(),
            i_v: TrailingIntegral::new(1.0),
            i_u: TrailingIntegral::new(1.0),
            clipped_total: 0.0,
        }
    }

    pub fn record(&mut self, state: &SimState, params: &ModelParams, ledger: &StepLedger) -> Result<&DiagnosticsRow> {
        let snap = measure(state, params.m);
        self.clipped_total += ledger.clipped_mass;
        let area = state.grid().area();
        let concentration_index = if snap.mass_u > 0.0 {
            snap.linf_u / (snap.mass_u / area)
        } else {
            0.0
        };
        let row = DiagnosticsRow {
            t: state.t,
            step: state.step,
            dt: ledger.dt,
            mass_u: snap.mass_u,
            mass_v: snap.mass_v,
            min_v: snap.min_v,
            linf_u: snap.linf_u,
            w1q_v_3: snap.w1q_v_3,
            w1q_v_2m1: snap.w1q_v_2m1,
            concentration_index,
            clipped_mass_cumulative: self.clipped_total,
            i_v: self.i_v.push(state.t, snap.grad_weighted),
            i_u: self.i_u.push(state.t, snap.u_power),
            source_increment: ledger.source_increment,
            flux_div_defect: ledger.flux_div_defect,
            flux_div_scale: ledger.flux_div_scale,
        };
        if !row.is_finite() {
            let first = row.values().iter().position(|x| !x.is_finite()).unwrap_or(0);
            return Err(Error::NonFiniteField { count: 1, first });
        }
        self.record.rows.push(row);
        Ok(self.record.rows.last().expect("row was just pushed"))
    }

    pub fn record_ref(&self) -> &DiagnosticsRecord {
        &self.record
    }

    pub fn into_record(self) -> DiagnosticsRecord {
        self.record
    }
}

/// Free-function form of [`DiagnosticsRecorder::record`].
pub fn record(state: &SimState, params: &ModelParams, recorder: &mut DiagnosticsRecorder) -> Result<DiagnosticsRow> {
    recorder.record(state, params, &StepLedger::default()).copied()
}
