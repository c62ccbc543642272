//! Explicit Heun time stepping with positivity safeguards, adaptive step
//! selection, blow-up screening and equilibrium detection.

use serde::{Deserialize, Serialize};

use crate::diagnostics::monitors::{DiagnosticsRecord, DiagnosticsRecorder, StepLedger};
use crate::error::{Error, Result};
use crate::grid::{pow, raw_integral, Field, Grid};
use crate::model::{eval_source, ModelParams, SimState, Status};
use crate::operators::{max_face_velocity, rhs_with_sources, RhsPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub cfl_safety: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub positivity_floor_v: f64,
    pub blowup_linf_threshold: f64,
    pub equilibrium_tol: f64,
    /// Stop as soon as the equilibrium criterion fires.
    pub stop_on_equilibrium: bool,
    /// Record a diagnostics row every this many accepted steps (output
    /// times and the final state are always recorded).
    pub record_every: u64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl_safety: 0.4,
            dt_min: 1e-10,
            dt_max: 1e-2,
            positivity_floor_v: 1e-12,
            blowup_linf_threshold: 1e6,
            equilibrium_tol: 1e-7,
            stop_on_equilibrium: true,
            record_every: 1,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidControl(msg));
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.dt_min > 0.0 && self.dt_max > 0.0 && self.dt_min <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_max, got {} and {}",
                self.dt_min, self.dt_max
            ));
        }
        if !(self.positivity_floor_v > 0.0) {
            return bad(format!(
                "positivity_floor_v must be > 0, got {}",
                self.positivity_floor_v
            ));
        }
        if !(self.blowup_linf_threshold > 0.0) {
            return bad("blowup_linf_threshold must be > 0".into());
        }
        if !(self.equilibrium_tol >= 0.0) {
            return bad("equilibrium_tol must be >= 0".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        Ok(())
    }
}

/// Largest stable explicit step:
/// `cfl_safety * min(h^2 / (4 D_max), h / (2 W_max), 1 / L)` clamped to
/// `[dt_min, dt_max]`, with `D_max = max((max u + eps)^(m-1), 1)`,
/// `W_max` the largest chemotactic face speed and `L = max(max v, 1)`.
pub fn stable_dt(state: &SimState, params: &ModelParams, ctrl: &StepControl) -> Result<f64> {
    if state.status != Status::Healthy {
        return Err(Error::UnhealthyState(format!("{:?}", state.status)));
    }
    let h = state.grid().min_spacing();
    let d_max = pow(state.u.max() + params.eps, params.m - 1.0).max(1.0);
    let w_max = max_face_velocity(&state.v, params.chi);
    let lambda = state.v.max().max(1.0);
    let mut bound = (h * h / (4.0 * d_max)).min(1.0 / lambda);
    if w_max > 0.0 {
        bound = bound.min(h / (2.0 * w_max));
    }
    let dt = ctrl.cfl_safety * bound;
    if !(dt >= ctrl.dt_min) {
        return Err(Error::DtUnderflow {
            dt,
            dt_min: ctrl.dt_min,
        });
    }
    Ok(dt.min(ctrl.dt_max))
}

/// Accounting for one accepted step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub dt: f64,
    /// `dt/2 * (S(stage 1) + S(stage 2))` with `S = int (-u v + B1)`: the
    /// exact change of `int u` produced by the update before clipping.
    pub source_integral: f64,
    /// Mass added by clipping negative `u` to zero.
    pub clipped_mass: f64,
    /// Largest `|int (du/dt - (-u v + B1))|` over the two stages.
    pub flux_div_defect: f64,
    pub flux_div_scale: f64,
}

impl From<&StepReport> for StepLedger {
    fn from(r: &StepReport) -> Self {
        StepLedger {
            dt: r.dt,
            source_increment: r.source_integral,
            clipped_mass: r.clipped_mass,
            flux_div_defect: r.flux_div_defect,
            flux_div_scale: r.flux_div_scale,
        }
    }
}

/// Source fields `(B1, B2)` at a given time.
pub trait Forcing {
    fn sources(&self, grid: &Grid, t: f64) -> Result<(Field, Field)>;
}

impl Forcing for ModelParams {
    fn sources(&self, grid: &Grid, t: f64) -> Result<(Field, Field)> {
        Ok((eval_source(&self.b1, grid, t)?, eval_source(&self.b2, grid, t)?))
    }
}

struct StageEval {
    rhs: RhsPair,
    source: f64,
    defect: f64,
    scale: f64,
}

fn stage(u: &Field, v: &Field, t: f64, params: &ModelParams, forcing: &dyn Forcing) -> Result<StageEval> {
    let grid = *u.grid();
    let (b1, b2) = forcing.sources(&grid, t)?;
    let rhs = rhs_with_sources(u, v, params, b1.values(), b2.values())?;
    let uv = u.values();
    let vv = v.values();
    let b1v = b1.values();
    let mut src = 0.0;
    let mut src_abs = 0.0;
    for k in 0..grid.len() {
        let s = -uv[k] * vv[k] + b1v[k];
        src += s;
        src_abs += s.abs();
    }
    let du = rhs.du_dt.values();
    let total = raw_integral(&grid, du);
    let du_abs: f64 = du.iter().map(|x| x.abs()).sum();
    let source = src * grid.cell_area();
    Ok(StageEval {
        rhs,
        source,
        defect: total - source,
        scale: (du_abs + src_abs) * grid.cell_area(),
    })
}

/// One Heun step with caller-supplied sources.
pub fn step_with_forcing(
    state: &SimState,
    params: &ModelParams,
    forcing: &dyn Forcing,
    ctrl: &StepControl,
    dt: f64,
) -> Result<(SimState, StepReport)> {
    if state.status != Status::Healthy {
        return Err(Error::UnhealthyState(format!("{:?}", state.status)));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidControl(format!("step size must be > 0, got {dt}")));
    }
    let grid = *state.grid();
    let floor = ctrl.positivity_floor_v;
    let n = grid.len();

    let k1 = stage(&state.u, &state.v, state.t, params, forcing)?;

    let u0 = state.u.values();
    let v0 = state.v.values();
    let mut us = vec![0.0; n];
    let mut vs = vec![0.0; n];
    {
        let (du, dv) = (k1.rhs.du_dt.values(), k1.rhs.dv_dt.values());
        for k in 0..n {
            us[k] = (u0[k] + dt * du[k]).max(0.0);
            vs[k] = (v0[k] + dt * dv[k]).max(floor);
        }
    }
    let us = Field::from_values(grid, us)?;
    let vs = Field::from_values(grid, vs)?;
    let finite_stage = us.is_finite() && vs.is_finite();

    let mut report = StepReport {
        dt,
        ..Default::default()
    };
    let mut next_u = vec![0.0; n];
    let mut next_v = vec![0.0; n];
    let mut clipped = 0.0;
    if finite_stage {
        let k2 = stage(&us, &vs, state.t + dt, params, forcing)?;
        let half = 0.5 * dt;
        let (du1, dv1) = (k1.rhs.du_dt.values(), k1.rhs.dv_dt.values());
        let (du2, dv2) = (k2.rhs.du_dt.values(), k2.rhs.dv_dt.values());
        for k in 0..n {
            let u = u0[k] + half * (du1[k] + du2[k]);
            let v = v0[k] + half * (dv1[k] + dv2[k]);
            if u < 0.0 {
                clipped -= u;
                next_u[k] = 0.0;
            } else {
                next_u[k] = u;
            }
            next_v[k] = v.max(floor);
        }
        report.source_integral = half * (k1.source + k2.source);
        let (d1, d2) = (k1.defect / k1.scale.max(1.0), k2.defect / k2.scale.max(1.0));
        if d1.abs() >= d2.abs() {
            report.flux_div_defect = k1.defect;
            report.flux_div_scale = k1.scale;
        } else {
            report.flux_div_defect = k2.defect;
            report.flux_div_scale = k2.scale;
        }
    } else {
        next_u.fill(f64::NAN);
        next_v.fill(f64::NAN);
    }
    report.clipped_mass = clipped * grid.cell_area();

    let u = Field::from_values(grid, next_u)?;
    let v = Field::from_values(grid, next_v)?;
    let status = if !(u.is_finite() && v.is_finite()) {
        Status::Failed
    } else if u.max_abs() > ctrl.blowup_linf_threshold {
        Status::BlowupSuspected
    } else {
        Status::Healthy
    };
    Ok((
        SimState {
            u,
            v,
            t: state.t + dt,
            step: state.step + 1,
            status,
        },
        report,
    ))
}

/// One Heun (explicit trapezoidal) step followed by the positivity safeguard.
pub fn step(state: &SimState, params: &ModelParams, ctrl: &StepControl, dt: f64) -> Result<(SimState, StepReport)> {
    step_with_forcing(state, params, params, ctrl, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalStatus {
    ReachedT,
    Equilibrated,
    BlowupSuspected,
    Failed,
}

#[derive(Debug, Clone)]
pub struct TimedSnapshot {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<TimedSnapshot>,
    pub diagnostics: DiagnosticsRecord,
    pub final_status: FinalStatus,
    /// Reason for an early stop, if any.
    pub cause: Option<String>,
    pub final_state: SimState,
    /// Largest `linf(u)` over every accepted step.
    pub peak_linf_u: f64,
    /// Relative sup-norm change of u across the most recent completed unit window.
    pub last_window_change: Option<f64>,
}

/// Outcome of [`Simulator::advance_to`].
#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    /// Target time reached; the simulation may continue.
    Reached,
    Stopped(FinalStatus, String),
}

/// Stateful driver: owns the current state, the diagnostics recorder and the
/// equilibrium window.
#[derive(Debug, Clone)]
pub struct Simulator {
    state: SimState,
    params: ModelParams,
    ctrl: StepControl,
    recorder: DiagnosticsRecorder,
    pending: StepLedger,
    steps_since_row: u64,
    window_start: (f64, Vec<f64>),
    last_window_change: Option<f64>,
    peak_linf_u: f64,
    stopped: Option<(FinalStatus, String)>,
}

impl Simulator {
    pub fn new(initial: SimState, params: ModelParams, ctrl: StepControl) -> Result<Self> {
        params.validate()?;
        ctrl.validate()?;
        if initial.status != Status::Healthy {
            return Err(Error::UnhealthyState(format!("{:?}", initial.status)));
        }
        let mut recorder = DiagnosticsRecorder::new();
        recorder.record(&initial, &params, &StepLedger::default())?;
        let window_start = (initial.t, initial.u.values().to_vec());
        let peak_linf_u = initial.u.max_abs();
        Ok(Self {
            state: initial,
            params,
            ctrl,
            recorder,
            pending: StepLedger::default(),
            steps_since_row: 0,
            window_start,
            last_window_change: None,
            peak_linf_u,
            stopped: None,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn diagnostics(&self) -> &DiagnosticsRecord {
        self.recorder.record_ref()
    }

    pub fn peak_linf_u(&self) -> f64 {
        self.peak_linf_u
    }

    pub fn last_window_change(&self) -> Option<f64> {
        self.last_window_change
    }

    pub fn stopped(&self) -> Option<&(FinalStatus, String)> {
        self.stopped.as_ref()
    }

    fn flush_row(&mut self) -> Result<()> {
        if self.steps_since_row == 0 {
            return Ok(());
        }
        self.recorder.record(&self.state, &self.params, &self.pending)?;
        self.pending = StepLedger::default();
        self.steps_since_row = 0;
        Ok(())
    }

    fn stop(&mut self, status: FinalStatus, cause: String) -> Advance {
        self.stopped = Some((status, cause.clone()));
        Advance::Stopped(status, cause)
    }

    /// Advances until `t_target` is hit exactly or the run stops.
    pub fn advance_to(&mut self, t_target: f64) -> Result<Advance> {
        if let Some((s, c)) = &self.stopped {
            return Ok(Advance::Stopped(*s, c.clone()));
        }
        while self.state.t < t_target {
            let dt_stable = match stable_dt(&self.state, &self.params, &self.ctrl) {
                Ok(dt) => dt,
                Err(Error::DtUnderflow { dt, dt_min }) => {
                    self.flush_row()?;
                    return Ok(self.stop(
                        FinalStatus::BlowupSuspected,
                        format!("stable step {dt:e} below dt_min {dt_min:e} at t = {}", self.state.t),
                    ));
                }
                Err(e) => return Err(e),
            };
            let remaining = t_target - self.state.t;
            let hits_target = dt_stable >= remaining * (1.0 - 1e-12);
            let dt = if hits_target { remaining } else { dt_stable };

            let (mut next, report) = match step(&self.state, &self.params, &self.ctrl, dt) {
                Ok(r) => r,
                Err(e) => {
                    self.flush_row()?;
                    return Ok(self.stop(FinalStatus::Failed, e.to_string()));
                }
            };
            if hits_target {
                next.t = t_target;
            }
            self.pending.absorb(&StepLedger::from(&report));
            self.steps_since_row += 1;
            let status = next.status;
            self.state = next;

            if status == Status::Failed {
                return Ok(self.stop(
                    FinalStatus::Failed,
                    format!("non-finite values at t = {}", self.state.t),
                ));
            }
            let linf = self.state.u.max_abs();
            self.peak_linf_u = self.peak_linf_u.max(linf);
            if status == Status::BlowupSuspected {
                self.flush_row()?;
                return Ok(self.stop(
                    FinalStatus::BlowupSuspected,
                    format!(
                        "linf(u) = {linf:e} exceeded {:e} at t = {}",
                        self.ctrl.blowup_linf_threshold, self.state.t
                    ),
                ));
            }

            if hits_target || self.steps_since_row >= self.ctrl.record_every {
                self.flush_row()?;
            }

            if self.state.t - self.window_start.0 >= 1.0 - 1e-12 {
                let diff = self
                    .state
                    .u
                    .values()
                    .iter()
                    .zip(&self.window_start.1)
                    .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                let change = diff / linf.max(1.0);
                self.last_window_change = Some(change);
                self.window_start = (self.state.t, self.state.u.values().to_vec());
                if self.ctrl.stop_on_equilibrium && change < self.ctrl.equilibrium_tol && self.state.t < t_target {
                    self.flush_row()?;
                    return Ok(self.stop(
                        FinalStatus::Equilibrated,
                        format!("relative change {change:e} over a unit window at t = {}", self.state.t),
                    ));
                }
            }
        }
        Ok(Advance::Reached)
    }

    pub fn into_parts(mut self) -> Result<(SimState, DiagnosticsRecord)> {
        self.flush_row()?;
        Ok((self.state, self.recorder.into_record()))
    }
}

pub fn validate_output_times(t_end: f64, output_times: &[f64]) -> Result<()> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidOutputTimes(format!("t_end must be > 0, got {t_end}")));
    }
    for w in output_times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidOutputTimes(format!(
                "times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    if let Some(&t) = output_times.iter().find(|&&t| !(t >= 0.0 && t <= t_end)) {
        return Err(Error::InvalidOutputTimes(format!("{t} outside [0, {t_end}]")));
    }
    Ok(())
}

/// Integrates to `t_end`, capturing snapshots at each of `output_times`.
///
/// Early stops (equilibrium, suspected blow-up, failure) are reported in
/// [`Trajectory::final_status`]; the snapshots taken so far are kept.
pub fn run(
    initial: SimState,
    params: &ModelParams,
    ctrl: &StepControl,
    t_end: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    validate_output_times(t_end, output_times)?;
    let mut sim = Simulator::new(initial, params.clone(), *ctrl)?;
    let mut snapshots = Vec::with_capacity(output_times.len());
    let mut outcome = None;
    let mut targets: Vec<f64> = output_times.to_vec();
    if targets.last().copied() != Some(t_end) {
        targets.push(t_end);
    }
    for &target in &targets {
        match sim.advance_to(target)? {
            Advance::Reached => {
                if output_times.contains(&target) {
                    snapshots.push(TimedSnapshot {
                        t: target,
                        u: sim.state().u.clone(),
                        v: sim.state().v.clone(),
                    });
                }
            }
            Advance::Stopped(status, cause) => {
                outcome = Some((status, cause));
                break;
            }
        }
    }
    let peak_linf_u = sim.peak_linf_u();
    let last_window_change = sim.last_window_change();
    let (final_state, diagnostics) = sim.into_parts()?;
    let (final_status, cause) = match outcome {
        Some((s, c)) => (s, Some(c)),
        None => (FinalStatus::ReachedT, None),
    };
    Ok(Trajectory {
        snapshots,
        diagnostics,
        final_status,
        cause,
        final_state,
        peak_linf_u,
        last_window_change,
    })
}
