//! Manufactured-solution convergence suite.
//!
//! Spatial tests prescribe a smooth exact solution on `[0, 1]^2` built from
//! `c(x, y) = cos(pi x) cos(pi y)` (zero normal derivative on the boundary),
//! append the matching source terms and compare the numerical solution with
//! the exact one at `T` on successively halved grids. The temporal test runs
//! the spatially homogeneous reaction system with fixed steps against an RK4
//! reference.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{discrete_norm, pow, Field, Grid, NormKind};
use crate::integrator::{stable_dt, step, step_with_forcing, Forcing, StepControl};
use crate::model::{ModelParams, SimState, DEFAULT_EPS};

pub const TEST_NAMES: [&str; 4] = ["laplacian", "diffusion", "full", "temporal"];

const SPATIAL_GRIDS: [usize; 3] = [16, 32, 64];
const SPATIAL_T: f64 = 0.1;
const TEMPORAL_STEPS: [f64; 3] = [0.1, 0.05, 0.025];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub test: String,
    /// Grid spacing (spatial tests) or step size (temporal test).
    pub resolutions: Vec<f64>,
    /// L2 errors at the final time, one per resolution.
    pub errors: Vec<f64>,
    /// `errors[k] / errors[k + 1]`.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: Option<f64>,
    pub passed: bool,
}

impl ConvergenceReport {
    fn new(test: &str, resolutions: Vec<f64>, errors: Vec<f64>, min_ratio: f64, max_ratio: Option<f64>) -> Self {
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        let passed = ratios
            .iter()
            .all(|&r| r >= min_ratio && max_ratio.is_none_or(|hi| r <= hi));
        Self {
            test: test.to_string(),
            resolutions,
            errors,
            ratios,
            min_ratio,
            max_ratio,
            passed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Case {
    /// `u = 0`, `v = 2 + a(t) c`: exercises the Neumann Laplacian.
    Laplacian,
    /// `u = 1 + a(t) c` with `m = 3`, `chi = 0`, `v = 1`.
    Diffusion,
    /// Both fields varying, `m = 3`, `chi = 1`.
    Full,
}

/// Exact values and derivatives at one point.
struct Exact {
    u: f64,
    v: f64,
    u_t: f64,
    v_t: f64,
    grad_u: (f64, f64),
    grad_v: (f64, f64),
    lap_u: f64,
    lap_v: f64,
}

struct Manufactured {
    case: Case,
    params: ModelParams,
}

impl Manufactured {
    fn new(case: Case) -> Result<Self> {
        let (m, chi) = match case {
            Case::Laplacian => (1.0, 0.0),
            Case::Diffusion => (3.0, 0.0),
            Case::Full => (3.0, 1.0),
        };
        Ok(Self {
            case,
            params: ModelParams::new(m, chi, 0.0, 0.0)?.with_eps(DEFAULT_EPS)?,
        })
    }

    fn exact(&self, x: f64, y: f64, t: f64) -> Exact {
        let (sx, cxv) = (PI * x).sin_cos();
        let (sy, cyv) = (PI * y).sin_cos();
        let c = cxv * cyv;
        let gc = (-PI * sx * cyv, -PI * cxv * sy);
        let lc = -2.0 * PI * PI * c;
        let a = 0.5 * (-t).exp();
        let b = 0.3 * (-2.0 * t).exp();
        let (u0, au, v0, bv, bv_t) = match self.case {
            Case::Laplacian => (0.0, 0.0, 2.0, a, -a),
            Case::Diffusion => (1.0, a, 1.0, 0.0, 0.0),
            Case::Full => (1.0, a, 2.0, b, -2.0 * b),
        };
        Exact {
            u: u0 + au * c,
            v: v0 + bv * c,
            u_t: -au * c,
            v_t: bv_t * c,
            grad_u: (au * gc.0, au * gc.1),
            grad_v: (bv * gc.0, bv * gc.1),
            lap_u: au * lc,
            lap_v: bv * lc,
        }
    }

    /// Sources making the exact solution satisfy the model.
    fn source_at(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let e = self.exact(x, y, t);
        let p = &self.params;
        let ue = e.u + p.eps;
        let d = pow(ue, p.m - 1.0);
        let dd = (p.m - 1.0) * pow(ue, p.m - 2.0);
        let gu2 = e.grad_u.0 * e.grad_u.0 + e.grad_u.1 * e.grad_u.1;
        let gv2 = e.grad_v.0 * e.grad_v.0 + e.grad_v.1 * e.grad_v.1;
        let guv = e.grad_u.0 * e.grad_v.0 + e.grad_u.1 * e.grad_v.1;
        let diffusion = dd * gu2 + d * e.lap_u;
        let taxis = e.u / e.v * e.lap_v + guv / e.v - e.u * gv2 / (e.v * e.v);
        let b1 = e.u_t - diffusion + p.chi * taxis + e.u * e.v;
        let b2 = e.v_t - e.lap_v - e.u * e.v + e.v;
        (b1, b2)
    }

    fn fields(&self, grid: &Grid, t: f64) -> Result<(Field, Field)> {
        let e: Vec<Exact> = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.center(k % grid.nx(), k / grid.nx());
                self.exact(x, y, t)
            })
            .collect();
        Ok((
            Field::from_values(*grid, e.iter().map(|e| e.u).collect())?,
            Field::from_values(*grid, e.iter().map(|e| e.v).collect())?,
        ))
    }
}

impl Forcing for Manufactured {
    fn sources(&self, grid: &Grid, t: f64) -> Result<(Field, Field)> {
        let (b1, b2): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.center(k % grid.nx(), k / grid.nx());
                self.source_at(x, y, t)
            })
            .unzip();
        Ok((Field::from_values(*grid, b1)?, Field::from_values(*grid, b2)?))
    }
}

fn spatial_error(mms: &Manufactured, n: usize, t_end: f64) -> Result<f64> {
    let grid = Grid::new(0.0, 1.0, 0.0, 1.0, n, n)?;
    let (u, v) = mms.fields(&grid, 0.0)?;
    let mut state = SimState::new(u, v)?;
    let ctrl = StepControl::default();
    while state.t < t_end {
        let dt = stable_dt(&state, &mms.params, &ctrl)?.min(t_end - state.t);
        let (next, _) = step_with_forcing(&state, &mms.params, mms, &ctrl, dt)?;
        state = next;
        if t_end - state.t < 1e-14 {
            state.t = t_end;
        }
    }
    let (ue, ve) = mms.fields(&grid, t_end)?;
    let eu = discrete_norm(&state.u.zip_map(&ue, |a, b| a - b)?, NormKind::Lp(2.0))?;
    let ev = discrete_norm(&state.v.zip_map(&ve, |a, b| a - b)?, NormKind::Lp(2.0))?;
    Ok(eu.hypot(ev))
}

fn spatial(name: &str, case: Case, grids: &[usize], t_end: f64) -> Result<ConvergenceReport> {
    let mms = Manufactured::new(case)?;
    let errors = grids
        .iter()
        .map(|&n| spatial_error(&mms, n, t_end))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = match case {
        Case::Full => (1.7, None),
        _ => (3.2, Some(4.8)),
    };
    let h = grids.iter().map(|&n| 1.0 / n as f64).collect();
    Ok(ConvergenceReport::new(name, h, errors, lo, hi))
}

fn reaction_rhs(p: &ModelParams, u: f64, v: f64) -> (f64, f64) {
    let b1 = p.b1.as_constant().unwrap_or(0.0);
    let b2 = p.b2.as_constant().unwrap_or(0.0);
    (-u * v + b1, u * v - v + b2)
}

/// Classical RK4 reference for the homogeneous system.
fn rk4_reference(p: &ModelParams, (u0, v0): (f64, f64), t_end: f64, n: usize) -> (f64, f64) {
    let h = t_end / n as f64;
    let (mut u, mut v) = (u0, v0);
    for _ in 0..n {
        let k1 = reaction_rhs(p, u, v);
        let k2 = reaction_rhs(p, u + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
        let k3 = reaction_rhs(p, u + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
        let k4 = reaction_rhs(p, u + h * k3.0, v + h * k3.1);
        u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (u, v)
}

fn temporal(steps: &[f64]) -> Result<ConvergenceReport> {
    let params = ModelParams::new(3.0, 10.0, 1.0, 1.0)?;
    let init = (1.5, 0.5);
    let t_end = 1.0;
    let reference = rk4_reference(&params, init, t_end, 100_000);
    let grid = Grid::square(4)?;
    let ctrl = StepControl::default();
    let errors = steps
        .iter()
        .map(|&dt| {
            let n = (t_end / dt).round() as usize;
            let mut state = SimState::uniform(grid, init.0, init.1)?;
            for _ in 0..n {
                state = step(&state, &params, &ctrl, dt)?.0;
            }
            Ok((state.u.values()[0] - reference.0).hypot(state.v.values()[0] - reference.1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(
        "temporal",
        steps.to_vec(),
        errors,
        3.0,
        Some(5.0),
    ))
}

/// Runs one named test of [`TEST_NAMES`] at its default resolutions.
pub fn convergence_test(name: &str) -> Result<ConvergenceReport> {
    match name {
        "temporal" => temporal(&TEMPORAL_STEPS),
        _ => convergence_test_on(name, &SPATIAL_GRIDS, SPATIAL_T),
    }
}

/// A spatial test on caller-chosen grids and final time.
pub fn convergence_test_on(name: &str, grids: &[usize], t_end: f64) -> Result<ConvergenceReport> {
    let case = match name {
        "laplacian" => Case::Laplacian,
        "diffusion" => Case::Diffusion,
        "full" => Case::Full,
        "temporal" => return temporal(&TEMPORAL_STEPS),
        other => return Err(Error::UnknownTest(other.to_string())),
    };
    spatial(name, case, grids, t_end)
}
