//! Model parameters, source terms, initial data and the homogeneous
//! equilibrium of the reaction system.
//!
//! The criminal density `u` and the attractiveness `v` evolve by
//!
//! ```text
//! u_t = div((u + eps)^(m-1) grad u) - chi div((u / v) grad v) - u v + B1(x, t)
//! v_t = lap v + R(u, v) - v + B2(x, t)
//! ```
//!
//! with `R = u v`, or `u v / (1 + eps u v)` when the saturated reaction is
//! switched on, under zero-flux boundary conditions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Lower clamp applied to sampled initial attractiveness.
pub const V0_FLOOR: f64 = 1e-12;

pub const DEFAULT_EPS: f64 = 1e-6;

type SourceFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// Nonnegative source `B(x, y, t)`.
#[derive(Clone)]
pub enum SourceTerm {
    Constant(f64),
    TimeSpace(Arc<SourceFn>),
}

impl SourceTerm {
    pub fn time_space(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SourceTerm::TimeSpace(Arc::new(f))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            SourceTerm::Constant(c) => Some(*c),
            SourceTerm::TimeSpace(_) => None,
        }
    }

    #[inline]
    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            SourceTerm::Constant(c) => *c,
            SourceTerm::TimeSpace(f) => f(x, y, t),
        }
    }
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTerm::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            SourceTerm::TimeSpace(_) => f.write_str("TimeSpace(<fn>)"),
        }
    }
}

/// Evaluates `s` at every cell center at time `t`.
pub fn eval_source(s: &SourceTerm, grid: &Grid, t: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParams {
            field: "t",
            reason: format!("source evaluated at negative time {t}"),
        });
    }
    match s {
        SourceTerm::Constant(c) => {
            if !(*c >= 0.0) || !c.is_finite() {
                return Err(Error::NegativeSource {
                    value: *c,
                    x: f64::NAN,
                    y: f64::NAN,
                    t,
                });
            }
            Ok(Field::constant(*grid, *c))
        }
        SourceTerm::TimeSpace(f) => {
            let field = Field::from_fn(*grid, |x, y| f(x, y, t));
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    let value = field.at(i, j);
                    if !(value >= 0.0) || !value.is_finite() {
                        let (x, y) = grid.center(i, j);
                        return Err(Error::NegativeSource { value, x, y, t });
                    }
                }
            }
            Ok(field)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Diffusion exponent, `m >= 1`.
    pub m: f64,
    /// Advection strength toward high attractiveness.
    pub chi: f64,
    /// Regularization of the diffusion coefficient and the saturated reaction.
    pub eps: f64,
    pub b1: SourceTerm,
    pub b2: SourceTerm,
    /// Use `u v / (1 + eps u v)` as the production term of `v`.
    pub regularized_reaction: bool,
    /// Permit `eps = 0` with `m > 1`.
    pub allow_degenerate: bool,
}

impl ModelParams {
    /// Constant sources, default `eps`, unsaturated reaction.
    pub fn new(m: f64, chi: f64, b1: f64, b2: f64) -> Result<Self> {
        let p = Self {
            m,
            chi,
            eps: DEFAULT_EPS,
            b1: SourceTerm::Constant(b1),
            b2: SourceTerm::Constant(b2),
            regularized_reaction: false,
            allow_degenerate: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        self.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 1.0) || !self.m.is_finite() {
            return Err(Error::InvalidParams {
                field: "m",
                reason: format!("diffusion exponent must be >= 1, got {}", self.m),
            });
        }
        // chi = 0 is accepted: it switches the advection off (diffusion-only runs).
        if !(self.chi >= 0.0) || !self.chi.is_finite() {
            return Err(Error::InvalidParams {
                field: "chi",
                reason: format!("must be finite and >= 0, got {}", self.chi),
            });
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParams {
                field: "eps",
                reason: format!("must be finite and >= 0, got {}", self.eps),
            });
        }
        if self.m > 1.0 && self.eps == 0.0 && !self.allow_degenerate {
            return Err(Error::InvalidParams {
                field: "eps",
                reason: format!("m = {} > 1 needs eps > 0 unless allow_degenerate is set", self.m),
            });
        }
        for (name, s) in [("b1", &self.b1), ("b2", &self.b2)] {
            if let Some(c) = s.as_constant() {
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::InvalidParams {
                        field: name,
                        reason: format!("constant source must be finite and >= 0, got {c}"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Status {
    Healthy,
    BlowupSuspected,
    Failed,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub u: Field,
    pub v: Field,
    pub t: f64,
    pub step: u64,
    pub status: Status,
}

impl SimState {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        u.check_same_grid(&v)?;
        u.check_finite()?;
        v.check_finite()?;
        if let Some((cell, &value)) = u.values().iter().enumerate().find(|(_, x)| **x < 0.0) {
            return Err(Error::NegativeDensity { value, cell });
        }
        if let Some((cell, &value)) = v.values().iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
            return Err(Error::NonPositiveV { value, cell });
        }
        Ok(Self {
            u,
            v,
            t: 0.0,
            step: 0,
            status: Status::Healthy,
        })
    }

    /// `u0 = v0 = gaussian(sigma)` with `v0` clamped below at [`V0_FLOOR`].
    pub fn gaussian(grid: Grid, sigma: f64) -> Result<Self> {
        let u = gaussian_ic(&grid, sigma)?;
        let v = u.map(|x| x.max(V0_FLOOR));
        Self::new(u, v)
    }

    pub fn uniform(grid: Grid, u: f64, v: f64) -> Result<Self> {
        Self::new(Field::constant(grid, u), Field::constant(grid, v))
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

/// Radially symmetric gaussian `(2 pi sigma^2)^(-1/2) exp(-|x|^2 / (2 sigma^2))`.
pub fn gaussian_ic(grid: &Grid, sigma: f64) -> Result<Field> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    let s2 = sigma * sigma;
    let amp = 1.0 / (2.0 * std::f64::consts::PI * s2).sqrt();
    Ok(Field::from_fn(*grid, |x, y| {
        amp * (-(x * x + y * y) / (2.0 * s2)).exp()
    }))
}

/// Spatially uniform fixed point `(u*, v*)` of the reaction system with
/// constant sources: `u* v* = b1`, `v* = b1 + b2`.
pub fn homogeneous_steady_state(params: &ModelParams) -> Result<(f64, f64)> {
    let (Some(b1), Some(b2)) = (params.b1.as_constant(), params.b2.as_constant()) else {
        return Err(Error::NoSteadyState("sources must be constant".into()));
    };
    if params.regularized_reaction {
        return Err(Error::NoSteadyState(
            "closed form only holds for the unsaturated reaction".into(),
        ));
    }
    if !(b1 >= 0.0 && b2 >= 0.0) {
        return Err(Error::NoSteadyState("sources must be nonnegative".into()));
    }
    let v = b1 + b2;
    if v <= 0.0 {
        return Err(Error::NoSteadyState("b1 + b2 = 0 drives v to zero".into()));
    }
    Ok((b1 / v, v))
}
