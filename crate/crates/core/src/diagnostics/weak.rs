//! Weak-form residuals of a computed trajectory.
//!
//! For a test function `phi` with zero normal derivative the `u` identity
//! reads
//!
//! ```text
//! -int int u phi_t - int u0 phi(., 0)
//!     = -int int D(u) grad u . grad phi + chi int int (u/v) grad v . grad phi
//!       - int int u v phi + int int B1 phi
//! ```
//!
//! and the `v` identity
//!
//! ```text
//! -int int v phi_t - int v0 phi(., 0)
//!     = -int int grad v . grad phi - int int v phi + int int u v phi + int int B2 phi.
//! ```
//!
//! Diffusive and chemotactic terms are evaluated with the scheme's own face
//! fluxes paired with the exact gradient of `phi` at face centers. Space
//! uses midpoint quadrature, time the trapezoid rule over the snapshots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrator::{TimedSnapshot, Trajectory};
use crate::model::ModelParams;
use crate::operators::{advection_fluxes, diffusion_fluxes};

/// Minimum number of snapshots inside the time support.
pub const MIN_SNAPSHOTS_IN_SUPPORT: usize = 20;

pub trait TestFunction {
    fn id(&self) -> String;
    fn value(&self, x: f64, y: f64, t: f64) -> f64;
    fn grad(&self, x: f64, y: f64, t: f64) -> (f64, f64);
    fn time_derivative(&self, x: f64, y: f64, t: f64) -> f64;
    /// Closed time interval outside which the function vanishes.
    fn support(&self) -> (f64, f64);
}

/// `A cos(kx pi (x - x0) / Lx) cos(ky pi (y - y0) / Ly) psi(t)` with a
/// smooth compactly supported bump `psi` centered at `t_center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosineBump {
    pub kx: u32,
    pub ky: u32,
    pub amplitude: f64,
    pub t_center: f64,
    pub t_half_width: f64,
    pub bounds: (f64, f64, f64, f64),
}

impl CosineBump {
    pub fn new(grid: &Grid, kx: u32, ky: u32, amplitude: f64, t_center: f64, t_half_width: f64) -> Self {
        Self {
            kx,
            ky,
            amplitude,
            t_center,
            t_half_width,
            bounds: grid.bounds(),
        }
    }

    /// Reproducible family with even modes `0, 2, 4` and time supports
    /// inside `window`. Odd modes are antisymmetric about the midline and
    /// integrate to zero against mirror-symmetric solutions.
    pub fn seeded_family(seed: u64, count: usize, grid: &Grid, window: (f64, f64)) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = window.1 - window.0;
        (0..count)
            .map(|_| {
                let kx = 2 * rng.gen_range(0..=2);
                let ky = 2 * rng.gen_range(0..=2);
                let amplitude = rng.gen_range(0.5..1.5);
                let half = len * rng.gen_range(0.3..0.45);
                let center = rng.gen_range(window.0 + half..=window.1 - half);
                Self::new(grid, kx, ky, amplitude, center, half)
            })
            .collect()
    }

    fn bump(&self, t: f64) -> (f64, f64) {
        let s = (t - self.t_center) / self.t_half_width;
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let d = 1.0 - s * s;
        let psi = (1.0 - 1.0 / d).exp();
        let dpsi = psi * (-2.0 * s / (d * d)) / self.t_half_width;
        (psi, dpsi)
    }

    fn spatial(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (x0, x1, y0, y1) = self.bounds;
        let ax = self.kx as f64 * std::f64::consts::PI / (x1 - x0);
        let ay = self.ky as f64 * std::f64::consts::PI / (y1 - y0);
        let (sx, cx) = (ax * (x - x0)).sin_cos();
        let (sy, cy) = (ay * (y - y0)).sin_cos();
        (cx * cy, -ax * sx * cy, -ay * cx * sy)
    }
}

impl TestFunction for CosineBump {
    fn id(&self) -> String {
        format!(
            "cos({},{})*bump({:.4},{:.4})*{:.4}",
            self.kx, self.ky, self.t_center, self.t_half_width, self.amplitude
        )
    }

    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.amplitude * self.spatial(x, y).0 * self.bump(t).0
    }

    fn grad(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let (_, gx, gy) = self.spatial(x, y);
        let psi = self.amplitude * self.bump(t).0;
        (gx * psi, gy * psi)
    }

    fn time_derivative(&self, x: f64, y: f64, t: f64) -> f64 {
        self.amplitude * self.spatial(x, y).0 * self.bump(t).1
    }

    fn support(&self) -> (f64, f64) {
        (self.t_center - self.t_half_width, self.t_center + self.t_half_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidualReport {
    pub test_function_id: String,
    pub residual_u: f64,
    pub residual_v: f64,
    /// Magnitude of the largest term in each identity, for scale.
    pub scale_u: f64,
    pub scale_v: f64,
    pub nx: usize,
    pub ny: usize,
    pub snapshots_in_support: usize,
}

/// Rejects test functions whose normal derivative does not vanish on the
/// boundary of the rectangle.
fn check_neumann(phi: &dyn TestFunction, grid: &Grid) -> Result<()> {
    let (x0, x1, y0, y1) = grid.bounds();
    let (a, b) = phi.support();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..=8 {
        let t = a + (b - a) * k as f64 / 8.0;
        for i in 0..grid.nx() {
            let x = grid.x_center(i);
            worst = worst.max(phi.grad(x, y0, t).1.abs()).max(phi.grad(x, y1, t).1.abs());
            scale = scale.max(phi.grad(x, grid.y_center(grid.ny() / 2), t).0.abs());
        }
        for j in 0..grid.ny() {
            let y = grid.y_center(j);
            worst = worst.max(phi.grad(x0, y, t).0.abs()).max(phi.grad(x1, y, t).0.abs());
            scale = scale.max(phi.grad(grid.x_center(grid.nx() / 2), y, t).1.abs());
        }
    }
    if worst > 1e-10 * scale.max(1.0) {
        return Err(Error::UnsupportedTestFunction(format!(
            "{}: normal derivative {worst:e} on the boundary",
            phi.id()
        )));
    }
    Ok(())
}

struct Integrands {
    u_dt: f64,
    diffusion: f64,
    chemotaxis: f64,
    reaction_u: f64,
    v_dt: f64,
    v_diffusion: f64,
    reaction_v: f64,
}

fn integrands(snap: &TimedSnapshot, params: &ModelParams, phi: &dyn TestFunction) -> Result<Integrands> {
    let grid = *snap.u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let area = grid.cell_area();
    let t = snap.t;
    let u = snap.u.values();
    let v = snap.v.values();

    let (mut u_dt, mut reaction_u, mut v_dt, mut reaction_v) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            let (x, y) = grid.center(i, j);
            let p = phi.value(x, y, t);
            let pt = phi.time_derivative(x, y, t);
            let prod = u[k] * v[k];
            let production = if params.regularized_reaction {
                prod / (1.0 + params.eps * prod)
            } else {
                prod
            };
            u_dt += u[k] * pt;
            v_dt += v[k] * pt;
            reaction_u += (-prod + params.b1.value(x, y, t)) * p;
            reaction_v += (production - v[k] + params.b2.value(x, y, t)) * p;
        }
    }

    let dfl = diffusion_fluxes(&snap.u, params.m, params.eps)?;
    let (afl, _) = advection_fluxes(&snap.u, &snap.v, params.chi)?;
    let vfl = diffusion_fluxes(&snap.v, 1.0, 0.0)?;
    let (mut diffusion, mut chemotaxis, mut v_diffusion) = (0.0, 0.0, 0.0);
    for j in 0..ny {
        let y = grid.y_center(j);
        for i in 0..nx - 1 {
            let x = grid.x_center(i) + 0.5 * grid.hx();
            let gx = phi.grad(x, y, t).0;
            let f = i + (nx - 1) * j;
            diffusion += dfl.x[f] * gx;
            chemotaxis += afl.x[f] * gx;
            v_diffusion += vfl.x[f] * gx;
        }
    }
    for j in 0..ny - 1 {
        let y = grid.y_center(j) + 0.5 * grid.hy();
        for i in 0..nx {
            let gy = phi.grad(grid.x_center(i), y, t).1;
            let f = i + nx * j;
            diffusion += dfl.y[f] * gy;
            chemotaxis += afl.y[f] * gy;
            v_diffusion += vfl.y[f] * gy;
        }
    }
    Ok(Integrands {
        u_dt: u_dt * area,
        diffusion: diffusion * area,
        chemotaxis: chemotaxis * area,
        reaction_u: reaction_u * area,
        v_dt: v_dt * area,
        v_diffusion: v_diffusion * area,
        reaction_v: reaction_v * area,
    })
}

/// Absolute residuals of both weak identities for one test function.
pub fn weak_residual(traj: &Trajectory, params: &ModelParams, phi: &dyn TestFunction) -> Result<WeakResidualReport> {
    let snaps = &traj.snapshots;
    let first = snaps
        .first()
        .ok_or_else(|| Error::UnsupportedTestFunction("trajectory has no snapshots".into()))?;
    let grid = *first.u.grid();
    check_neumann(phi, &grid)?;

    let (a, b) = phi.support();
    let last = snaps.last().expect("nonempty");
    if first.t > a.max(0.0) || last.t < b {
        return Err(Error::UnsupportedTestFunction(format!(
            "support [{a}, {b}] not covered by snapshots [{}, {}]",
            first.t, last.t
        )));
    }
    let inside = snaps.iter().filter(|s| s.t >= a && s.t <= b).count();
    if inside < MIN_SNAPSHOTS_IN_SUPPORT {
        return Err(Error::UnsupportedTestFunction(format!(
            "only {inside} snapshots inside the support, need {MIN_SNAPSHOTS_IN_SUPPORT}"
        )));
    }

    // initial-data terms, needed only when phi(., 0) does not vanish
    let (mut init_u, mut init_v) = (0.0, 0.0);
    if a <= 0.0 {
        if first.t != 0.0 {
            return Err(Error::UnsupportedTestFunction(
                "phi(., 0) is nonzero but there is no snapshot at t = 0".into(),
            ));
        }
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                let p = phi.value(x, y, 0.0);
                init_u += first.u.at(i, j) * p;
                init_v += first.v.at(i, j) * p;
            }
        }
        init_u *= grid.cell_area();
        init_v *= grid.cell_area();
    }

    let mut lhs_u = -init_u;
    let mut rhs_u = 0.0;
    let mut lhs_v = -init_v;
    let mut rhs_v = 0.0;
    let mut scale_u = init_u.abs();
    let mut scale_v = init_v.abs();
    let mut prev: Option<(f64, Integrands)> = None;
    for snap in snaps {
        let cur = integrands(snap, params, phi)?;
        if let Some((t0, p)) = &prev {
            let w = 0.5 * (snap.t - t0);
            let terms_u = [
                -w * (p.u_dt + cur.u_dt),
                -w * (p.diffusion + cur.diffusion),
                w * (p.chemotaxis + cur.chemotaxis),
                w * (p.reaction_u + cur.reaction_u),
            ];
            let terms_v = [
                -w * (p.v_dt + cur.v_dt),
                -w * (p.v_diffusion + cur.v_diffusion),
                w * (p.reaction_v + cur.reaction_v),
            ];
            lhs_u += terms_u[0];
            rhs_u += terms_u[1] + terms_u[2] + terms_u[3];
            lhs_v += terms_v[0];
            rhs_v += terms_v[1] + terms_v[2];
            for x in terms_u {
                scale_u = scale_u.max(x.abs());
            }
            for x in terms_v {
                scale_v = scale_v.max(x.abs());
            }
        }
        prev = Some((snap.t, cur));
    }
    Ok(WeakResidualReport {
        test_function_id: phi.id(),
        residual_u: (lhs_u - rhs_u).abs(),
        residual_v: (lhs_v - rhs_v).abs(),
        scale_u,
        scale_v,
        nx: grid.nx(),
        ny: grid.ny(),
        snapshots_in_support: inside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use crate::integrator::{run, StepControl};
    use crate::model::SimState;

    struct SineInX;

    impl TestFunction for SineInX {
        fn id(&self) -> String {
            "sin(x)".into()
        }
        fn value(&self, x: f64, _: f64, _: f64) -> f64 {
            x.sin()
        }
        fn grad(&self, x: f64, _: f64, _: f64) -> (f64, f64) {
            (x.cos(), 0.0)
        }
        fn time_derivative(&self, _: f64, _: f64, _: f64) -> f64 {
            0.0
        }
        fn support(&self) -> (f64, f64) {
            (0.2, 0.8)
        }
    }

    fn steady_trajectory() -> (Trajectory, ModelParams) {
        let g = Grid::square(16).unwrap();
        let p = ModelParams::new(3.0, 10.0, 1.0, 1.0).unwrap();
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.025).collect();
        let ctrl = StepControl {
            stop_on_equilibrium: false,
            ..Default::default()
        };
        let traj = run(SimState::uniform(g, 0.5, 2.0).unwrap(), &p, &ctrl, 1.0, &times).unwrap();
        (traj, p)
    }

    #[test]
    fn zero_test_function_gives_zero() {
        let (traj, p) = steady_trajectory();
        let g = *traj.final_state.grid();
        let phi = CosineBump::new(&g, 1, 2, 0.0, 0.5, 0.4);
        let r = weak_residual(&traj, &p, &phi).unwrap();
        assert_eq!(r.residual_u, 0.0);
        assert_eq!(r.residual_v, 0.0);
    }

    #[test]
    fn steady_state_with_time_only_bump() {
        let (traj, p) = steady_trajectory();
        let g = *traj.final_state.grid();
        let phi = CosineBump::new(&g, 0, 0, 1.0, 0.5, 0.45);
        let r = weak_residual(&traj, &p, &phi).unwrap();
        assert!(r.residual_u < 1e-10, "{}", r.residual_u);
        assert!(r.residual_v < 1e-10, "{}", r.residual_v);
        assert!(r.snapshots_in_support >= 20);
    }

    #[test]
    fn bump_derivative_matches_finite_difference() {
        let g = Grid::square(8).unwrap();
        let phi = CosineBump::new(&g, 2, 1, 1.3, 1.0, 0.6);
        for &t in &[0.5, 0.8, 1.0, 1.37] {
            let (x, y) = (0.3, -1.1);
            let h = 1e-6;
            let fd = (phi.value(x, y, t + h) - phi.value(x, y, t - h)) / (2.0 * h);
            assert!((fd - phi.time_derivative(x, y, t)).abs() < 1e-7);
            let fdx = (phi.value(x + h, y, t) - phi.value(x - h, y, t)) / (2.0 * h);
            let fdy = (phi.value(x, y + h, t) - phi.value(x, y - h, t)) / (2.0 * h);
            let (gx, gy) = phi.grad(x, y, t);
            assert!((fdx - gx).abs() < 1e-7 && (fdy - gy).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_non_neumann_test_function() {
        let (traj, p) = steady_trajectory();
        assert!(matches!(
            weak_residual(&traj, &p, &SineInX),
            Err(Error::UnsupportedTestFunction(_))
        ));
    }

    #[test]
    fn rejects_sparse_snapshots() {
        let g = Grid::square(8).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let traj = run(
            SimState::new(Field::constant(g, 0.5), Field::constant(g, 2.0)).unwrap(),
            &p,
            &StepControl::default(),
            1.0,
            &[0.0, 0.5, 1.0],
        )
        .unwrap();
        let phi = CosineBump::new(&g, 1, 1, 1.0, 0.5, 0.4);
        assert!(weak_residual(&traj, &p, &phi).is_err());
    }

    #[test]
    fn seeded_family_is_reproducible_and_inside_window() {
        let g = Grid::square(8).unwrap();
        let a = CosineBump::seeded_family(7, 5, &g, (0.0, 2.0));
        let b = CosineBump::seeded_family(7, 5, &g, (0.0, 2.0));
        assert_eq!(a, b);
        for f in &a {
            let (lo, hi) = f.support();
            assert!(lo >= 0.0 && hi <= 2.0);
        }
    }
}
