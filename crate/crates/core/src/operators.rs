//! Finite-volume spatial operators.
//!
//! Every operator is assembled from face fluxes: x-faces sit between cells
//! `(i, j)` and `(i + 1, j)`, y-faces between `(i, j)` and `(i, j + 1)`.
//! Boundary faces carry zero flux, which is the discrete no-flux
//! condition, so the cell integral of each divergence telescopes to zero.

use crate::error::{Error, Result};
use crate::grid::{pow, Field, Grid};
use crate::model::{eval_source, ModelParams, SimState};

/// Fluxes through interior faces.
///
/// `x[i + (nx - 1) * j]` is the flux through the face between `(i, j)` and
/// `(i + 1, j)`; `y[i + nx * j]` through the face between `(i, j)` and
/// `(i, j + 1)`. Positive flux points toward increasing coordinate.
#[derive(Debug, Clone)]
pub struct FaceFluxes {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceFluxes {
    fn zeros(grid: &Grid) -> Self {
        Self {
            x: vec![0.0; (grid.nx() - 1) * grid.ny()],
            y: vec![0.0; grid.nx() * (grid.ny() - 1)],
        }
    }

    /// Cell-wise divergence of the fluxes.
    pub fn divergence(&self, grid: &Grid) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        self.accumulate_divergence(grid, 1.0, &mut out);
        out
    }

    /// `out += sign * div F`.
    pub fn accumulate_divergence(&self, grid: &Grid, sign: f64, out: &mut [f64]) {
        let (nx, ny) = (grid.nx(), grid.ny());
        let (ihx, ihy) = (sign / grid.hx(), sign / grid.hy());
        let fx = &self.x;
        let fy = &self.y;
        for j in 0..ny {
            for i in 0..nx {
                let east = if i + 1 < nx { fx[i + (nx - 1) * j] } else { 0.0 };
                let west = if i > 0 { fx[i - 1 + (nx - 1) * j] } else { 0.0 };
                let north = if j + 1 < ny { fy[i + nx * j] } else { 0.0 };
                let south = if j > 0 { fy[i + nx * (j - 1)] } else { 0.0 };
                out[i + nx * j] += (east - west) * ihx + (north - south) * ihy;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RhsPair {
    pub du_dt: Field,
    pub dv_dt: Field,
}

fn check_nonnegative(u: &Field) -> Result<()> {
    u.check_finite()?;
    match u.values().iter().enumerate().find(|(_, x)| **x < 0.0) {
        Some((cell, &value)) => Err(Error::NegativeDensity { value, cell }),
        None => Ok(()),
    }
}

fn check_positive(v: &Field) -> Result<()> {
    v.check_finite()?;
    match v.values().iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
        Some((cell, &value)) => Err(Error::NonPositiveV { value, cell }),
        None => Ok(()),
    }
}

/// Diffusive fluxes `-(a_face) * du/dn` with `a = ((u_L + u_R)/2 + eps)^(m-1)`,
/// returned with the sign convention `F = a * (u_R - u_L) / h` so that the
/// diffusion term is `+div F`.
pub fn diffusion_fluxes(u: &Field, m: f64, eps: f64) -> Result<FaceFluxes> {
    check_nonnegative(u)?;
    if !(m >= 1.0) {
        return Err(Error::InvalidParams {
            field: "m",
            reason: format!("diffusion exponent must be >= 1, got {m}"),
        });
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParams {
            field: "eps",
            reason: format!("must be >= 0, got {eps}"),
        });
    }
    if m > 1.0 && m < 2.0 && eps == 0.0 {
        return Err(Error::DegenerateWithoutEps { m });
    }
    Ok(diffusion_fluxes_unchecked(u, m, eps))
}

fn diffusion_fluxes_unchecked(u: &Field, m: f64, eps: f64) -> FaceFluxes {
    let grid = u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx, ihy) = (1.0 / grid.hx(), 1.0 / grid.hy());
    let vals = u.values();
    let mut fl = FaceFluxes::zeros(grid);
    let expo = m - 1.0;
    let coef = |a: f64, b: f64| -> f64 {
        if expo == 0.0 {
            1.0
        } else {
            pow(0.5 * (a + b) + eps, expo)
        }
    };
    for j in 0..ny {
        let row = nx * j;
        for i in 0..nx - 1 {
            let (a, b) = (vals[row + i], vals[row + i + 1]);
            fl.x[i + (nx - 1) * j] = coef(a, b) * (b - a) * ihx;
        }
    }
    for j in 0..ny - 1 {
        let row = nx * j;
        for i in 0..nx {
            let (a, b) = (vals[row + i], vals[row + nx + i]);
            fl.y[i + row] = coef(a, b) * (b - a) * ihy;
        }
    }
    fl
}

/// Upwinded chemotactic fluxes `w * u_donor` with face velocity
/// `w = chi * (v_R - v_L) / (h * (v_L + v_R) / 2)`. Also returns `max |w|`.
pub fn advection_fluxes(u: &Field, v: &Field, chi: f64) -> Result<(FaceFluxes, f64)> {
    u.check_same_grid(v)?;
    check_nonnegative(u)?;
    check_positive(v)?;
    Ok(advection_fluxes_unchecked(u, v, chi))
}

fn advection_fluxes_unchecked(u: &Field, v: &Field, chi: f64) -> (FaceFluxes, f64) {
    let grid = u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut fl = FaceFluxes::zeros(grid);
    if chi == 0.0 {
        return (fl, 0.0);
    }
    let (cx, cy) = (2.0 * chi / grid.hx(), 2.0 * chi / grid.hy());
    let uv = u.values();
    let vv = v.values();
    let mut wmax: f64 = 0.0;
    for j in 0..ny {
        let row = nx * j;
        for i in 0..nx - 1 {
            let (l, r) = (row + i, row + i + 1);
            let w = cx * (vv[r] - vv[l]) / (vv[l] + vv[r]);
            wmax = wmax.max(w.abs());
            fl.x[i + (nx - 1) * j] = if w >= 0.0 { w * uv[l] } else { w * uv[r] };
        }
    }
    for j in 0..ny - 1 {
        let row = nx * j;
        for i in 0..nx {
            let (l, r) = (row + i, row + nx + i);
            let w = cy * (vv[r] - vv[l]) / (vv[l] + vv[r]);
            wmax = wmax.max(w.abs());
            fl.y[i + row] = if w >= 0.0 { w * uv[l] } else { w * uv[r] };
        }
    }
    (fl, wmax)
}

/// Largest chemotactic face speed `max |w|` for the given attractiveness.
pub fn max_face_velocity(v: &Field, chi: f64) -> f64 {
    if chi == 0.0 {
        return 0.0;
    }
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (cx, cy) = (2.0 * chi / grid.hx(), 2.0 * chi / grid.hy());
    let vv = v.values();
    let mut wmax: f64 = 0.0;
    for j in 0..ny {
        let row = nx * j;
        for i in 0..nx {
            let c = vv[row + i];
            if i + 1 < nx {
                let r = vv[row + i + 1];
                wmax = wmax.max((cx * (r - c) / (c + r)).abs());
            }
            if j + 1 < ny {
                let r = vv[row + nx + i];
                wmax = wmax.max((cy * (r - c) / (c + r)).abs());
            }
        }
    }
    wmax
}

/// Five-point Laplacian with reflective ghost cells.
pub fn laplacian_neumann(f: &Field) -> Result<Field> {
    f.check_finite()?;
    let fl = diffusion_fluxes_unchecked(f, 1.0, 0.0);
    Field::from_values(*f.grid(), fl.divergence(f.grid()))
}

/// `div(((u + eps)^(m-1)) grad u)` in flux form.
pub fn porous_diffusion_div(u: &Field, m: f64, eps: f64) -> Result<Field> {
    let fl = diffusion_fluxes(u, m, eps)?;
    Field::from_values(*u.grid(), fl.divergence(u.grid()))
}

/// The transport term `-chi div((u / v) grad v)` as it appears on the
/// right-hand side of the `u` equation, with first-order upwinding.
pub fn chemotaxis_div(u: &Field, v: &Field, chi: f64) -> Result<Field> {
    let (fl, _) = advection_fluxes(u, v, chi)?;
    let mut out = vec![0.0; u.grid().len()];
    fl.accumulate_divergence(u.grid(), -1.0, &mut out);
    Field::from_values(*u.grid(), out)
}

/// Right-hand side with explicit source fields. The sources may be signed,
/// which manufactured-solution tests rely on.
pub fn rhs_with_sources(u: &Field, v: &Field, params: &ModelParams, b1: &[f64], b2: &[f64]) -> Result<RhsPair> {
    let grid = *u.grid();
    u.check_same_grid(v)?;
    if b1.len() != grid.len() || b2.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: b1.len().min(b2.len()),
        });
    }
    check_nonnegative(u)?;
    check_positive(v)?;
    let (m, eps) = (params.m, params.eps);
    if m > 1.0 && m < 2.0 && eps == 0.0 {
        return Err(Error::DegenerateWithoutEps { m });
    }

    let mut du = vec![0.0; grid.len()];
    diffusion_fluxes_unchecked(u, m, eps).accumulate_divergence(&grid, 1.0, &mut du);
    if params.chi != 0.0 {
        advection_fluxes_unchecked(u, v, params.chi)
            .0
            .accumulate_divergence(&grid, -1.0, &mut du);
    }
    let mut dv = vec![0.0; grid.len()];
    diffusion_fluxes_unchecked(v, 1.0, 0.0).accumulate_divergence(&grid, 1.0, &mut dv);

    let uv = u.values();
    let vv = v.values();
    for k in 0..grid.len() {
        let prod = uv[k] * vv[k];
        let production = if params.regularized_reaction {
            prod / (1.0 + eps * prod)
        } else {
            prod
        };
        du[k] += -prod + b1[k];
        dv[k] += production - vv[k] + b2[k];
    }
    Ok(RhsPair {
        du_dt: Field::from_values(grid, du)?,
        dv_dt: Field::from_values(grid, dv)?,
    })
}

pub fn rhs_eval(state: &SimState, params: &ModelParams) -> Result<RhsPair> {
    let grid = state.grid();
    let b1 = eval_source(&params.b1, grid, state.t)?;
    let b2 = eval_source(&params.b2, grid, state.t)?;
    rhs_with_sources(&state.u, &state.v, params, b1.values(), b2.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cell_integral, raw_integral};
    use crate::model::{gaussian_ic, homogeneous_steady_state};
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(0.0, n as f64, 0.0, n as f64, n, n).unwrap()
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = Grid::square(16).unwrap();
        let out = laplacian_neumann(&Field::constant(g, 3.7)).unwrap();
        assert!(out.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_of_linear() {
        let g = unit_grid(10);
        let f = Field::from_fn(g, |x, _| x);
        let out = laplacian_neumann(&f).unwrap();
        for j in 0..10 {
            for i in 1..9 {
                assert!(out.at(i, j).abs() < 1e-13);
            }
        }
        assert!(cell_integral(&out).unwrap().abs() < 1e-12);
        // reflection at x boundaries breaks the linear profile
        assert!(out.at(0, 3) != 0.0);
    }

    #[test]
    fn laplacian_of_quadratic_is_four() {
        let g = unit_grid(9);
        let f = Field::from_fn(g, |x, y| x * x + y * y);
        let out = laplacian_neumann(&f).unwrap();
        for j in 1..8 {
            for i in 1..8 {
                assert_eq!(out.at(i, j), 4.0);
            }
        }
    }

    #[test]
    fn porous_with_m_one_is_laplacian() {
        let g = Grid::square(20).unwrap();
        let u = gaussian_ic(&g, 0.7).unwrap();
        let a = porous_diffusion_div(&u, 1.0, 1e-3).unwrap();
        let b = laplacian_neumann(&u).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-14 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn porous_of_constant_is_zero() {
        let g = Grid::square(12).unwrap();
        for m in [1.0, 1.5, 2.0, 3.0, 4.7] {
            let out = porous_diffusion_div(&Field::constant(g, 0.8), m, 1e-6).unwrap();
            assert!(out.values().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn porous_errors() {
        let g = Grid::square(6).unwrap();
        let mut u = Field::constant(g, 1.0);
        assert!(matches!(
            porous_diffusion_div(&u, 1.5, 0.0),
            Err(Error::DegenerateWithoutEps { .. })
        ));
        assert!(porous_diffusion_div(&u, 3.0, 0.0).is_ok());
        u.values_mut()[5] = -1e-3;
        assert!(matches!(
            porous_diffusion_div(&u, 3.0, 1e-6),
            Err(Error::NegativeDensity { cell: 5, .. })
        ));
    }

    /// Pointwise oracle for `(u^2 u')'` with `u = x^2`: `10 x^4`.
    fn porous_strip_error(n_per_unit: usize) -> f64 {
        let n = 10 * n_per_unit;
        let g = Grid::new(0.0, 10.0, 0.0, 2.0, n, 2).unwrap();
        let u = Field::from_fn(g, |x, _| x * x);
        let out = porous_diffusion_div(&u, 3.0, 0.0).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..n {
            let x = g.x_center(i);
            if (2.0..=8.0).contains(&x) {
                err = err.max((out.at(i, 0) - 10.0 * x.powi(4)).abs());
            }
        }
        err
    }

    #[test]
    fn porous_matches_manufactured_oracle_second_order() {
        let e1 = porous_strip_error(1);
        let e2 = porous_strip_error(2);
        let e4 = porous_strip_error(4);
        assert!(e1 > 0.0);
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{e1} {e2}");
        assert!(e2 / e4 > 3.5 && e2 / e4 < 4.5, "{e2} {e4}");
    }

    #[test]
    fn chemotaxis_trivial_cases() {
        let g = Grid::square(10).unwrap();
        let u = gaussian_ic(&g, 1.0).unwrap();
        let out = chemotaxis_div(&u, &Field::constant(g, 2.0), 10.0).unwrap();
        assert!(out.values().iter().all(|&x| x == 0.0));
        let v = gaussian_ic(&g, 1.0).unwrap();
        let out = chemotaxis_div(&Field::zeros(g), &v, 10.0).unwrap();
        assert!(out.values().iter().all(|&x| x == 0.0));
        let mut bad = v.clone();
        bad.values_mut()[0] = 0.0;
        assert!(matches!(
            chemotaxis_div(&u, &bad, 1.0),
            Err(Error::NonPositiveV { cell: 0, .. })
        ));
    }

    #[test]
    fn chemotaxis_concentrates_toward_peak() {
        let g = Grid::new(-2.5, 2.5, -2.5, 2.5, 5, 5).unwrap();
        let v = gaussian_ic(&g, 1.0).unwrap();
        let u = Field::constant(g, 1.0);
        let out = chemotaxis_div(&u, &v, 1.0).unwrap();
        assert!(cell_integral(&out).unwrap().abs() < 1e-12);

        // direct flux sum into the center cell (2, 2), h = 1
        let vel = |a: f64, b: f64| (b - a) / (0.5 * (a + b));
        let c = v.at(2, 2);
        let east = vel(c, v.at(3, 2)); // negative: flows west into the center
        let west = vel(v.at(1, 2), c); // positive
        let north = vel(c, v.at(2, 3));
        let south = vel(v.at(2, 1), c);
        let oracle = -((east - west) + (north - south));
        assert!((out.at(2, 2) - oracle).abs() < 1e-14);
        assert!(out.at(2, 2) > 0.0);
        assert_eq!(out.argmax(), g.index(2, 2));
    }

    #[test]
    fn rhs_vanishes_at_steady_state() {
        let g = Grid::square(16).unwrap();
        for m in [1.0, 3.0] {
            let p = ModelParams::new(m, 10.0, 1.0, 1.0).unwrap();
            let (us, vs) = homogeneous_steady_state(&p).unwrap();
            let s = SimState::uniform(g, us, vs).unwrap();
            let r = rhs_eval(&s, &p).unwrap();
            assert!(r.du_dt.max_abs() < 1e-13);
            assert!(r.dv_dt.max_abs() < 1e-13);
        }
    }

    #[test]
    fn rhs_with_zero_u_unit_v() {
        let g = Grid::square(8).unwrap();
        let p = ModelParams::new(3.0, 10.0, 1.0, 1.0).unwrap();
        let s = SimState::uniform(g, 0.0, 1.0).unwrap();
        let r = rhs_eval(&s, &p).unwrap();
        assert!(r.du_dt.values().iter().all(|&x| x == 1.0));
        assert!(r.dv_dt.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn regularized_reaction_saturates() {
        let g = Grid::square(4).unwrap();
        let mut p = ModelParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        p.regularized_reaction = true;
        p.eps = 0.5;
        let s = SimState::uniform(g, 2.0, 3.0).unwrap();
        let r = rhs_eval(&s, &p).unwrap();
        // 6 / (1 + 3) - 3
        assert!(r.dv_dt.values().iter().all(|&x| (x - (1.5 - 3.0)).abs() < 1e-15));
    }

    fn positive_fields(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(0.0f64..5.0, n),
            prop::collection::vec(0.05f64..5.0, n),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transport_terms_conserve_mass((uv, vv) in positive_fields(42), m in 1.0f64..4.0, chi in 0.0f64..20.0) {
            let g = Grid::new(-1.0, 2.0, 0.0, 1.5, 7, 6).unwrap();
            let u = Field::from_values(g, uv).unwrap();
            let v = Field::from_values(g, vv).unwrap();
            let d = porous_diffusion_div(&u, m, 1e-6).unwrap();
            let c = chemotaxis_div(&u, &v, chi).unwrap();
            let scale_d: f64 = d.values().iter().map(|x| x.abs()).sum::<f64>() * g.cell_area();
            let scale_c: f64 = c.values().iter().map(|x| x.abs()).sum::<f64>() * g.cell_area();
            prop_assert!(cell_integral(&d).unwrap().abs() <= 1e-12 * (1.0 + scale_d));
            prop_assert!(cell_integral(&c).unwrap().abs() <= 1e-12 * (1.0 + scale_c));
            let l = laplacian_neumann(&v).unwrap();
            prop_assert!(cell_integral(&l).unwrap().abs() <= 1e-12 * (1.0 + l.max_abs() * g.area()));
        }

        #[test]
        fn m_one_reduces_to_laplacian((uv, _) in positive_fields(30), eps in 0.0f64..1.0) {
            let g = Grid::new(0.0, 1.0, 0.0, 1.0, 5, 6).unwrap();
            let u = Field::from_values(g, uv).unwrap();
            let a = porous_diffusion_div(&u, 1.0, eps).unwrap();
            let b = laplacian_neumann(&u).unwrap();
            prop_assert_eq!(a.values(), b.values());
        }

        #[test]
        fn u_mass_identity((uv, vv) in positive_fields(64), m in 1.0f64..3.5, chi in 0.0f64..12.0) {
            let g = Grid::new(-3.0, 3.0, -3.0, 3.0, 8, 8).unwrap();
            let u = Field::from_values(g, uv).unwrap();
            let v = Field::from_values(g, vv).unwrap();
            let p = ModelParams::new(m, chi, 1.0, 1.0).unwrap();
            let s = SimState::new(u.clone(), v.clone()).unwrap();
            let r = rhs_eval(&s, &p).unwrap();
            let uvp: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
            let expected = -raw_integral(&g, &uvp) + g.area();
            let got = cell_integral(&r.du_dt).unwrap();
            let scale = r.du_dt.max_abs() * g.area();
            prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + scale), "{} vs {}", got, expected);
        }
    }
}
