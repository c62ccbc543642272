//! Uniform cell-centered grid over a rectangle.
//!
//! Values are stored row-major with linear index `i + nx * j`, where `i`
//! runs along x. Neumann closure is realised with reflective ghost cells:
//! the ghost value across a boundary face equals the adjacent interior
//! value, so every discrete normal derivative on the boundary is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidDimension(format!(
                "need at least 2 cells per axis, got {nx} x {ny}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite()) {
            return Err(Error::InvalidDimension("bounds must be finite".into()));
        }
        if x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidDimension(format!(
                "empty rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
            hx: (x_max - x_min) / nx as f64,
            hy: (y_max - y_min) / ny as f64,
        })
    }

    /// The square (-3, 3)^2 with `n` cells per axis.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(-3.0, 3.0, -3.0, 3.0, n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// (x_min, x_max, y_min, y_max)
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x_min, self.x_max, self.y_min, self.y_max)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn min_spacing(&self) -> f64 {
        self.hx.min(self.hy)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    /// Measured from the midpoint so that mirrored cells have exactly
    /// opposite offsets.
    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        0.5 * (self.x_min + self.x_max) + (i as f64 + 0.5 - 0.5 * self.nx as f64) * self.hx
    }

    #[inline]
    pub fn y_center(&self, j: usize) -> f64 {
        0.5 * (self.y_min + self.y_max) + (j as f64 + 0.5 - 0.5 * self.ny as f64) * self.hy
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x_center(i), self.y_center(j))
    }

    /// Same cell layout and bounds (bitwise).
    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }

    /// Grid with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.x_min,
            self.x_max,
            self.y_min,
            self.y_max,
            self.nx * factor,
            self.ny * factor,
        )
    }

    pub fn with_cells(&self, nx: usize, ny: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.y_min, self.y_max, nx, ny)
    }
}

/// A scalar quantity sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y_center(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x_center(i), y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Value at a possibly out-of-range index, reflecting across the
    /// boundary for the single ghost layer.
    pub fn ghost(&self, i: isize, j: isize) -> f64 {
        let reflect = |k: isize, n: usize| -> usize {
            if k < 0 {
                (-k - 1) as usize
            } else if k as usize >= n {
                2 * n - 1 - k as usize
            } else {
                k as usize
            }
        };
        self.at(reflect(i, self.grid.nx()), reflect(j, self.grid.ny()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let mut count = 0;
        let mut first = usize::MAX;
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                if count == 0 {
                    first = k;
                }
                count += 1;
            }
        }
        if count == 0 {
            Ok(())
        } else {
            Err(Error::NonFiniteField { count, first })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Index of the largest entry (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }
}

/// Midpoint quadrature `hx * hy * sum(values)`, summed in storage order.
pub fn cell_integral(f: &Field) -> Result<f64> {
    f.check_finite()?;
    Ok(raw_integral(f.grid(), f.values()))
}

/// Midpoint quadrature of a raw value slice; no finiteness check.
pub(crate) fn raw_integral(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_area()
}

/// Central-difference gradient at cell centers with reflective ghost cells.
pub fn gradient(f: &Field) -> (Vec<f64>, Vec<f64>) {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = f.values();
    let mut gx = vec![0.0; g.len()];
    let mut gy = vec![0.0; g.len()];
    let (ihx, ihy) = (0.5 / g.hx(), 0.5 / g.hy());
    for j in 0..ny {
        let jm = if j == 0 { 0 } else { j - 1 };
        let jp = if j + 1 == ny { j } else { j + 1 };
        for i in 0..nx {
            let im = if i == 0 { 0 } else { i - 1 };
            let ip = if i + 1 == nx { i } else { i + 1 };
            let k = i + nx * j;
            gx[k] = (v[ip + nx * j] - v[im + nx * j]) * ihx;
            gy[k] = (v[i + nx * jp] - v[i + nx * jm]) * ihy;
        }
    }
    (gx, gy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Lp(f64),
    Linf,
    W1q(f64),
}

/// `x.powf(p)` with fast paths for small integer and half-integer exponents.
#[inline]
pub(crate) fn pow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p.fract() == 0.0 && p.abs() <= 16.0 {
        x.powi(p as i32)
    } else if (2.0 * p).fract() == 0.0 && p > 0.0 && p <= 16.0 {
        x.powi(p.floor() as i32) * x.sqrt()
    } else if (2.0 * p).fract() == 0.0 && (-16.0..0.0).contains(&p) {
        1.0 / pow(x, -p)
    } else {
        x.powf(p)
    }
}

pub fn discrete_norm(f: &Field, kind: NormKind) -> Result<f64> {
    f.check_finite()?;
    let grid = f.grid();
    match kind {
        NormKind::Linf => Ok(f.max_abs()),
        NormKind::Lp(p) => {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::InvalidExponent(p));
            }
            let s: f64 = f.values().iter().map(|x| pow(x.abs(), p)).sum();
            Ok((s * grid.cell_area()).powf(1.0 / p))
        }
        NormKind::W1q(q) => {
            if !(q > 1.0 && q.is_finite()) {
                return Err(Error::InvalidExponent(q));
            }
            Ok(w1q_unchecked(f, q))
        }
    }
}

/// W^{1,q} norm for any `q >= 1`; inputs are not validated.
pub(crate) fn w1q_unchecked(f: &Field, q: f64) -> f64 {
    let (gx, gy) = gradient(f);
    let mut s = 0.0;
    for ((x, a), b) in f.values().iter().zip(&gx).zip(&gy) {
        s += pow(x.abs(), q) + pow((a * a + b * b).sqrt(), q);
    }
    (s * f.grid().cell_area()).powf(1.0 / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn make_grid_examples() {
        let g = Grid::new(-3.0, 3.0, -3.0, 3.0, 6, 6).unwrap();
        assert_eq!(g.hx(), 1.0);
        assert_eq!(g.hy(), 1.0);
        assert_eq!(g.center(0, 0), (-2.5, -2.5));

        let g = Grid::square(128).unwrap();
        assert_eq!(g.hx(), 0.046875);

        assert!(matches!(
            Grid::new(0.0, 1.0, 0.0, 1.0, 1, 1),
            Err(Error::InvalidDimension(_))
        ));
        assert!(Grid::new(1.0, 1.0, 0.0, 1.0, 4, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 2.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn spacing_times_count_is_length() {
        for n in [2usize, 3, 7, 100, 129, 1000] {
            let g = Grid::new(-1.3, 2.9, 0.1, 0.7, n, n + 1).unwrap();
            assert!((g.hx() * n as f64 - 4.2).abs() <= 4.2 * f64::EPSILON * 2.0);
        }
    }

    #[test]
    fn constant_integral_is_area() {
        let g = Grid::square(6).unwrap();
        assert_eq!(cell_integral(&Field::constant(g, 1.0)).unwrap(), 36.0);
    }

    /// Composite Simpson on a 1D slice; the 2D gaussian is separable.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn gaussian_integral_matches_quadrature_oracle() {
        let sigma: f64 = 0.25;
        let amp = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
        let one_d = simpson(|x| (-x * x / (2.0 * sigma * sigma)).exp(), -3.0, 3.0, 20_000);
        let oracle = amp * one_d * one_d;
        assert_relative_eq!(
            oracle,
            sigma * (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );

        let g = Grid::square(256).unwrap();
        let f = Field::from_fn(g, |x, y| amp * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp());
        let got = cell_integral(&f).unwrap();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
        assert!((got - 0.62666).abs() < 1e-5);
    }

    #[test]
    fn odd_field_integrates_to_zero() {
        let g = Grid::square(64).unwrap();
        let f = Field::from_fn(g, |x, _| x);
        assert!(cell_integral(&f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let g = Grid::square(4).unwrap();
        let mut f = Field::constant(g, 1.0);
        f.values_mut()[3] = f64::NAN;
        assert!(matches!(
            cell_integral(&f),
            Err(Error::NonFiniteField { count: 1, first: 3 })
        ));
        assert!(discrete_norm(&f, NormKind::Linf).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = Grid::square(6).unwrap();
        let c = Field::constant(g, 2.0);
        assert_relative_eq!(
            discrete_norm(&c, NormKind::Lp(1.0)).unwrap(),
            72.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            discrete_norm(&c, NormKind::W1q(3.0)).unwrap(),
            (8.0f64 * 36.0).powf(1.0 / 3.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            discrete_norm(&c, NormKind::W1q(3.0)).unwrap(),
            6.6039,
            max_relative = 1e-4
        );
        assert_eq!(discrete_norm(&c, NormKind::Linf).unwrap(), 2.0);

        let g = Grid::square(256).unwrap();
        let s = Field::from_fn(g, |x, _| (std::f64::consts::PI * x / 3.0).sin());
        let l2 = discrete_norm(&s, NormKind::Lp(2.0)).unwrap();
        assert!((l2 - 18f64.sqrt()).abs() < 0.01 * 18f64.sqrt());

        assert!(matches!(
            discrete_norm(&c, NormKind::Lp(0.5)),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            discrete_norm(&c, NormKind::W1q(1.0)),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn pow_fast_paths_agree_with_powf() {
        for &x in &[0.0, 1e-9, 0.3, 1.0, 2.5, 17.0] {
            for &p in &[1.0, 2.0, 3.0, 5.0, -1.5, 0.5, 1.5, 2.5, 2.0002, 7.3] {
                let want: f64 = f64::powf(x, p);
                let got = pow(x, p);
                if want.is_finite() {
                    assert_relative_eq!(got, want, max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn ghost_reflection_zeroes_normal_derivative() {
        let g = Grid::new(0.0, 1.0, 0.0, 2.0, 5, 7).unwrap();
        let f = Field::from_fn(g, |x, y| (3.0 * x).sin() + y * y * x);
        for j in 0..7isize {
            assert_eq!(f.ghost(-1, j) - f.ghost(0, j), 0.0);
            assert_eq!(f.ghost(5, j) - f.ghost(4, j), 0.0);
        }
        for i in 0..5isize {
            assert_eq!(f.ghost(i, -1) - f.ghost(i, 0), 0.0);
            assert_eq!(f.ghost(i, 7) - f.ghost(i, 6), 0.0);
        }
    }

    fn field_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0f64..10.0, 48),
            prop::collection::vec(-10.0f64..10.0, 48),
        )
    }

    proptest! {
        #[test]
        fn integral_is_linear((a, b) in field_strategy(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let g = Grid::new(0.0, 2.0, -1.0, 1.0, 8, 6).unwrap();
            let f = Field::from_values(g, a).unwrap();
            let h = Field::from_values(g, b).unwrap();
            let combo = f.zip_map(&h, |x, y| s * x + t * y).unwrap();
            let lhs = cell_integral(&combo).unwrap();
            let rhs = s * cell_integral(&f).unwrap() + t * cell_integral(&h).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn lp_norm_is_a_norm((a, b) in field_strategy(), s in -4.0f64..4.0, p in 1.0f64..6.0) {
            let g = Grid::new(0.0, 2.0, -1.0, 1.0, 8, 6).unwrap();
            let f = Field::from_values(g, a).unwrap();
            let h = Field::from_values(g, b).unwrap();
            let nf = discrete_norm(&f, NormKind::Lp(p)).unwrap();
            let nh = discrete_norm(&h, NormKind::Lp(p)).unwrap();
            let scaled = discrete_norm(&f.map(|x| s * x), NormKind::Lp(p)).unwrap();
            prop_assert!((scaled - s.abs() * nf).abs() <= 1e-10 * (1.0 + nf));
            let sum = discrete_norm(&f.zip_map(&h, |x, y| x + y).unwrap(), NormKind::Lp(p)).unwrap();
            prop_assert!(sum <= nf + nh + 1e-10 * (1.0 + nf + nh));
        }
    }
}
