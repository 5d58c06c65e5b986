//! Uniform node-centered grids on a rectangle and the second-order discrete
//! calculus used everywhere else.
//!
//! Nodes sit at `(i * hx, j * hy)` for `i in 0..nx`, `j in 0..ny`, so the
//! boundary of the rectangle is made of grid nodes. Data is stored row-major
//! with `x` varying fastest: `index = j * nx + i`.
//!
//! Derivatives use centered differences in the interior and second-order
//! one-sided differences on boundary nodes, so every operator is defined from
//! stored data alone. The only exception are the `neumann_*` operators, which
//! build in a homogeneous Neumann condition through a mirrored ghost layer;
//! those are what the time stepper uses.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Minimum number of nodes per axis.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// `n x n` nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    /// Larger of the two spacings.
    pub fn h(&self) -> f64 {
        self.hx().max(self.hy())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Whether `(x, y)` lies in the closed rectangle.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.lx).contains(&x) && (0.0..=self.ly).contains(&y)
    }

    /// Distance from `(x, y)` to the boundary of the rectangle (negative outside).
    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        x.min(self.lx - x).min(y).min(self.ly - y)
    }

    /// Trapezoid weight of node `(i, j)`, i.e. the area of its control volume.
    pub fn node_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx() * self.hy()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }

    /// `ShapeMismatch` unless both grids describe the same nodes.
    pub fn check(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )))
        }
    }
}

fn check_finite(data: &[f64], what: &str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                data.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, data }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "scalar data has {} values, grid has {}",
                data.len(),
                grid.len()
            )));
        }
        check_finite(&data, "scalar field")?;
        Ok(Self { grid, data })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch");
        Self::from_vec_unchecked(
            self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max-norm distance to another field on the same grid.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.zip_map(other, |a, b| a - b).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, [0.0, 0.0])
    }

    pub fn constant(grid: Grid, v: [f64; 2]) -> Self {
        Self {
            grid,
            x: vec![v[0]; grid.len()],
            y: vec![v[1]; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut x = Vec::with_capacity(grid.len());
        let mut y = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let v = f(grid.x(i), grid.y(j));
                x.push(v[0]);
                y.push(v[1]);
            }
        }
        Self { grid, x, y }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.grid.check(&y.grid, "vector components")?;
        Ok(Self {
            grid: x.grid,
            x: x.data,
            y: y.data,
        })
    }

    pub fn from_vecs(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "vector components have {}/{} values, grid has {}",
                x.len(),
                y.len(),
                grid.len()
            )));
        }
        check_finite(&x, "vector field")?;
        check_finite(&y, "vector field")?;
        Ok(Self { grid, x, y })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn component(&self, k: usize) -> ScalarField {
        let data = if k == 0 {
            self.x.clone()
        } else {
            self.y.clone()
        };
        ScalarField::from_vec_unchecked(self.grid, data)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        let k = self.grid.idx(i, j);
        [self.x[k], self.y[k]]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            x: self.x.iter().map(|v| v * s).collect(),
            y: self.y.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch");
        Self {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField) -> Self {
        assert!(self.grid.same_shape(&s.grid), "grid mismatch");
        Self {
            grid: self.grid,
            x: self.x.iter().zip(&s.data).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(&s.data).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn norm_squared(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(
            self.grid,
            self.x
                .iter()
                .zip(&self.y)
                .map(|(a, b)| a * a + b * b)
                .collect(),
        )
    }

    pub fn dot(&self, other: &Self) -> ScalarField {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch");
        ScalarField::from_vec_unchecked(
            self.grid,
            (0..self.grid.len())
                .map(|k| self.x[k] * other.x[k] + self.y[k] * other.y[k])
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .fold(0.0_f64, |m, (a, b)| m.max(a.abs()).max(b.abs()))
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: Grid, value: Complex64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                data.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, data }
    }

    pub fn from_vec(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "complex data has {} values, grid has {}",
                data.len(),
                grid.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("complex field".into()));
        }
        Ok(Self { grid, data })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_vec_unchecked(self.grid, self.data.iter().map(|&z| f(z)).collect())
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(self.grid, self.data.iter().map(|z| z.norm()).collect())
    }

    pub fn modulus_squared(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(self.grid, self.data.iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn max_modulus(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Values a stencil can act on.
pub trait StencilValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}

impl StencilValue for f64 {}
impl StencilValue for Complex64 {}

/// One-sided first-derivative weights whose truncation error matches the
/// centered stencil's `h^2 f'''/6` through order `h^3`. With equal leading
/// errors on both sides of the seam, stencils can be composed (curl of a
/// perp-gradient, gradient of a curl) without losing an order at the edge.
const D1_EDGE: [f64; 5] = [-2.5, 5.5, -5.0, 2.5, -0.5];

/// One-sided second-derivative weights matching the centered stencil's
/// `h^2 f''''/12` error through order `h^3`.
const D2_EDGE: [f64; 6] = [4.0, -14.0, 20.0, -15.0, 6.0, -1.0];

/// First derivative along a strided line of `n` samples with spacing `h`.
#[inline]
fn d1_line<T: StencilValue>(f: &[T], start: usize, stride: usize, n: usize, h: f64, out: &mut [T]) {
    let at = |k: usize| f[start + k * stride];
    let inv2h = 0.5 / h;
    // Weights sum to zero; differencing against the end node keeps constants exact.
    let (mut lo, mut hi) = (at(0) * 0.0, at(0) * 0.0);
    for (k, &w) in D1_EDGE.iter().enumerate().skip(1) {
        lo = lo + (at(k) - at(0)) * w;
        hi = hi - (at(n - 1 - k) - at(n - 1)) * w;
    }
    out[start] = lo * (1.0 / h);
    for k in 1..n - 1 {
        out[start + k * stride] = (at(k + 1) - at(k - 1)) * inv2h;
    }
    out[start + (n - 1) * stride] = hi * (1.0 / h);
}

/// Second derivative along a strided line, one-sided at both ends.
#[inline]
fn d2_line<T: StencilValue>(f: &[T], start: usize, stride: usize, n: usize, h: f64, out: &mut [T]) {
    let at = |k: usize| f[start + k * stride];
    let ih2 = 1.0 / (h * h);
    let (mut lo, mut hi) = (at(0) * 0.0, at(0) * 0.0);
    for (k, &w) in D2_EDGE.iter().enumerate().skip(1) {
        lo = lo + (at(k) - at(0)) * w;
        hi = hi + (at(n - 1 - k) - at(n - 1)) * w;
    }
    out[start] = lo * ih2;
    for k in 1..n - 1 {
        out[start + k * stride] = (at(k + 1) - at(k) * 2.0 + at(k - 1)) * ih2;
    }
    out[start + (n - 1) * stride] = hi * ih2;
}

/// Second derivative with a mirrored ghost node at each end (zero normal slope).
#[inline]
fn d2_line_neumann<T: StencilValue>(
    f: &[T],
    start: usize,
    stride: usize,
    n: usize,
    h: f64,
    out: &mut [T],
) {
    let at = |k: usize| f[start + k * stride];
    let ih2 = 1.0 / (h * h);
    out[start] = (at(1) - at(0)) * (2.0 * ih2);
    for k in 1..n - 1 {
        out[start + k * stride] = (at(k + 1) - at(k) * 2.0 + at(k - 1)) * ih2;
    }
    out[start + (n - 1) * stride] = (at(n - 2) - at(n - 1)) * (2.0 * ih2);
}

/// First derivative with mirrored ghosts: zero at both ends.
#[inline]
fn d1_line_neumann<T: StencilValue>(
    f: &[T],
    start: usize,
    stride: usize,
    n: usize,
    h: f64,
    out: &mut [T],
) {
    let at = |k: usize| f[start + k * stride];
    let inv2h = 0.5 / h;
    out[start] = at(0) - at(0);
    for k in 1..n - 1 {
        out[start + k * stride] = (at(k + 1) - at(k - 1)) * inv2h;
    }
    out[start + (n - 1) * stride] = at(0) - at(0);
}

type LineOp<T> = fn(&[T], usize, usize, usize, f64, &mut [T]);

fn apply_x<T: StencilValue>(g: &Grid, f: &[T], op: LineOp<T>) -> Vec<T> {
    let mut out = f.to_vec();
    for j in 0..g.ny {
        op(f, g.idx(0, j), 1, g.nx, g.hx(), &mut out);
    }
    out
}

fn apply_y<T: StencilValue>(g: &Grid, f: &[T], op: LineOp<T>) -> Vec<T> {
    let mut out = f.to_vec();
    for i in 0..g.nx {
        op(f, i, g.nx, g.ny, g.hy(), &mut out);
    }
    out
}

/// `d/dx` of raw node data, second order everywhere.
pub fn diff_x<T: StencilValue>(g: &Grid, f: &[T]) -> Vec<T> {
    apply_x(g, f, d1_line::<T>)
}

/// `d/dy` of raw node data, second order everywhere.
pub fn diff_y<T: StencilValue>(g: &Grid, f: &[T]) -> Vec<T> {
    apply_y(g, f, d1_line::<T>)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    VectorField {
        grid: g,
        x: diff_x(&g, &f.data),
        y: diff_y(&g, &f.data),
    }
}

/// 5-point Laplacian in the interior, one-sided second differences on the boundary.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let dxx = apply_x(&g, &f.data, d2_line::<f64>);
    let dyy = apply_y(&g, &f.data, d2_line::<f64>);
    ScalarField::from_vec_unchecked(g, dxx.iter().zip(&dyy).map(|(a, b)| a + b).collect())
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let dx = diff_x(&g, &v.x);
    let dy = diff_y(&g, &v.y);
    ScalarField::from_vec_unchecked(g, dx.iter().zip(&dy).map(|(a, b)| a + b).collect())
}

/// `curl X = d1 X2 - d2 X1`.
pub fn curl(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let d1x2 = diff_x(&g, &v.y);
    let d2x1 = diff_y(&g, &v.x);
    ScalarField::from_vec_unchecked(g, d1x2.iter().zip(&d2x1).map(|(a, b)| a - b).collect())
}

/// `X^perp = (-X2, X1)`.
pub fn perp(v: &VectorField) -> VectorField {
    VectorField {
        grid: v.grid,
        x: v.y.iter().map(|c| -c).collect(),
        y: v.x.clone(),
    }
}

/// `grad^perp f = (-d2 f, d1 f)`.
pub fn perp_gradient(f: &ScalarField) -> VectorField {
    perp(&gradient(f))
}

/// Laplacian of a complex field with the same stencils as [`laplacian`].
pub fn complex_laplacian(u: &ComplexField) -> ComplexField {
    let g = u.grid;
    let dxx = apply_x(&g, &u.data, d2_line::<Complex64>);
    let dyy = apply_y(&g, &u.data, d2_line::<Complex64>);
    ComplexField::from_vec_unchecked(g, dxx.into_iter().zip(dyy).map(|(a, b)| a + b).collect())
}

/// Componentwise gradient of a complex field.
pub fn complex_gradient(u: &ComplexField) -> (ComplexField, ComplexField) {
    let g = u.grid;
    (
        ComplexField::from_vec_unchecked(g, diff_x(&g, &u.data)),
        ComplexField::from_vec_unchecked(g, diff_y(&g, &u.data)),
    )
}

/// `grad_A u = grad u - i A u`, same stencils as [`gradient`].
pub fn covariant_gradient(
    u: &ComplexField,
    a: &VectorField,
) -> Result<(ComplexField, ComplexField)> {
    u.grid.check(&a.grid, "covariant gradient")?;
    let (mut d1, mut d2) = complex_gradient(u);
    let i = Complex64::i();
    for k in 0..u.grid.len() {
        d1.data[k] -= i * a.x[k] * u.data[k];
        d2.data[k] -= i * a.y[k] * u.data[k];
    }
    Ok((d1, d2))
}

/// Pointwise real inner product `(a, c) = Re a Re c + Im a Im c`.
pub fn inner_product(a: &ComplexField, c: &ComplexField) -> Result<ScalarField> {
    a.grid.check(&c.grid, "inner product")?;
    Ok(ScalarField::from_vec_unchecked(
        a.grid,
        a.data
            .iter()
            .zip(&c.data)
            .map(|(p, q)| p.re * q.re + p.im * q.im)
            .collect(),
    ))
}

/// `(a, X) = ((a, X1), (a, X2))` for a complex vector `X`.
pub fn inner_product_vector(
    a: &ComplexField,
    x1: &ComplexField,
    x2: &ComplexField,
) -> Result<VectorField> {
    Ok(
        VectorField::from_components(inner_product(a, x1)?, inner_product(a, x2)?)
            .expect("components share the grid"),
    )
}

/// Laplacian with a homogeneous Neumann condition built in through mirrored
/// ghost nodes. This operator is diagonalized by the type-I cosine transform.
pub fn neumann_laplacian<T: StencilValue>(g: &Grid, f: &[T]) -> Vec<T> {
    let dxx = apply_x(g, f, d2_line_neumann::<T>);
    let dyy = apply_y(g, f, d2_line_neumann::<T>);
    dxx.into_iter().zip(dyy).map(|(a, b)| a + b).collect()
}

/// Gradient consistent with [`neumann_laplacian`]: centered everywhere with the
/// normal component vanishing on the boundary.
pub fn neumann_gradient<T: StencilValue>(g: &Grid, f: &[T]) -> (Vec<T>, Vec<T>) {
    (
        apply_x(g, f, d1_line_neumann::<T>),
        apply_y(g, f, d1_line_neumann::<T>),
    )
}

/// Trapezoidal quadrature over the rectangle.
pub fn integrate(f: &ScalarField) -> f64 {
    integrate_raw(&f.grid, &f.data)
}

pub(crate) fn integrate_raw(g: &Grid, f: &[f64]) -> f64 {
    let mut total = 0.0;
    for j in 0..g.ny {
        let wy = if j == 0 || j == g.ny - 1 { 0.5 } else { 1.0 };
        let mut row = 0.0;
        for i in 0..g.nx {
            let wx = if i == 0 || i == g.nx - 1 { 0.5 } else { 1.0 };
            row += wx * f[g.idx(i, j)];
        }
        total += wy * row;
    }
    total * g.hx() * g.hy()
}

/// Trapezoidal quadrature over the four edges; corners get weight one half on each edge.
pub fn integrate_boundary(f: &ScalarField) -> f64 {
    EdgeValues::trace(f).integrate_on(&f.grid)
}

/// Outward flux of `X` through the boundary.
pub fn boundary_flux(v: &VectorField) -> f64 {
    EdgeValues::normal_trace(v).integrate_on(&v.grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    South,
    East,
    North,
    West,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::South, Edge::East, Edge::North, Edge::West];

    pub fn normal(self) -> [f64; 2] {
        match self {
            Edge::South => [0.0, -1.0],
            Edge::East => [1.0, 0.0],
            Edge::North => [0.0, 1.0],
            Edge::West => [-1.0, 0.0],
        }
    }

    /// Counter-clockwise unit tangent `nu^perp`.
    pub fn tangent(self) -> [f64; 2] {
        let n = self.normal();
        [-n[1], n[0]]
    }

    /// Number of nodes along the edge.
    pub fn len(self, g: &Grid) -> usize {
        match self {
            Edge::South | Edge::North => g.nx,
            Edge::East | Edge::West => g.ny,
        }
    }

    /// Grid indices `(i, j)` of the `k`-th node along the edge, ordered by
    /// increasing `x` (south, north) or `y` (east, west).
    pub fn node(self, g: &Grid, k: usize) -> (usize, usize) {
        match self {
            Edge::South => (k, 0),
            Edge::North => (k, g.ny - 1),
            Edge::West => (0, k),
            Edge::East => (g.nx - 1, k),
        }
    }

    /// Spacing along the edge.
    pub fn spacing(self, g: &Grid) -> f64 {
        match self {
            Edge::South | Edge::North => g.hx(),
            Edge::East | Edge::West => g.hy(),
        }
    }

    /// Sign relating the edge's node ordering to its counter-clockwise tangent.
    fn orientation(self) -> f64 {
        match self {
            Edge::South | Edge::East => 1.0,
            Edge::North | Edge::West => -1.0,
        }
    }
}

/// One real value per boundary node, stored edge by edge. Corner nodes appear
/// on both of their edges and may carry different values there (a normal flux
/// at a corner depends on which edge it belongs to).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EdgeValues {
    pub south: Vec<f64>,
    pub east: Vec<f64>,
    pub north: Vec<f64>,
    pub west: Vec<f64>,
}

impl EdgeValues {
    pub fn zeros(g: &Grid) -> Self {
        Self::from_fn(g, |_, _, _| 0.0)
    }

    pub fn from_fn(g: &Grid, f: impl Fn(Edge, f64, f64) -> f64) -> Self {
        let mut out = Self {
            south: Vec::new(),
            east: Vec::new(),
            north: Vec::new(),
            west: Vec::new(),
        };
        for e in Edge::ALL {
            let vals = (0..e.len(g))
                .map(|k| {
                    let (i, j) = e.node(g, k);
                    f(e, g.x(i), g.y(j))
                })
                .collect();
            *out.edge_mut(e) = vals;
        }
        out
    }

    /// Boundary trace of a scalar field.
    pub fn trace(f: &ScalarField) -> Self {
        let g = f.grid;
        let mut out = Self::zeros(&g);
        for e in Edge::ALL {
            for k in 0..e.len(&g) {
                let (i, j) = e.node(&g, k);
                out.edge_mut(e)[k] = f.at(i, j);
            }
        }
        out
    }

    /// `X . nu` on every edge.
    pub fn normal_trace(v: &VectorField) -> Self {
        let g = v.grid;
        let mut out = Self::zeros(&g);
        for e in Edge::ALL {
            let n = e.normal();
            for k in 0..e.len(&g) {
                let (i, j) = e.node(&g, k);
                let x = v.at(i, j);
                out.edge_mut(e)[k] = x[0] * n[0] + x[1] * n[1];
            }
        }
        out
    }

    pub fn edge(&self, e: Edge) -> &[f64] {
        match e {
            Edge::South => &self.south,
            Edge::East => &self.east,
            Edge::North => &self.north,
            Edge::West => &self.west,
        }
    }

    pub fn edge_mut(&mut self, e: Edge) -> &mut Vec<f64> {
        match e {
            Edge::South => &mut self.south,
            Edge::East => &mut self.east,
            Edge::North => &mut self.north,
            Edge::West => &mut self.west,
        }
    }

    pub fn matches(&self, g: &Grid) -> bool {
        Edge::ALL.iter().all(|&e| self.edge(e).len() == e.len(g))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            south: self.south.iter().map(|&v| f(v)).collect(),
            east: self.east.iter().map(|&v| f(v)).collect(),
            north: self.north.iter().map(|&v| f(v)).collect(),
            west: self.west.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let z = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect();
        Self {
            south: z(&self.south, &other.south),
            east: z(&self.east, &other.east),
            north: z(&self.north, &other.north),
            west: z(&self.west, &other.west),
        }
    }

    /// Counter-clockwise tangential derivative along each edge, second order
    /// (one-sided at the edge ends).
    pub fn tangential_derivative(&self, g: &Grid) -> Self {
        let mut out = Self::zeros(g);
        for e in Edge::ALL {
            let vals = self.edge(e);
            let n = vals.len();
            let mut d = vec![0.0; n];
            d1_line(vals, 0, 1, n, e.spacing(g), &mut d);
            for v in &mut d {
                *v *= e.orientation();
            }
            *out.edge_mut(e) = d;
        }
        out
    }

    /// Trapezoidal line integral over all four edges.
    pub fn integrate_on(&self, g: &Grid) -> f64 {
        let mut total = 0.0;
        for e in Edge::ALL {
            let v = self.edge(e);
            let n = v.len();
            let inner: f64 = v[1..n - 1].iter().sum();
            total += (inner + 0.5 * (v[0] + v[n - 1])) * e.spacing(g);
        }
        total
    }

    /// Sum of absolute values weighted like [`EdgeValues::integrate_on`].
    pub fn integrate_abs_on(&self, g: &Grid) -> f64 {
        self.map(f64::abs).integrate_on(g)
    }

    pub fn max_abs(&self) -> f64 {
        Edge::ALL
            .iter()
            .flat_map(|&e| self.edge(e).iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
