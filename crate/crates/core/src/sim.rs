//! Time integration of the forced Ginzburg-Landau equation
//!
//! `(alpha + i beta L) u_t = lap u + u (1 - |u|^2) / eps^2 + grad h . grad u
//!                          + 2 i Z_eps . grad u + f_eps u`,
//!
//! with `L = |log eps|`, `h = log b` and `Z_eps = lambda L Z`, and of the
//! pinned equation `(alpha + i beta L) u_t = lap u + u (b - |u|^2) / eps^2`,
//! both under homogeneous Neumann conditions.
//!
//! Stepping is first-order IMEX: the Laplacian is implicit and inverted
//! exactly by the type-I cosine transform, everything else is explicit.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{
    gradient, neumann_gradient, neumann_laplacian, ComplexField, Grid, ScalarField, VectorField,
};
use crate::pinning::{assemble_z_and_f, pinning_potential, AuxiliaryFields};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    ForcedGl,
    PinnedGl,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub eps: f64,
    pub lambda: f64,
    pub flavor: Flavor,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be positive", self.alpha));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        if !self.beta.is_finite() {
            return bad("beta must be finite".into());
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return bad(format!("eps = {} outside (0, 1/2)", self.eps));
        }
        if self.log_eps() < 1.0 {
            return bad(format!("|log eps| = {} is below 1", self.log_eps()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be non-negative", self.lambda));
        }
        Ok(())
    }

    /// `|log eps|`.
    pub fn log_eps(&self) -> f64 {
        self.eps.ln().abs()
    }

    /// The time-derivative multiplier `alpha + i beta |log eps|`.
    pub fn multiplier(&self) -> Complex64 {
        Complex64::new(self.alpha, self.beta * self.log_eps())
    }
}

/// Coefficient fields of the forced equation.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub b: ScalarField,
    pub grad_h: VectorField,
    /// `Z_eps = lambda |log eps| Z`.
    pub z_eps: VectorField,
    pub f_eps: ScalarField,
}

impl Coefficients {
    /// `h = log b` with `grad h` from the grid stencils.
    pub fn new(b: ScalarField, z_eps: VectorField, f_eps: ScalarField) -> Result<Self> {
        b.grid().check(z_eps.grid(), "coefficients")?;
        b.grid().check(f_eps.grid(), "coefficients")?;
        if b.min() <= 0.0 {
            return Err(Error::InvalidLandscape(format!("min b = {}", b.min())));
        }
        let grad_h = gradient(&b.map(f64::ln));
        Ok(Self {
            b,
            grad_h,
            z_eps,
            f_eps,
        })
    }

    /// Pinning only: `Z = 0` and `f = lap(sqrt b) / sqrt b`.
    pub fn unforced(b: ScalarField) -> Result<Self> {
        let g = *b.grid();
        let f = pinning_potential(&b);
        Self::new(b, VectorField::zeros(g), f)
    }

    /// Coefficients from the auxiliary fields: `Z_eps = lambda |log eps| Z`
    /// and the matching `f_eps`.
    pub fn from_auxiliary(
        aux: &AuxiliaryFields,
        b: ScalarField,
        params: &ModelParams,
    ) -> Result<Self> {
        let (lz, f) = assemble_z_and_f(aux, &b, params.beta, params.eps, params.lambda);
        Self::new(b, lz.scaled(params.log_eps()), f)
    }

    /// Replace the grid estimate of `grad h` by exact values.
    pub fn with_grad_h(mut self, grad_h: VectorField) -> Result<Self> {
        self.b.grid().check(grad_h.grid(), "grad h")?;
        self.grad_h = grad_h;
        Ok(self)
    }

    /// `max |f| + max |grad f|`, the discrete `C^1` norm of `f_eps`.
    pub fn f_c1_norm(&self) -> f64 {
        self.f_eps.max_abs() + gradient(&self.f_eps).max_abs()
    }

    /// `max |grad h| + 2 max |Z_eps|`, the explicit transport speed.
    pub fn transport_speed(&self) -> f64 {
        self.grad_h.max_abs() + 2.0 * self.z_eps.max_abs()
    }
}

/// Which equation a [`Simulator`] advances.
#[derive(Debug, Clone)]
enum Model {
    Forced(Arc<Coefficients>),
    /// The pinned equation in the unknown `u`.
    PinnedDirect {
        b: ScalarField,
    },
    /// The pinned equation advanced in `v = u / sqrt b`:
    /// `c v_t = lap v + b v (1 - |v|^2) / eps^2 + grad log b . grad v + v lap(sqrt b) / sqrt b`.
    PinnedSubstituted {
        b: ScalarField,
        sqrt_b: ScalarField,
        grad_h: VectorField,
        potential: ScalarField,
    },
}

/// Form in which the pinned equation is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinnedForm {
    Direct,
    Substituted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: ComplexField,
}

/// Solver for `(c - dt lap_N) u = r` with the mirrored-ghost Neumann Laplacian.
#[derive(Clone)]
struct NeumannHelmholtz {
    grid: Grid,
    fft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
}

impl std::fmt::Debug for NeumannHelmholtz {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannHelmholtz")
            .field("grid", &self.grid)
            .finish()
    }
}

fn mirror_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / (2.0 * (n - 1) as f64)).sin();
            -4.0 * s * s / (h * h)
        })
        .collect()
}

/// Unnormalized type-I cosine transform of `n` strided samples through an
/// FFT of the even extension of length `2(n - 1)`.
fn dct1_line(
    fft: &dyn Fft<f64>,
    data: &mut [Complex64],
    start: usize,
    stride: usize,
    n: usize,
    buf: &mut Vec<Complex64>,
) {
    buf.clear();
    buf.extend((0..n).map(|k| data[start + k * stride]));
    buf.extend((1..n - 1).rev().map(|k| data[start + k * stride]));
    fft.process(buf);
    for k in 0..n {
        data[start + k * stride] = buf[k];
    }
}

impl NeumannHelmholtz {
    fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft_x: planner.plan_fft_forward(2 * (grid.nx() - 1)),
            fft_y: planner.plan_fft_forward(2 * (grid.ny() - 1)),
            eig_x: mirror_eigenvalues(grid.nx(), grid.hx()),
            eig_y: mirror_eigenvalues(grid.ny(), grid.hy()),
            grid,
        }
    }

    fn transform(&self, data: &mut [Complex64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut buf = Vec::with_capacity(2 * nx.max(ny));
        for j in 0..ny {
            dct1_line(self.fft_x.as_ref(), data, j * nx, 1, nx, &mut buf);
        }
        for i in 0..nx {
            dct1_line(self.fft_y.as_ref(), data, i, nx, ny, &mut buf);
        }
    }

    fn solve(&self, rhs: &mut [Complex64], c: Complex64, dt: f64) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        self.transform(rhs);
        let norm = 1.0 / (4.0 * ((nx - 1) * (ny - 1)) as f64);
        for j in 0..ny {
            for i in 0..nx {
                let d = c - dt * (self.eig_x[i] + self.eig_y[j]);
                rhs[j * nx + i] *= norm / d;
            }
        }
        self.transform(rhs);
    }
}

/// Neumann-mirror gradient of a complex field.
fn grad_n(u: &ComplexField) -> (Vec<Complex64>, Vec<Complex64>) {
    neumann_gradient(u.grid(), u.data())
}

/// Explicit (non-Laplacian) part of the forced equation's right-hand side.
fn forced_explicit(u: &ComplexField, c: &Coefficients, eps: f64) -> Vec<Complex64> {
    let (ux, uy) = grad_n(u);
    let ie2 = 1.0 / (eps * eps);
    let (hx, hy) = (c.grad_h.xs(), c.grad_h.ys());
    let (zx, zy) = (c.z_eps.xs(), c.z_eps.ys());
    let f = c.f_eps.data();
    let i2 = Complex64::new(0.0, 2.0);
    u.data()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            v * ((1.0 - v.norm_sqr()) * ie2 + f[k])
                + ux[k] * hx[k]
                + uy[k] * hy[k]
                + i2 * (ux[k] * zx[k] + uy[k] * zy[k])
        })
        .collect()
}

fn pinned_explicit(u: &ComplexField, b: &ScalarField, eps: f64) -> Vec<Complex64> {
    let ie2 = 1.0 / (eps * eps);
    u.data()
        .iter()
        .zip(b.data())
        .map(|(&v, &bk)| v * ((bk - v.norm_sqr()) * ie2))
        .collect()
}

fn substituted_explicit(
    v: &ComplexField,
    b: &ScalarField,
    grad_h: &VectorField,
    potential: &ScalarField,
    eps: f64,
) -> Vec<Complex64> {
    let (vx, vy) = grad_n(v);
    let ie2 = 1.0 / (eps * eps);
    let (hx, hy) = (grad_h.xs(), grad_h.ys());
    let (bd, p) = (b.data(), potential.data());
    v.data()
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            w * (bd[k] * (1.0 - w.norm_sqr()) * ie2 + p[k]) + vx[k] * hx[k] + vy[k] * hy[k]
        })
        .collect()
}

fn finish_rhs(u: &ComplexField, explicit: Vec<Complex64>, c: Complex64) -> ComplexField {
    let lap = neumann_laplacian(u.grid(), u.data());
    let inv = 1.0 / c;
    ComplexField::from_vec_unchecked(
        *u.grid(),
        lap.into_iter()
            .zip(explicit)
            .map(|(l, e)| (l + e) * inv)
            .collect(),
    )
}

/// `u_t` for the forced equation, Neumann stencils at the boundary.
pub fn rhs_forced_gl(
    u: &ComplexField,
    coeffs: &Coefficients,
    params: &ModelParams,
) -> Result<ComplexField> {
    u.grid().check(coeffs.b.grid(), "forced rhs")?;
    let e = forced_explicit(u, coeffs, params.eps);
    Ok(finish_rhs(u, e, params.multiplier()))
}

/// `u_t` for the pinned equation in the unknown `u`.
pub fn rhs_pinned_gl(
    u: &ComplexField,
    b: &ScalarField,
    params: &ModelParams,
) -> Result<ComplexField> {
    u.grid().check(b.grid(), "pinned rhs")?;
    let e = pinned_explicit(u, b, params.eps);
    Ok(finish_rhs(u, e, params.multiplier()))
}

/// `v_t` for the pinned equation rewritten in `v = u / sqrt b`.
pub fn rhs_pinned_substituted(
    v: &ComplexField,
    b: &ScalarField,
    params: &ModelParams,
) -> Result<ComplexField> {
    v.grid().check(b.grid(), "substituted rhs")?;
    let grad_h = gradient(&b.map(f64::ln));
    let e = substituted_explicit(v, b, &grad_h, &pinning_potential(b), params.eps);
    Ok(finish_rhs(v, e, params.multiplier()))
}

/// Largest `|u|` tolerated after a step.
pub const BLOW_UP_MODULUS: f64 = 2.0;

/// Owns the coefficient fields and the implicit solver for one run.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    model: Model,
    helmholtz: NeumannHelmholtz,
}

impl Simulator {
    pub fn forced(params: ModelParams, coeffs: Coefficients) -> Result<Self> {
        params.validate()?;
        let grid = *coeffs.b.grid();
        Ok(Self {
            params,
            model: Model::Forced(Arc::new(coeffs)),
            helmholtz: NeumannHelmholtz::new(grid),
        })
    }

    pub fn pinned(params: ModelParams, b: ScalarField, form: PinnedForm) -> Result<Self> {
        params.validate()?;
        if b.min() <= 0.0 {
            return Err(Error::InvalidLandscape(format!("min b = {}", b.min())));
        }
        let grid = *b.grid();
        let model = match form {
            PinnedForm::Direct => Model::PinnedDirect { b },
            PinnedForm::Substituted => Model::PinnedSubstituted {
                sqrt_b: b.map(f64::sqrt),
                grad_h: gradient(&b.map(f64::ln)),
                potential: pinning_potential(&b),
                b,
            },
        };
        Ok(Self {
            params,
            model,
            helmholtz: NeumannHelmholtz::new(grid),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.helmholtz.grid
    }

    /// Forcing coefficients of a forced run.
    pub fn coefficients(&self) -> Option<&Coefficients> {
        match &self.model {
            Model::Forced(c) => Some(c),
            _ => None,
        }
    }

    /// The pinning weight `b` of the run.
    pub fn b(&self) -> &ScalarField {
        match &self.model {
            Model::Forced(c) => &c.b,
            Model::PinnedDirect { b } | Model::PinnedSubstituted { b, .. } => b,
        }
    }

    /// Whether `||f_eps||_{C^1} <= 1/eps` holds on the grid (always true for pinned runs).
    pub fn forcing_bound_holds(&self) -> bool {
        match &self.model {
            Model::Forced(c) => c.f_c1_norm() <= 1.0 / self.params.eps,
            _ => true,
        }
    }

    /// Default step `min(0.2 alpha eps^2 / max(1, max b), 0.5 alpha / v^2)`,
    /// `v` the explicit transport speed.
    pub fn default_dt(&self) -> f64 {
        let a = self.params.alpha;
        let reaction = 0.2 * a * self.params.eps.powi(2) / self.b().max().max(1.0);
        let speed = match &self.model {
            Model::Forced(c) => c.transport_speed(),
            Model::PinnedSubstituted { grad_h, .. } => grad_h.max_abs(),
            Model::PinnedDirect { .. } => 0.0,
        };
        if speed > 0.0 {
            reaction.min(0.5 * a / (speed * speed))
        } else {
            reaction
        }
    }

    /// `u_t` at the given state.
    pub fn rhs(&self, u: &ComplexField) -> Result<ComplexField> {
        match &self.model {
            Model::Forced(c) => rhs_forced_gl(u, c, &self.params),
            Model::PinnedDirect { b } => rhs_pinned_gl(u, b, &self.params),
            Model::PinnedSubstituted { sqrt_b, .. } => {
                let v = self.to_v(u, sqrt_b);
                let vt = self.advance_rhs_v(&v)?;
                Ok(ComplexField::from_vec_unchecked(
                    *u.grid(),
                    vt.data()
                        .iter()
                        .zip(sqrt_b.data())
                        .map(|(w, s)| w * s)
                        .collect(),
                ))
            }
        }
    }

    fn advance_rhs_v(&self, v: &ComplexField) -> Result<ComplexField> {
        match &self.model {
            Model::PinnedSubstituted {
                b,
                grad_h,
                potential,
                ..
            } => {
                let e = substituted_explicit(v, b, grad_h, potential, self.params.eps);
                Ok(finish_rhs(v, e, self.params.multiplier()))
            }
            _ => unreachable!("only the substituted model works in v"),
        }
    }

    fn to_v(&self, u: &ComplexField, sqrt_b: &ScalarField) -> ComplexField {
        ComplexField::from_vec_unchecked(
            *u.grid(),
            u.data()
                .iter()
                .zip(sqrt_b.data())
                .map(|(w, s)| w / s)
                .collect(),
        )
    }

    /// One IMEX step: `(c - dt lap) u' = c u + dt N(u)`.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} must be positive"
            )));
        }
        state.u.grid().check(self.grid(), "simulation state")?;
        let c = self.params.multiplier();
        let eps = self.params.eps;
        let (w, explicit) = match &self.model {
            Model::Forced(co) => (state.u.clone(), forced_explicit(&state.u, co, eps)),
            Model::PinnedDirect { b } => (state.u.clone(), pinned_explicit(&state.u, b, eps)),
            Model::PinnedSubstituted {
                b,
                sqrt_b,
                grad_h,
                potential,
            } => {
                let v = self.to_v(&state.u, sqrt_b);
                let e = substituted_explicit(&v, b, grad_h, potential, eps);
                (v, e)
            }
        };
        let mut data: Vec<Complex64> = w
            .data()
            .iter()
            .zip(&explicit)
            .map(|(&x, &n)| c * x + n * dt)
            .collect();
        self.helmholtz.solve(&mut data, c, dt);
        if let Model::PinnedSubstituted { sqrt_b, .. } = &self.model {
            for (x, s) in data.iter_mut().zip(sqrt_b.data()) {
                *x *= s;
            }
        }
        let u = ComplexField::from_vec_unchecked(*self.grid(), data);
        let t = state.t + dt;
        let m = u.max_modulus();
        if !(m <= BLOW_UP_MODULUS) {
            return Err(Error::StepRejected { t, max_modulus: m });
        }
        Ok(SimState { t, u })
    }

    /// Advance to `horizon` in equal steps no longer than `dt`, calling
    /// `observe` on the initial state and after every `every`-th step and
    /// the last one.
    pub fn run(
        &self,
        initial: SimState,
        horizon: f64,
        dt: f64,
        every: usize,
        mut observe: impl FnMut(&SimState) -> Result<()>,
    ) -> Result<RunSummary> {
        let span = horizon - initial.t;
        if !(span > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} not after t = {}",
                initial.t
            )));
        }
        let steps = (span / dt).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        let every = every.max(1);
        let mut state = initial;
        let mut max_modulus = state.u.max_modulus();
        observe(&state)?;
        for n in 1..=steps {
            let mut next = self.step(&state, dt)?;
            if n == steps {
                next.t = horizon;
            }
            state = next;
            max_modulus = max_modulus.max(state.u.max_modulus());
            if n % every == 0 || n == steps {
                observe(&state)?;
            }
        }
        Ok(RunSummary {
            steps,
            dt,
            max_modulus,
            final_state: state,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    /// Largest `|u|` seen; values above 1 are monitored, never clipped.
    pub max_modulus: f64,
    pub final_state: SimState,
}

/// A prescribed vortex: position and degree `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VortexSpec {
    pub position: [f64; 2],
    pub degree: i32,
}

/// `u = sqrt(b) prod_i tanh(|x - a_i| / eps) e^{i d_i theta_i}`, the `sqrt b`
/// factor omitted for the forced flavor.
pub fn make_well_prepared(
    vortices: &[VortexSpec],
    params: &ModelParams,
    b: &ScalarField,
) -> Result<ComplexField> {
    params.validate()?;
    let g = *b.grid();
    let eps = params.eps;
    let sep = 8.0 * eps;
    for (k, v) in vortices.iter().enumerate() {
        if v.degree != 1 && v.degree != -1 {
            return Err(Error::PlacementError(format!(
                "vortex {k} has degree {}",
                v.degree
            )));
        }
        let [x, y] = v.position;
        if !g.contains(x, y) || g.boundary_distance(x, y) < sep {
            return Err(Error::PlacementError(format!(
                "vortex {k} at ({x}, {y}) is closer than 8 eps to the boundary"
            )));
        }
        for (m, w) in vortices[..k].iter().enumerate() {
            let d = ((x - w.position[0]).powi(2) + (y - w.position[1]).powi(2)).sqrt();
            if d < sep {
                return Err(Error::PlacementError(format!(
                    "vortices {m} and {k} are {d} apart, closer than 8 eps"
                )));
            }
        }
    }
    let mut u = ComplexField::from_fn(g, |x, y| {
        vortices.iter().fold(Complex64::new(1.0, 0.0), |acc, v| {
            let (dx, dy) = (x - v.position[0], y - v.position[1]);
            let r = (dx * dx + dy * dy).sqrt();
            let phase = Complex64::from_polar(1.0, v.degree as f64 * dy.atan2(dx));
            acc * phase * (r / eps).tanh()
        })
    });
    if params.flavor == Flavor::PinnedGl {
        for (z, &bk) in u.data_mut().iter_mut().zip(b.data()) {
            *z *= bk.sqrt();
        }
    }
    Ok(u)
}
