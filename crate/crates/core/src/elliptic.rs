//! Symmetric node-centered finite-volume discretizations of
//! `-div(k grad u) + c u = s` with Neumann or Dirichlet data, solved by
//! Jacobi-preconditioned conjugate gradients.
//!
//! Every node owns the control volume of its trapezoid weight (half cells on
//! edges, quarter cells at corners). Neumann rows are the integral of the PDE
//! over that volume, so the assembled operator is symmetric and the sum of all
//! rows is an exact discrete divergence theorem. Face diffusivities are the
//! arithmetic mean of the nodal values on either side.

use crate::error::{Error, Result};
use crate::grid::{Edge, EdgeValues, Grid, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop once `|r| <= rel_tol * |rhs|`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means `50 * max(nx, ny)`.
    pub max_iter: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolverSettings {
    fn cap(&self, g: &Grid) -> usize {
        self.max_iter.unwrap_or(50 * g.nx().max(g.ny()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Diffusion coefficient `k` of `-div(k grad u)`.
#[derive(Debug, Clone, Copy)]
pub enum Diffusivity<'a> {
    Constant(f64),
    Nodal(&'a ScalarField),
}

impl Diffusivity<'_> {
    #[inline]
    fn face(&self, a: usize, b: usize) -> f64 {
        match self {
            Diffusivity::Constant(k) => *k,
            Diffusivity::Nodal(f) => 0.5 * (f.data()[a] + f.data()[b]),
        }
    }
}

fn edge_weight(g: &Grid, e: Edge, k: usize) -> f64 {
    let n = e.len(g);
    let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    w * e.spacing(g)
}

/// Integrated boundary load `sum over boundary segments of q * length` per node.
pub fn boundary_load(g: &Grid, flux: &EdgeValues) -> Vec<f64> {
    let mut load = vec![0.0; g.len()];
    for e in Edge::ALL {
        for (k, &q) in flux.edge(e).iter().enumerate() {
            let (i, j) = e.node(g, k);
            load[g.idx(i, j)] += q * edge_weight(g, e, k);
        }
    }
    load
}

/// `s * W` per node: the source integrated over each control volume.
pub fn volume_load(source: &ScalarField) -> Vec<f64> {
    let g = *source.grid();
    let mut load = vec![0.0; g.len()];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            load[k] = source.data()[k] * g.node_weight(i, j);
        }
    }
    load
}

/// Finite-volume integral of `div Y` over every control volume, using face
/// averages of the nodal field inside and `boundary_normal` (`Y . nu`) on the
/// boundary segments. Summing over all nodes telescopes to the boundary
/// quadrature of `boundary_normal`.
pub fn divergence_load(y: &VectorField, boundary_normal: &EdgeValues) -> Vec<f64> {
    let g = *y.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let mut load = boundary_load(&g, boundary_normal);
    let wy = |j: usize| if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
    let wx = |i: usize| if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
    for j in 0..ny {
        for i in 0..nx - 1 {
            let (a, b) = (g.idx(i, j), g.idx(i + 1, j));
            let flux = 0.5 * (y.xs()[a] + y.xs()[b]) * hy * wy(j);
            load[a] += flux;
            load[b] -= flux;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let (a, b) = (g.idx(i, j), g.idx(i, j + 1));
            let flux = 0.5 * (y.ys()[a] + y.ys()[b]) * hx * wx(i);
            load[a] += flux;
            load[b] -= flux;
        }
    }
    load
}

/// Area-weighted operator `u -> int_cell (-div(k grad u) + c u)` with natural
/// (flux) boundary rows.
struct NeumannOperator<'a> {
    grid: Grid,
    kappa: Diffusivity<'a>,
    reaction: Option<&'a ScalarField>,
    diag: Vec<f64>,
}

impl<'a> NeumannOperator<'a> {
    fn new(grid: Grid, kappa: Diffusivity<'a>, reaction: Option<&'a ScalarField>) -> Self {
        let mut op = Self {
            grid,
            kappa,
            reaction,
            diag: Vec::new(),
        };
        let mut diag = vec![0.0; grid.len()];
        op.for_each_face(|a, b, c| {
            diag[a] += c;
            diag[b] += c;
        });
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let k = grid.idx(i, j);
                if let Some(r) = reaction {
                    diag[k] += r.data()[k] * grid.node_weight(i, j);
                }
            }
        }
        op.diag = diag;
        op
    }

    /// Calls `f(a, b, conductance)` for every interior face between nodes `a`, `b`.
    fn for_each_face(&self, mut f: impl FnMut(usize, usize, f64)) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let (hx, hy) = (g.hx(), g.hy());
        for j in 0..ny {
            let wy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
            for i in 0..nx - 1 {
                let (a, b) = (g.idx(i, j), g.idx(i + 1, j));
                f(a, b, self.kappa.face(a, b) * wy * hy / hx);
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let wx = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
                let (a, b) = (g.idx(i, j), g.idx(i, j + 1));
                f(a, b, self.kappa.face(a, b) * wx * hx / hy);
            }
        }
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let k = g.idx(i, j);
                out[k] = match self.reaction {
                    Some(r) => r.data()[k] * g.node_weight(i, j) * u[k],
                    None => 0.0,
                };
            }
        }
        self.for_each_face(|a, b, c| {
            let d = c * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        });
    }
}

/// Interior rows of `-div(k grad u) + c u` with boundary unknowns eliminated.
/// Vectors are full-size with zeros on boundary nodes.
struct DirichletOperator<'a> {
    grid: Grid,
    kappa: Diffusivity<'a>,
    reaction: Option<&'a ScalarField>,
    diag: Vec<f64>,
}

impl<'a> DirichletOperator<'a> {
    fn new(grid: Grid, kappa: Diffusivity<'a>, reaction: Option<&'a ScalarField>) -> Self {
        let mut diag = vec![1.0; grid.len()];
        let (ihx2, ihy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
        for j in 1..grid.ny() - 1 {
            for i in 1..grid.nx() - 1 {
                let k = grid.idx(i, j);
                let mut d = (kappa.face(k, k - 1) + kappa.face(k, k + 1)) * ihx2
                    + (kappa.face(k, k - grid.nx()) + kappa.face(k, k + grid.nx())) * ihy2;
                if let Some(r) = reaction {
                    d += r.data()[k];
                }
                diag[k] = d;
            }
        }
        Self {
            grid,
            kappa,
            reaction,
            diag,
        }
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let nx = g.nx();
        let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 1..g.ny() - 1 {
            for i in 1..nx - 1 {
                let k = g.idx(i, j);
                let nb = |m: usize| {
                    if g.is_boundary(m % nx, m / nx) {
                        0.0
                    } else {
                        u[m]
                    }
                };
                let mut v = (self.kappa.face(k, k - 1) * (u[k] - nb(k - 1))
                    + self.kappa.face(k, k + 1) * (u[k] - nb(k + 1)))
                    * ihx2
                    + (self.kappa.face(k, k - nx) * (u[k] - nb(k - nx))
                        + self.kappa.face(k, k + nx) * (u[k] - nb(k + nx)))
                        * ihy2;
                if let Some(r) = self.reaction {
                    v += r.data()[k] * u[k];
                }
                out[k] = v;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
/// With `deflate_constants`, residuals are kept orthogonal to constants,
/// which makes a consistent singular Neumann system solvable.
fn pcg(
    problem: &'static str,
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    rhs: &[f64],
    tol: f64,
    cap: usize,
    deflate_constants: bool,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                rel_residual: 0.0,
            },
        ));
    }
    let mut r = rhs.to_vec();
    let deflate = |v: &mut [f64]| {
        if deflate_constants {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|e| *e -= mean);
        }
    };
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    deflate(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=cap {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NonConvergence {
                problem,
                iterations: it,
                residual: dot(&r, &r).sqrt() / bnorm,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    rel_residual: rel,
                },
            ));
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        deflate(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NonConvergence {
        problem,
        iterations: cap,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// `-div(k grad u) + c u = s` in the rectangle, `k du/dnu = q` on the boundary,
/// with `c > 0` somewhere so that the problem is nonsingular.
pub fn solve_neumann(
    problem: &'static str,
    grid: Grid,
    kappa: Diffusivity<'_>,
    reaction: &ScalarField,
    load: &[f64],
    settings: SolverSettings,
) -> Result<(ScalarField, SolveStats)> {
    let op = NeumannOperator::new(grid, kappa, Some(reaction));
    let (u, stats) = pcg(
        problem,
        |a, b| op.apply(a, b),
        &op.diag,
        load,
        settings.rel_tol,
        settings.cap(&grid),
        false,
    )?;
    Ok((ScalarField::from_vec_unchecked(grid, u), stats))
}

/// Outcome of a pure Neumann solve.
#[derive(Debug, Clone)]
pub struct PureNeumannSolution {
    /// Representative with zero trapezoidal mean.
    pub field: ScalarField,
    pub stats: SolveStats,
    /// Sum of the load before projection (discrete compatibility defect).
    pub defect: f64,
    /// `defect` divided by the load scale.
    pub relative_defect: f64,
}

/// Default relative tolerance on the compatibility defect.
pub const COMPATIBILITY_TOL: f64 = 1e-6;

/// `-div(k grad u) = s`, `k du/dnu = q` from an integrated load vector. The
/// load must sum to zero up to `compat_tol` relative to `scale`; the residual
/// defect is then removed in proportion to the control-volume areas and the
/// solution is normalized to zero mean.
pub fn solve_pure_neumann(
    problem: &'static str,
    grid: Grid,
    kappa: Diffusivity<'_>,
    load: &[f64],
    scale: f64,
    compat_tol: f64,
    settings: SolverSettings,
) -> Result<PureNeumannSolution> {
    let defect: f64 = load.iter().sum();
    let relative_defect = if scale > 0.0 {
        defect.abs() / scale
    } else {
        0.0
    };
    if relative_defect > compat_tol {
        return Err(Error::CompatibilityViolation {
            defect: relative_defect,
            tolerance: compat_tol,
        });
    }
    let area = grid.lx() * grid.ly();
    let mut projected = load.to_vec();
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            projected[grid.idx(i, j)] -= defect * grid.node_weight(i, j) / area;
        }
    }
    let op = NeumannOperator::new(grid, kappa, None);
    let (mut u, stats) = pcg(
        problem,
        |a, b| op.apply(a, b),
        &op.diag,
        &projected,
        settings.rel_tol,
        settings.cap(&grid),
        true,
    )?;
    let mean = crate::grid::integrate_raw(&grid, &u) / area;
    u.iter_mut().for_each(|v| *v -= mean);
    Ok(PureNeumannSolution {
        field: ScalarField::from_vec_unchecked(grid, u),
        stats,
        defect,
        relative_defect,
    })
}

/// `-div(k grad u) + c u = s` in the interior, `u = g` on boundary nodes.
/// `boundary` holds `g` edge by edge; corner values are taken from the
/// south/north edges.
pub fn solve_dirichlet(
    problem: &'static str,
    kappa: Diffusivity<'_>,
    reaction: Option<&ScalarField>,
    source: &ScalarField,
    boundary: &EdgeValues,
    settings: SolverSettings,
) -> Result<(ScalarField, SolveStats)> {
    let grid = *source.grid();
    let nx = grid.nx();
    let mut trace = vec![0.0; grid.len()];
    for e in [Edge::West, Edge::East, Edge::South, Edge::North] {
        for (k, &v) in boundary.edge(e).iter().enumerate() {
            let (i, j) = e.node(&grid, k);
            trace[grid.idx(i, j)] = v;
        }
    }
    let (ihx2, ihy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut rhs = vec![0.0; grid.len()];
    for j in 1..grid.ny() - 1 {
        for i in 1..nx - 1 {
            let k = grid.idx(i, j);
            let mut v = source.data()[k];
            for (m, ih2) in [(k - 1, ihx2), (k + 1, ihx2), (k - nx, ihy2), (k + nx, ihy2)] {
                if grid.is_boundary(m % nx, m / nx) {
                    v += kappa.face(k, m) * ih2 * trace[m];
                }
            }
            rhs[k] = v;
        }
    }
    let op = DirichletOperator::new(grid, kappa, reaction);
    let (mut u, stats) = pcg(
        problem,
        |a, b| op.apply(a, b),
        &op.diag,
        &rhs,
        settings.rel_tol,
        settings.cap(&grid),
        false,
    )?;
    for j in 0..grid.ny() {
        for i in 0..nx {
            if grid.is_boundary(i, j) {
                let k = grid.idx(i, j);
                u[k] = trace[k];
            }
        }
    }
    Ok((ScalarField::from_vec_unchecked(grid, u), stats))
}
