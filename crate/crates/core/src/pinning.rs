//! Auxiliary elliptic fields that turn the applied current and field into an
//! effective force `Z = grad psi0 - X0` and potential `f_eps`.
//!
//! Pipeline (all with `b` fixed):
//!
//! 1. `-sigma lap phi0 + alpha b phi0 = 0`, `sigma dphi0/dnu = (bJ - I) . nu`
//! 2. `-div(grad h0 / b) + h0 = -sigma perp_grad(1/b) . grad phi0`, `h0 = H`
//! 3. `lap xi0 = h0`, `xi0 = 0`, and `X0 = perp_grad xi0`
//! 4. `lap psi0 = div((sigma grad phi0 - perp_grad h0) / b)`, `dpsi0/dnu = J . nu`
//!
//! The current `I` enters only through `I . nu = dH/dtau`, the tangential
//! derivative of the boundary field. Step 1 hands its boundary flux to step
//! 4, so the discrete compatibility condition of the pure Neumann problem
//! holds to roundoff whenever the inputs are consistent.

use crate::elliptic::{
    boundary_load, divergence_load, solve_dirichlet, solve_neumann, solve_pure_neumann,
    volume_load, Diffusivity, PureNeumannSolution, SolveStats, SolverSettings, COMPATIBILITY_TOL,
};
use crate::error::{Error, Result};
use crate::grid::{
    curl, gradient, laplacian, perp, perp_gradient, Edge, EdgeValues, Grid, ScalarField,
    VectorField,
};

/// Applied field `H` and current `J` on the boundary nodes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundaryData {
    pub h: EdgeValues,
    pub jx: EdgeValues,
    pub jy: EdgeValues,
}

impl BoundaryData {
    pub fn new(grid: &Grid, h: EdgeValues, jx: EdgeValues, jy: EdgeValues) -> Result<Self> {
        for (name, v) in [("H", &h), ("Jx", &jx), ("Jy", &jy)] {
            if !v.matches(grid) {
                return Err(Error::ShapeMismatch(format!(
                    "boundary data {name} does not match the grid edges"
                )));
            }
            if !v.max_abs().is_finite() {
                return Err(Error::NonFinite(format!("boundary data {name}")));
            }
        }
        Ok(Self { h, jx, jy })
    }

    pub fn zero(grid: &Grid) -> Self {
        let z = EdgeValues::zeros(grid);
        Self {
            h: z.clone(),
            jx: z.clone(),
            jy: z,
        }
    }

    pub fn from_fns(
        grid: &Grid,
        h: impl Fn(f64, f64) -> f64,
        j: impl Fn(f64, f64) -> [f64; 2],
    ) -> Result<Self> {
        Self::new(
            grid,
            EdgeValues::from_fn(grid, |_, x, y| h(x, y)),
            EdgeValues::from_fn(grid, |_, x, y| j(x, y)[0]),
            EdgeValues::from_fn(grid, |_, x, y| j(x, y)[1]),
        )
    }

    /// `J . nu` edge by edge.
    pub fn j_normal(&self) -> EdgeValues {
        let mut out = self.jx.clone();
        for e in Edge::ALL {
            let n = e.normal();
            let (jx, jy) = (self.jx.edge(e), self.jy.edge(e));
            for (k, v) in out.edge_mut(e).iter_mut().enumerate() {
                *v = jx[k] * n[0] + jy[k] * n[1];
            }
        }
        out
    }

    /// `I . nu = dH/dtau` from `I = -perp_grad H`.
    pub fn i_normal(&self, grid: &Grid) -> EdgeValues {
        self.h.tangential_derivative(grid)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            h: self.h.map(|v| v * s),
            jx: self.jx.map(|v| v * s),
            jy: self.jy.map(|v| v * s),
        }
    }
}

/// Electric potential together with the boundary flux `sigma dphi0/dnu` it
/// was solved with.
#[derive(Debug, Clone)]
pub struct Phi0 {
    pub field: ScalarField,
    pub normal_flux: EdgeValues,
    pub stats: SolveStats,
}

fn check_b(b: &ScalarField) -> Result<()> {
    if !b.is_finite() || b.min() <= 0.0 {
        return Err(Error::InvalidLandscape(format!("min b = {}", b.min())));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// `-sigma lap phi + alpha b phi = s` with `sigma dphi/dnu = flux`.
pub fn solve_phi0_with_source(
    b: &ScalarField,
    alpha: f64,
    sigma: f64,
    source: &ScalarField,
    flux: &EdgeValues,
    settings: SolverSettings,
) -> Result<Phi0> {
    check_b(b)?;
    check_positive("alpha", alpha)?;
    check_positive("sigma", sigma)?;
    let grid = *b.grid();
    let reaction = b.scaled(alpha);
    let mut load = volume_load(source);
    for (l, q) in load.iter_mut().zip(boundary_load(&grid, flux)) {
        *l += q;
    }
    let (field, stats) = solve_neumann(
        "phi0",
        grid,
        Diffusivity::Constant(sigma),
        &reaction,
        &load,
        settings,
    )?;
    Ok(Phi0 {
        field,
        normal_flux: flux.clone(),
        stats,
    })
}

pub fn solve_phi0(
    b: &ScalarField,
    bd: &BoundaryData,
    alpha: f64,
    sigma: f64,
    settings: SolverSettings,
) -> Result<Phi0> {
    let grid = *b.grid();
    let bt = EdgeValues::trace(b);
    let flux = bt
        .zip_map(&bd.j_normal(), |b, jn| b * jn)
        .zip_map(&bd.i_normal(&grid), |bj, i| bj - i);
    solve_phi0_with_source(b, alpha, sigma, &ScalarField::zeros(grid), &flux, settings)
}

/// `-div(grad h / b) + h = s` with `h = trace` on the boundary.
pub fn solve_h0_with_source(
    b: &ScalarField,
    source: &ScalarField,
    trace: &EdgeValues,
    settings: SolverSettings,
) -> Result<(ScalarField, SolveStats)> {
    check_b(b)?;
    let inv_b = b.map(|v| 1.0 / v);
    let one = ScalarField::constant(*b.grid(), 1.0);
    solve_dirichlet(
        "h0",
        Diffusivity::Nodal(&inv_b),
        Some(&one),
        source,
        trace,
        settings,
    )
}

pub fn solve_h0(
    b: &ScalarField,
    phi0: &ScalarField,
    bd: &BoundaryData,
    sigma: f64,
    settings: SolverSettings,
) -> Result<(ScalarField, SolveStats)> {
    let inv_b = b.map(|v| 1.0 / v);
    let gi = perp_gradient(&inv_b);
    let source = gi.dot(&gradient(phi0)).scaled(-sigma);
    solve_h0_with_source(b, &source, &bd.h, settings)
}

/// `lap xi = h`, `xi = 0` on the boundary, and `X = perp_grad xi`.
pub fn solve_xi0_x0(
    h0: &ScalarField,
    settings: SolverSettings,
) -> Result<(ScalarField, VectorField, SolveStats)> {
    let grid = *h0.grid();
    let (xi, stats) = solve_dirichlet(
        "xi0",
        Diffusivity::Constant(1.0),
        None,
        &h0.scaled(-1.0),
        &EdgeValues::zeros(&grid),
        settings,
    )?;
    let x0 = perp_gradient(&xi);
    Ok((xi, x0, stats))
}

/// `lap psi = div Y` with `dpsi/dnu = J . nu`. `y_normal` is `Y . nu` on
/// the boundary segments; the load must satisfy the discrete compatibility
/// condition within `compat_tol` relative to the size of the data.
pub fn solve_psi_with_field(
    y: &VectorField,
    y_normal: &EdgeValues,
    j_normal: &EdgeValues,
    compat_tol: f64,
    settings: SolverSettings,
) -> Result<PureNeumannSolution> {
    let grid = *y.grid();
    let mut load = divergence_load(y, y_normal);
    for (l, q) in load.iter_mut().zip(boundary_load(&grid, j_normal)) {
        *l = q - *l;
    }
    let scale = load.iter().map(|v| v.abs()).sum::<f64>()
        + j_normal.integrate_abs_on(&grid)
        + y_normal.integrate_abs_on(&grid);
    solve_pure_neumann(
        "psi0",
        grid,
        Diffusivity::Constant(1.0),
        &load,
        scale,
        compat_tol,
        settings,
    )
}

pub fn solve_psi0(
    b: &ScalarField,
    phi0: &Phi0,
    h0: &ScalarField,
    bd: &BoundaryData,
    sigma: f64,
    settings: SolverSettings,
) -> Result<PureNeumannSolution> {
    check_b(b)?;
    let grid = *b.grid();
    let inv_b = b.map(|v| 1.0 / v);
    let y = gradient(&phi0.field)
        .scaled(sigma)
        .sub(&perp_gradient(h0))
        .mul_scalar(&inv_b);
    // -perp_grad h . nu = dh/dtau on the boundary.
    let y_normal = phi0
        .normal_flux
        .zip_map(
            &EdgeValues::trace(h0).tangential_derivative(&grid),
            |f, t| f + t,
        )
        .zip_map(&EdgeValues::trace(&inv_b), |v, ib| v * ib);
    solve_psi_with_field(&y, &y_normal, &bd.j_normal(), COMPATIBILITY_TOL, settings)
}

/// Max-norm over the nodes of `sigma grad phi0 - perp_grad curl X0 - b (grad psi0 - X0)`.
pub fn identity_residual(
    sigma: f64,
    phi0: &ScalarField,
    x0: &VectorField,
    psi0: &ScalarField,
    b: &ScalarField,
) -> f64 {
    let z = gradient(psi0).sub(x0);
    let r = gradient(phi0)
        .scaled(sigma)
        .sub(&perp_gradient(&curl(x0)))
        .sub(&z.mul_scalar(b));
    r.norm_squared().max().sqrt()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AuxiliaryStats {
    pub phi0: SolveStats,
    pub h0: SolveStats,
    pub xi0: SolveStats,
    pub psi0: SolveStats,
    /// Relative compatibility defect of the `psi0` problem before projection.
    pub compatibility_defect: f64,
}

/// The five auxiliary fields for unit current intensity, plus `Z` and the
/// residual of `sigma grad phi0 - perp_grad curl X0 = b Z`.
#[derive(Debug, Clone)]
pub struct AuxiliaryFields {
    pub sigma: f64,
    pub phi0: ScalarField,
    pub h0: ScalarField,
    pub xi0: ScalarField,
    pub x0: VectorField,
    pub psi0: ScalarField,
    pub z: VectorField,
    pub identity_residual: f64,
    pub stats: AuxiliaryStats,
}

impl AuxiliaryFields {
    pub fn solve(
        b: &ScalarField,
        bd: &BoundaryData,
        alpha: f64,
        sigma: f64,
        settings: SolverSettings,
    ) -> Result<Self> {
        let phi0 = solve_phi0(b, bd, alpha, sigma, settings)?;
        let (h0, h0_stats) = solve_h0(b, &phi0.field, bd, sigma, settings)?;
        let (xi0, x0, xi0_stats) = solve_xi0_x0(&h0, settings)?;
        let psi = solve_psi0(b, &phi0, &h0, bd, sigma, settings)?;
        let z = gradient(&psi.field).sub(&x0);
        let identity_residual = identity_residual(sigma, &phi0.field, &x0, &psi.field, b);
        Ok(Self {
            sigma,
            stats: AuxiliaryStats {
                phi0: phi0.stats,
                h0: h0_stats,
                xi0: xi0_stats,
                psi0: psi.stats,
                compatibility_defect: psi.relative_defect,
            },
            phi0: phi0.field,
            h0,
            xi0,
            x0,
            psi0: psi.field,
            z,
            identity_residual,
        })
    }

    /// `Z^perp` rebuilt from the potentials, `(sigma perp_grad phi0 + grad h0) / b`.
    pub fn z_perp_from_potentials(&self, b: &ScalarField) -> VectorField {
        perp_gradient(&self.phi0)
            .scaled(self.sigma)
            .add(&gradient(&self.h0))
            .mul_scalar(&b.map(|v| 1.0 / v))
    }

    /// `Z^perp` from `grad psi0 - X0`.
    pub fn z_perp(&self) -> VectorField {
        perp(&self.z)
    }
}

/// `lambda Z` and `f_eps = lap(sqrt b)/sqrt b - |Z_eps|^2 + beta |log eps|^2 lambda phi0`
/// with `Z_eps = lambda |log eps| Z`.
pub fn assemble_z_and_f(
    aux: &AuxiliaryFields,
    b: &ScalarField,
    beta: f64,
    eps: f64,
    lambda: f64,
) -> (VectorField, ScalarField) {
    let l = eps.ln().abs();
    let z = aux.z.scaled(lambda);
    let f = pinning_potential(b)
        .zip_map(&z.norm_squared(), |p, z2| p - l * l * z2)
        .zip_map(&aux.phi0, |f, phi| f + beta * l * l * lambda * phi);
    (z, f)
}

/// `lap(sqrt b) / sqrt b`.
pub fn pinning_potential(b: &ScalarField) -> ScalarField {
    let sb = b.map(f64::sqrt);
    laplacian(&sb).zip_map(&sb, |l, s| l / s)
}
