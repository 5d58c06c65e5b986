//! Energy densities, total energies, the weighted stress-energy tensor and
//! the residual of the weighted energy evolution identity.
//!
//! All quantities refer to the unknown of the forced equation (for pinned
//! runs, `v = u / sqrt b`).

use crate::error::Result;
use crate::grid::{
    complex_gradient, complex_laplacian, divergence, gradient, inner_product, integrate,
    ComplexField, EdgeValues, ScalarField, VectorField,
};
use crate::sim::Coefficients;
use crate::vortex::{velocity_midpoint, VortexState};
use crate::Complex64;

/// `e_eps(u) = |grad u|^2 / 2 + (1 - |u|^2)^2 / (4 eps^2)`.
pub fn energy_density(u: &ComplexField, eps: f64) -> ScalarField {
    let (d1, d2) = complex_gradient(u);
    let k = 0.25 / (eps * eps);
    let grad = d1
        .modulus_squared()
        .zip_map(&d2.modulus_squared(), |a, b| 0.5 * (a + b));
    grad.zip_map(&u.modulus_squared(), |g, m| g + k * (1.0 - m).powi(2))
}

/// `e~_eps = b (e_eps + (1 - |u|^2) f / 2)`.
pub fn weighted_density(
    u: &ComplexField,
    b: &ScalarField,
    eps: f64,
    f: &ScalarField,
) -> ScalarField {
    let e = energy_density(u, eps);
    let m = u.modulus_squared();
    let g = *u.grid();
    let data = (0..g.len())
        .map(|k| b.data()[k] * (e.data()[k] + 0.5 * (1.0 - m.data()[k]) * f.data()[k]))
        .collect();
    ScalarField::from_vec(g, data).expect("finite inputs")
}

/// `(|u|^2 - 1) / 4 * grad b . nu` integrated over the boundary.
fn boundary_term(u: &ComplexField, b: &ScalarField) -> f64 {
    let g = u.grid();
    let m = EdgeValues::trace(&u.modulus_squared());
    let db = EdgeValues::normal_trace(&gradient(b));
    m.zip_map(&db, |m, d| 0.25 * (m - 1.0) * d).integrate_on(g)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// `int e_eps`.
    pub e_total: f64,
    /// `int e~_eps`.
    pub e_weighted: f64,
    /// `F_eps = int b |grad u|^2 / 2 + b^2 (1 - |u|^2)^2 / (4 eps^2)`.
    pub f: f64,
    /// `F_eps + int b (1 - |u|^2) f_eps / 2 + boundary (|u|^2 - 1) / 4 grad b . nu`.
    pub f_tilde: f64,
    /// `F~ / |log eps|`.
    pub normalized: f64,
    /// `pi sum b(a_i)` over the supplied vortices.
    pub vortex_target: Option<f64>,
}

/// Energies of `u` at time `t`; `vortices` adds the `pi sum b(a_i)` target.
pub fn total_energies(
    t: f64,
    u: &ComplexField,
    coeffs: &Coefficients,
    eps: f64,
    vortices: Option<(&VortexState, &dyn Fn(f64, f64) -> f64)>,
) -> EnergyReport {
    let b = &coeffs.b;
    let (d1, d2) = complex_gradient(u);
    let m = u.modulus_squared();
    let k = 0.25 / (eps * eps);
    let grad2 = d1
        .modulus_squared()
        .zip_map(&d2.modulus_squared(), |a, b| a + b);
    let mut fd = grad2.zip_map(b, |g, b| 0.5 * b * g);
    for ((o, &bk), &mk) in fd.data_mut().iter_mut().zip(b.data()).zip(m.data()) {
        *o += bk * bk * k * (1.0 - mk).powi(2);
    }
    let f = integrate(&fd);
    let potential = m
        .zip_map(b, |m, b| b * (1.0 - m))
        .zip_map(&coeffs.f_eps, |bm, f| 0.5 * bm * f);
    let bulk = integrate(&potential);
    let f_tilde = f + bulk + boundary_term(u, b);
    let l = eps.ln().abs();
    EnergyReport {
        t,
        e_total: integrate(&energy_density(u, eps)),
        e_weighted: integrate(&weighted_density(u, b, eps, &coeffs.f_eps)),
        f,
        f_tilde,
        normalized: f_tilde / l,
        vortex_target: vortices.map(|(s, bf)| {
            std::f64::consts::PI
                * s.vortices
                    .iter()
                    .map(|v| bf(v.position[0], v.position[1]))
                    .sum::<f64>()
        }),
    }
}

/// Symmetric `T = b (grad u (x) grad u - (e_eps + (1 - |u|^2) f / 2) I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StressTensor {
    pub t11: ScalarField,
    pub t12: ScalarField,
    pub t22: ScalarField,
}

impl StressTensor {
    pub fn trace(&self) -> ScalarField {
        self.t11.zip_map(&self.t22, |a, b| a + b)
    }

    /// Row-wise divergence with the grid stencils.
    pub fn divergence(&self) -> VectorField {
        let r1 =
            VectorField::from_components(self.t11.clone(), self.t12.clone()).expect("same grid");
        let r2 =
            VectorField::from_components(self.t12.clone(), self.t22.clone()).expect("same grid");
        VectorField::from_components(divergence(&r1), divergence(&r2)).expect("same grid")
    }
}

pub fn stress_tensor(
    u: &ComplexField,
    b: &ScalarField,
    eps: f64,
    f: &ScalarField,
) -> Result<StressTensor> {
    u.grid().check(b.grid(), "stress tensor")?;
    let (d1, d2) = complex_gradient(u);
    let iso = weighted_density(u, b, eps, f);
    let scale = |p: ScalarField| p.zip_map(b, |p, b| p * b);
    Ok(StressTensor {
        t11: scale(inner_product(&d1, &d1)?).zip_map(&iso, |a, e| a - e),
        t12: scale(inner_product(&d1, &d2)?),
        t22: scale(inner_product(&d2, &d2)?).zip_map(&iso, |a, e| a - e),
    })
}

/// Right-hand side of the divergence identity for `T`:
/// `b (lap u + u (1 - |u|^2) / eps^2 + grad h . grad u + f u, grad u)
///  - e~ grad h + b grad f (|u|^2 - 1) / 2`.
pub fn stress_divergence_rhs(
    u: &ComplexField,
    b: &ScalarField,
    eps: f64,
    f: &ScalarField,
) -> Result<VectorField> {
    u.grid().check(b.grid(), "stress divergence")?;
    let g = *u.grid();
    let (d1, d2) = complex_gradient(u);
    let lap = complex_laplacian(u);
    let gh = gradient(&b.map(f64::ln));
    let gf = gradient(f);
    let et = weighted_density(u, b, eps, f);
    let ie2 = 1.0 / (eps * eps);
    let w: Vec<Complex64> = (0..g.len())
        .map(|k| {
            let z = u.data()[k];
            lap.data()[k]
                + z * ((1.0 - z.norm_sqr()) * ie2 + f.data()[k])
                + d1.data()[k] * gh.xs()[k]
                + d2.data()[k] * gh.ys()[k]
        })
        .collect();
    let w = ComplexField::from_vec(g, w)?;
    let p1 = inner_product(&w, &d1)?;
    let p2 = inner_product(&w, &d2)?;
    let m = u.modulus_squared();
    let comp = |p: &ScalarField, ghk: &[f64], gfk: &[f64]| {
        ScalarField::from_vec(
            g,
            (0..g.len())
                .map(|k| {
                    let bk = b.data()[k];
                    bk * p.data()[k] - et.data()[k] * ghk[k]
                        + bk * gfk[k] * 0.5 * (m.data()[k] - 1.0)
                })
                .collect(),
        )
    };
    VectorField::from_components(comp(&p1, gh.xs(), gf.xs())?, comp(&p2, gh.ys(), gf.ys())?)
}

/// Terms of the weighted energy identity over one step.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvolutionTerms {
    pub t: f64,
    /// `(int e~(u_next) - int e~(u_prev)) / dt`.
    pub energy_rate: f64,
    /// `int alpha b |u_t|^2`.
    pub dissipation: f64,
    /// `int b V . Z_eps`.
    pub work: f64,
    /// `boundary int b (u_t, d_nu u_mid)`.
    pub flux: f64,
    /// `|energy_rate + dissipation - work - flux|`.
    pub residual: f64,
}

/// Discrete check of `d/dt int e~ = boundary flux - int alpha b |u_t|^2 + int b V . Z_eps`
/// between two snapshots, spatial integrals at the midpoint in time.
pub fn energy_evolution_step(
    t: f64,
    u_prev: &ComplexField,
    u_next: &ComplexField,
    dt: f64,
    coeffs: &Coefficients,
    alpha: f64,
    eps: f64,
) -> Result<EvolutionTerms> {
    u_prev.grid().check(u_next.grid(), "energy evolution")?;
    let g = *u_prev.grid();
    let b = &coeffs.b;
    let e0 = integrate(&weighted_density(u_prev, b, eps, &coeffs.f_eps));
    let e1 = integrate(&weighted_density(u_next, b, eps, &coeffs.f_eps));
    let ut: Vec<Complex64> = u_prev
        .data()
        .iter()
        .zip(u_next.data())
        .map(|(a, c)| (c - a) / dt)
        .collect();
    let ut = ComplexField::from_vec(g, ut)?;
    let mid = ComplexField::from_vec(
        g,
        u_prev
            .data()
            .iter()
            .zip(u_next.data())
            .map(|(a, c)| (a + c) * 0.5)
            .collect(),
    )?;
    let dissipation = alpha * integrate(&ut.modulus_squared().zip_map(b, |m, b| m * b));
    let v = velocity_midpoint(u_prev, u_next, dt)?;
    let work = integrate(&v.dot(&coeffs.z_eps).zip_map(b, |w, b| w * b));
    let (d1, d2) = complex_gradient(&mid);
    let j = VectorField::from_components(inner_product(&ut, &d1)?, inner_product(&ut, &d2)?)?
        .mul_scalar(b);
    let flux = EdgeValues::normal_trace(&j).integrate_on(&g);
    let energy_rate = (e1 - e0) / dt;
    Ok(EvolutionTerms {
        t,
        energy_rate,
        dissipation,
        work,
        flux,
        residual: (energy_rate + dissipation - work - flux).abs(),
    })
}

/// `v = u / sqrt b`, the forced-form unknown of a pinned run.
pub fn to_substituted(u: &ComplexField, b: &ScalarField) -> Result<ComplexField> {
    u.grid().check(b.grid(), "substitution")?;
    ComplexField::from_vec(
        *u.grid(),
        u.data()
            .iter()
            .zip(b.data())
            .map(|(z, bk)| z / bk.sqrt())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn unit(n: usize) -> Grid {
        Grid::unit_square(n).unwrap()
    }

    #[test]
    fn densities_of_simple_states() {
        let g = unit(16);
        let one = ComplexField::constant(g, Complex64::new(1.0, 0.0));
        let b = ScalarField::from_fn(g, |x, y| 1.0 + x * y);
        let f = ScalarField::from_fn(g, |x, _| x);
        assert_eq!(energy_density(&one, 0.1).max_abs(), 0.0);
        assert_eq!(weighted_density(&one, &b, 0.1, &f).max_abs(), 0.0);
        let zero = ComplexField::zeros(g);
        assert!((energy_density(&zero, 0.1).max() - 25.0).abs() < 1e-12);
        assert!((energy_density(&zero, 0.1).min() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn unit_state_has_zero_modified_energy() {
        let g = unit(24);
        let b = ScalarField::from_fn(g, |x, y| 1.0 + 0.3 * x * y);
        let c = Coefficients::new(
            b,
            VectorField::constant(g, [0.5, 0.1]),
            ScalarField::constant(g, 2.0),
        )
        .unwrap();
        let r = total_energies(
            0.0,
            &ComplexField::constant(g, Complex64::new(0.6, 0.8)),
            &c,
            0.05,
            None,
        );
        assert!(r.f.abs() < 1e-12 && r.f_tilde.abs() < 1e-12);
    }

    #[test]
    fn constant_weight_has_no_boundary_term() {
        let g = unit(24);
        let u = ComplexField::from_fn(g, Complex64::new);
        assert_eq!(boundary_term(&u, &ScalarField::constant(g, 0.7)), 0.0);
    }

    #[test]
    fn plane_wave_stress() {
        let g = unit(64);
        let k = 3.0;
        let u = ComplexField::from_fn(g, |x, _| Complex64::from_polar(1.0, k * x));
        let t = stress_tensor(
            &u,
            &ScalarField::constant(g, 1.0),
            0.1,
            &ScalarField::zeros(g),
        )
        .unwrap();
        let tol = 1e-2 * k * k;
        let (i, j) = (32, 20);
        assert!((t.t11.at(i, j) - 0.5 * k * k).abs() < tol);
        assert!((t.t22.at(i, j) + 0.5 * k * k).abs() < tol);
        assert!(t.t12.at(i, j).abs() < 1e-12);
        let ones = stress_tensor(
            &ComplexField::constant(g, Complex64::new(1.0, 0.0)),
            &ScalarField::constant(g, 1.0),
            0.1,
            &ScalarField::zeros(g),
        )
        .unwrap();
        assert_eq!(ones.trace().max_abs(), 0.0);
    }

    #[test]
    fn trace_identity_is_exact() {
        let g = unit(32);
        let u = ComplexField::from_fn(g, |x, y| Complex64::new((2.0 * x).sin() + y, x * y - 0.3));
        let b = ScalarField::from_fn(g, |x, y| 1.0 + 0.2 * (x - y).cos());
        let f = ScalarField::from_fn(g, |x, y| x - y * y);
        let t = stress_tensor(&u, &b, 0.2, &f).unwrap();
        let (d1, d2) = complex_gradient(&u);
        let g2 = d1
            .modulus_squared()
            .zip_map(&d2.modulus_squared(), |a, b| a + b);
        let et = weighted_density(&u, &b, 0.2, &f);
        let expect = g2
            .zip_map(&b, |g, b| g * b)
            .zip_map(&et, |a, e| a - 2.0 * e);
        assert!(t.trace().max_diff(&expect) < 1e-10 * expect.max_abs().max(1.0));
    }

    fn div_t_defect(n: usize) -> f64 {
        let g = unit(n);
        let u = ComplexField::from_fn(g, |x, y| {
            Complex64::from_polar(0.9 + 0.1 * (x * y).sin(), 2.0 * x - y * y)
        });
        let b = ScalarField::from_fn(g, |x, y| (0.2 * x * y).exp());
        let f = ScalarField::from_fn(g, |x, y| (x + 2.0 * y).sin());
        let t = stress_tensor(&u, &b, 0.3, &f).unwrap();
        t.divergence()
            .max_diff(&stress_divergence_rhs(&u, &b, 0.3, &f).unwrap())
    }

    #[test]
    fn stress_divergence_identity_is_second_order() {
        let ratio = div_t_defect(64) / div_t_defect(128);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn stationary_state_has_no_evolution_residual() {
        let g = unit(24);
        let c = Coefficients::new(
            ScalarField::constant(g, 1.0),
            VectorField::zeros(g),
            ScalarField::zeros(g),
        )
        .unwrap();
        let u = ComplexField::constant(g, Complex64::new(0.6, 0.8));
        let r = energy_evolution_step(0.0, &u, &u, 0.01, &c, 1.0, 0.1).unwrap();
        assert_eq!(r.residual, 0.0);
    }
}
