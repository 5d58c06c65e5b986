//! The limiting point-vortex law
//!
//! `alpha a_i' + d_i beta a_i'^perp = -2 d_i lambda Z^perp(a_i) - grad log b(a_i)`,
//!
//! integrated in its solved form, with collision and exit events, and the
//! critical-current sweep built on it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Grid, VectorField};
use crate::interp::Bicubic;
use crate::landscape::PinningLandscape;
use crate::vortex::{StopReason, Termination, Trajectory};

/// A vector field evaluable anywhere in the domain.
#[derive(Debug, Clone)]
pub enum VectorSource {
    Constant([f64; 2]),
    Expression {
        x: Expr,
        y: Expr,
    },
    /// Bicubic interpolation of nodal components.
    Gridded {
        x: Bicubic,
        y: Bicubic,
    },
}

impl VectorSource {
    pub fn gridded(v: &VectorField) -> Self {
        VectorSource::Gridded {
            x: Bicubic::new(v.component(0)),
            y: Bicubic::new(v.component(1)),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        match self {
            VectorSource::Constant(v) => Ok(*v),
            VectorSource::Expression { x: ex, y: ey } => Ok([ex.eval(x, y), ey.eval(x, y)]),
            VectorSource::Gridded { x: gx, y: gy } => Ok([gx.eval(x, y)?, gy.eval(x, y)?]),
        }
    }

    /// Largest magnitude over the nodes of `grid`.
    pub fn max_norm_on(&self, grid: &Grid) -> Result<f64> {
        let mut m: f64 = 0.0;
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let v = self.eval(grid.x(i), grid.y(j))?;
                m = m.max(v[0].hypot(v[1]));
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct OdeSystem {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub degrees: Vec<i32>,
    /// The unit-current force field `Z`; the law uses `lambda Z`.
    pub z: VectorSource,
    pub landscape: PinningLandscape,
    /// Domain `[0, lx] x [0, ly]`.
    pub lx: f64,
    pub ly: f64,
}

fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

impl OdeSystem {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must be positive",
                self.alpha
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::InvalidParameter(
                "domain lengths must be positive".into(),
            ));
        }
        if let Some(d) = self.degrees.iter().find(|d| d.abs() != 1) {
            return Err(Error::InvalidParameter(format!(
                "degree {d} is not +1 or -1"
            )));
        }
        Ok(())
    }

    fn inside(&self, p: [f64; 2]) -> bool {
        (0.0..=self.lx).contains(&p[0]) && (0.0..=self.ly).contains(&p[1])
    }

    fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        p[0].min(self.lx - p[0]).min(p[1]).min(self.ly - p[1])
    }

    /// Velocity of a degree-`d` vortex at `p` in the solved form
    /// `a' = alpha/(alpha^2+beta^2) (-2 d lambda Z^perp - grad log b)
    ///     - beta/(alpha^2+beta^2) (2 lambda Z - d grad^perp log b)`.
    pub fn velocity(&self, p: [f64; 2], d: i32) -> Result<[f64; 2]> {
        if !self.inside(p) {
            return Err(Error::OutOfDomain { x: p[0], y: p[1] });
        }
        let z = self.z.eval(p[0], p[1])?;
        let gl = self.landscape.grad_log_b(p[0], p[1])?;
        Ok(solved_velocity(
            self.alpha,
            self.beta,
            self.lambda,
            d,
            z,
            gl,
        ))
    }

    /// Velocity from the law written with `Z^perp` supplied directly.
    pub fn velocity_from_z_perp(&self, p: [f64; 2], d: i32, z_perp: [f64; 2]) -> Result<[f64; 2]> {
        let gl = self.landscape.grad_log_b(p[0], p[1])?;
        // Z = -(Z^perp)^perp.
        let z = [z_perp[1], -z_perp[0]];
        Ok(solved_velocity(
            self.alpha,
            self.beta,
            self.lambda,
            d,
            z,
            gl,
        ))
    }

    /// `(|alpha| + |beta|) / (alpha^2 + beta^2) (2 lambda max|Z| + max|grad log b|)` over `grid`.
    pub fn speed_bound(&self, grid: &Grid) -> Result<f64> {
        let zmax = self.z.max_norm_on(grid)?;
        let mut gmax: f64 = 0.0;
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let g = self.landscape.grad_log_b(grid.x(i), grid.y(j))?;
                gmax = gmax.max(g[0].hypot(g[1]));
            }
        }
        let (a, b) = (self.alpha, self.beta);
        Ok((a.abs() + b.abs()) / (a * a + b * b) * (2.0 * self.lambda * zmax + gmax))
    }
}

fn solved_velocity(
    alpha: f64,
    beta: f64,
    lambda: f64,
    d: i32,
    z: [f64; 2],
    grad_log_b: [f64; 2],
) -> [f64; 2] {
    let d = d as f64;
    let den = alpha * alpha + beta * beta;
    let zp = perp(z);
    let gp = perp(grad_log_b);
    let mut out = [0.0; 2];
    for k in 0..2 {
        out[k] = alpha / den * (-2.0 * d * lambda * zp[k] - grad_log_b[k])
            - beta / den * (2.0 * lambda * z[k] - d * gp[k]);
    }
    out
}

/// `a_i'` for every vortex.
pub fn ode_rhs(positions: &[[f64; 2]], system: &OdeSystem) -> Result<Vec<[f64; 2]>> {
    if positions.len() != system.degrees.len() {
        return Err(Error::CountMismatch(format!(
            "{} positions for {} degrees",
            positions.len(),
            system.degrees.len()
        )));
    }
    positions
        .iter()
        .zip(&system.degrees)
        .map(|(&p, &d)| system.velocity(p, d))
        .collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OdeSolution {
    pub degrees: Vec<i32>,
    /// `paths[i]` holds `(t, a_i(t))` samples, ending at `t_star`.
    pub paths: Vec<Vec<(f64, [f64; 2])>>,
    pub t_star: f64,
    pub stop_reason: StopReason,
    /// Vortices taking part in the stopping event.
    pub involved: Vec<usize>,
}

impl OdeSolution {
    /// Paths in the trajectory schema; every path ends with the system's stop.
    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.paths
            .iter()
            .zip(&self.degrees)
            .enumerate()
            .map(|(id, (p, &d))| Trajectory {
                id,
                degree: d,
                samples: p.clone(),
                termination: Termination {
                    reason: self.stop_reason,
                    t: self.t_star,
                },
            })
            .collect()
    }

    pub fn final_positions(&self) -> Vec<[f64; 2]> {
        self.paths
            .iter()
            .map(|p| p.last().expect("nonempty").1)
            .collect()
    }
}

/// Stopping radius `1e-3 min(lx, ly)` for both collision and exit.
pub fn stop_radius(system: &OdeSystem) -> f64 {
    1e-3 * system.lx.min(system.ly)
}

fn rk4_step(system: &OdeSystem, a: &[[f64; 2]], dt: f64) -> Result<Vec<[f64; 2]>> {
    let shift = |a: &[[f64; 2]], k: &[[f64; 2]], s: f64| -> Vec<[f64; 2]> {
        a.iter()
            .zip(k)
            .map(|(p, v)| [p[0] + s * v[0], p[1] + s * v[1]])
            .collect()
    };
    let k1 = ode_rhs(a, system)?;
    let k2 = ode_rhs(&shift(a, &k1, 0.5 * dt), system)?;
    let k3 = ode_rhs(&shift(a, &k2, 0.5 * dt), system)?;
    let k4 = ode_rhs(&shift(a, &k3, dt), system)?;
    Ok((0..a.len())
        .map(|i| {
            let mut p = a[i];
            for c in 0..2 {
                p[c] += dt / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
            }
            p
        })
        .collect())
}

/// Earliest event in `[0, 1]` along the straight segment from `a` to `b`.
fn first_event(
    system: &OdeSystem,
    a: &[[f64; 2]],
    b: &[[f64; 2]],
    r: f64,
) -> Option<(f64, StopReason, Vec<usize>)> {
    let mut best: Option<(f64, StopReason, Vec<usize>)> = None;
    let mut offer = |s: f64, reason: StopReason, who: Vec<usize>| {
        if best.as_ref().is_none_or(|(t, _, _)| s < *t) {
            best = Some((s, reason, who));
        }
    };
    for i in 0..a.len() {
        // Boundary distance is piecewise linear along the segment; test each wall.
        let walls = [
            (a[i][0], b[i][0]),
            (system.lx - a[i][0], system.lx - b[i][0]),
            (a[i][1], b[i][1]),
            (system.ly - a[i][1], system.ly - b[i][1]),
        ];
        for (d0, d1) in walls {
            if d1 < r {
                let s = if d0 <= r { 0.0 } else { (d0 - r) / (d0 - d1) };
                offer(s, StopReason::Exit, vec![i]);
            }
        }
        for j in i + 1..a.len() {
            if system.degrees[i] != -system.degrees[j] {
                continue;
            }
            let p = [a[i][0] - a[j][0], a[i][1] - a[j][1]];
            let q = [b[i][0] - b[j][0], b[i][1] - b[j][1]];
            let dq = [q[0] - p[0], q[1] - p[1]];
            // |p + s dq|^2 = r^2.
            let qa = dq[0] * dq[0] + dq[1] * dq[1];
            let qb = 2.0 * (p[0] * dq[0] + p[1] * dq[1]);
            let qc = p[0] * p[0] + p[1] * p[1] - r * r;
            let s = if qc <= 0.0 {
                Some(0.0)
            } else if qa > 0.0 {
                let disc = qb * qb - 4.0 * qa * qc;
                (disc >= 0.0)
                    .then(|| (-qb - disc.sqrt()) / (2.0 * qa))
                    .filter(|s| (0.0..=1.0).contains(s))
            } else {
                None
            };
            if let Some(s) = s {
                offer(s, StopReason::Collision, vec![i, j]);
            }
        }
    }
    best
}

/// Classical RK4 up to `horizon`, stopped at the first collision of
/// opposite-degree vortices or exit, located by linear interpolation
/// within the step.
pub fn integrate_law(
    system: &OdeSystem,
    initial: &[[f64; 2]],
    horizon: f64,
    dt: f64,
) -> Result<OdeSolution> {
    system.validate()?;
    if initial.len() != system.degrees.len() {
        return Err(Error::CountMismatch(format!(
            "{} initial positions for {} degrees",
            initial.len(),
            system.degrees.len()
        )));
    }
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidParameter(
            "dt and horizon must be positive".into(),
        ));
    }
    let r = stop_radius(system);
    for (i, p) in initial.iter().enumerate() {
        if !system.inside(*p) || system.boundary_distance(*p) <= r {
            return Err(Error::PlacementError(format!(
                "vortex {i} starts outside the interior"
            )));
        }
        for q in &initial[..i] {
            if (p[0] - q[0]).hypot(p[1] - q[1]) <= r {
                return Err(Error::PlacementError(
                    "initial positions are not distinct".into(),
                ));
            }
        }
    }
    let steps = (horizon / dt).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let mut paths: Vec<Vec<(f64, [f64; 2])>> = initial.iter().map(|&p| vec![(0.0, p)]).collect();
    let mut a = initial.to_vec();
    for n in 0..steps {
        let t = n as f64 * dt;
        // A stage leaving the domain means the vortex exits within this step;
        // an Euler predictor locates the crossing.
        let next = match rk4_step(system, &a, dt) {
            Ok(b) => b,
            Err(Error::OutOfDomain { .. }) => {
                let v = ode_rhs(&a, system)?;
                a.iter()
                    .zip(&v)
                    .map(|(p, v)| [p[0] + dt * v[0], p[1] + dt * v[1]])
                    .collect()
            }
            Err(e) => return Err(e),
        };
        if let Some((s, reason, involved)) = first_event(system, &a, &next, r) {
            let ts = t + s * dt;
            for (path, (p, q)) in paths.iter_mut().zip(a.iter().zip(&next)) {
                if s > 0.0 {
                    path.push((ts, [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]));
                }
            }
            return Ok(OdeSolution {
                degrees: system.degrees.clone(),
                paths,
                t_star: ts,
                stop_reason: reason,
                involved,
            });
        }
        let t1 = if n + 1 == steps {
            horizon
        } else {
            (n + 1) as f64 * dt
        };
        for (path, q) in paths.iter_mut().zip(&next) {
            path.push((t1, *q));
        }
        a = next;
    }
    Ok(OdeSolution {
        degrees: system.degrees.clone(),
        paths,
        t_star: horizon,
        stop_reason: StopReason::Horizon,
        involved: Vec::new(),
    })
}

/// What counts as confined: every vortex within `radius` of its assigned
/// minimum for all `t <= horizon`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ConfinementSpec {
    pub minima: Vec<[f64; 2]>,
    pub radius: f64,
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticalEstimate {
    /// Every grid value stayed confined.
    AboveGrid,
    /// The smallest grid value already escaped.
    BelowGrid,
    Bracket {
        lo: f64,
        hi: f64,
        lambda0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CriticalReport {
    pub lambdas: Vec<f64>,
    pub verdicts: Vec<bool>,
    pub estimate: CriticalEstimate,
    pub tolerance: f64,
    pub bisection_steps: usize,
}

/// Run the law at `lambda` and decide confinement. Exit or collision before
/// the horizon counts as deconfined.
pub fn is_confined(
    template: &OdeSystem,
    initial: &[[f64; 2]],
    spec: &ConfinementSpec,
    lambda: f64,
) -> Result<bool> {
    if spec.minima.len() != initial.len() {
        return Err(Error::CountMismatch(format!(
            "{} minima for {} vortices",
            spec.minima.len(),
            initial.len()
        )));
    }
    let mut sys = template.clone();
    sys.lambda = lambda;
    let sol = integrate_law(&sys, initial, spec.horizon, spec.dt)?;
    if sol.stop_reason != StopReason::Horizon {
        return Ok(false);
    }
    Ok(sol.paths.iter().zip(&spec.minima).all(|(path, m)| {
        path.iter()
            .all(|(_, p)| (p[0] - m[0]).hypot(p[1] - m[1]) <= spec.radius)
    }))
}

/// Sweep `lambdas` (increasing) in parallel, require a single
/// confined-to-deconfined transition, and bisect the bracket to `tolerance`
/// (default `1e-3` of the grid span).
pub fn critical_current(
    template: &OdeSystem,
    initial: &[[f64; 2]],
    lambdas: &[f64],
    spec: &ConfinementSpec,
    tolerance: Option<f64>,
) -> Result<CriticalReport> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidParameter(
            "lambda grid must be nonempty and increasing".into(),
        ));
    }
    let verdicts: Vec<bool> = lambdas
        .par_iter()
        .map(|&l| is_confined(template, initial, spec, l))
        .collect::<Result<_>>()?;
    let first_out = verdicts.iter().position(|c| !c);
    if let Some(k) = first_out {
        if verdicts[k..].iter().any(|&c| c) {
            return Err(Error::NonMonotoneVerdicts {
                lambdas: lambdas.to_vec(),
                verdicts,
            });
        }
    }
    let span = lambdas[lambdas.len() - 1] - lambdas[0];
    let tolerance = tolerance.unwrap_or(1e-3 * span);
    let (estimate, bisection_steps) = match first_out {
        None => (CriticalEstimate::AboveGrid, 0),
        Some(0) => (CriticalEstimate::BelowGrid, 0),
        Some(k) => {
            let (mut lo, mut hi) = (lambdas[k - 1], lambdas[k]);
            let mut steps = 0;
            while hi - lo > tolerance {
                let mid = 0.5 * (lo + hi);
                if is_confined(template, initial, spec, mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
                steps += 1;
            }
            (
                CriticalEstimate::Bracket {
                    lo,
                    hi,
                    lambda0: 0.5 * (lo + hi),
                },
                steps,
            )
        }
    };
    Ok(CriticalReport {
        lambdas: lambdas.to_vec(),
        verdicts,
        estimate,
        tolerance,
        bisection_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Well;

    fn system(
        landscape: PinningLandscape,
        z: [f64; 2],
        alpha: f64,
        beta: f64,
        lambda: f64,
        degrees: Vec<i32>,
    ) -> OdeSystem {
        OdeSystem {
            alpha,
            beta,
            lambda,
            degrees,
            z: VectorSource::Constant(z),
            landscape,
            lx: 1.0,
            ly: 1.0,
        }
    }

    fn radial() -> PinningLandscape {
        PinningLandscape::expression("exp((x - 0.5)^2 + (y - 0.5)^2)").unwrap()
    }

    #[test]
    fn no_forces_no_motion() {
        let s = system(
            PinningLandscape::Constant(1.0),
            [0.0, 0.0],
            1.0,
            0.3,
            1.0,
            vec![1, -1],
        );
        assert_eq!(
            ode_rhs(&[[0.3, 0.3], [0.6, 0.7]], &s).unwrap(),
            vec![[0.0, 0.0]; 2]
        );
    }

    #[test]
    fn algebraic_case() {
        let g = 0.8;
        let s = system(
            PinningLandscape::expression("exp(0.8 * x)").unwrap(),
            [0.0, 0.0],
            1.0,
            1.0,
            0.0,
            vec![1],
        );
        let v = ode_rhs(&[[0.4, 0.4]], &s).unwrap()[0];
        assert!(
            (v[0] + g / 2.0).abs() < 1e-15 && (v[1] - g / 2.0).abs() < 1e-15,
            "{v:?}"
        );
        // The implicit law is recovered: alpha a' + d beta a'^perp = -grad log b.
        let p = perp(v);
        assert!((v[0] + p[0] + g).abs() < 1e-15 && (v[1] + p[1]).abs() < 1e-15);
    }

    #[test]
    fn pure_pinning_is_gradient_descent() {
        let w = PinningLandscape::GaussianWell(Well {
            center: [0.5, 0.5],
            depth: 0.4,
            width: 0.3,
        });
        let s = system(w.clone(), [1.0, 0.0], 2.0, 0.0, 0.0, vec![1]);
        let v = ode_rhs(&[[0.3, 0.6]], &s).unwrap()[0];
        let g = w.grad_log_b(0.3, 0.6).unwrap();
        assert!((v[0] + g[0] / 2.0).abs() < 1e-15 && (v[1] + g[1] / 2.0).abs() < 1e-15);
    }

    #[test]
    fn radial_pinning_decays_exponentially() {
        let s = system(radial(), [0.0, 0.0], 1.0, 0.0, 0.0, vec![1]);
        let a0 = [0.8, 0.35];
        let sol = integrate_law(&s, &[a0], 1.0, 1e-3).unwrap();
        assert_eq!(sol.stop_reason, StopReason::Horizon);
        let worst = sol.paths[0].iter().fold(0.0f64, |m, &(t, p)| {
            let e = (-2.0 * t).exp();
            m.max((p[0] - (0.5 + (a0[0] - 0.5) * e)).hypot(p[1] - (0.5 + (a0[1] - 0.5) * e)))
        });
        assert!(worst < 1e-6, "worst {worst}");
        // log b decreases along pure gradient flow.
        let lb: Vec<f64> = sol.paths[0]
            .iter()
            .map(|(_, p)| (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2))
            .collect();
        assert!(lb.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let s = system(radial(), [0.0, 0.0], 1.0, 0.0, 0.0, vec![1]);
        let err = |dt: f64| {
            let p = integrate_law(&s, &[[0.8, 0.5]], 1.0, dt)
                .unwrap()
                .final_positions()[0];
            (p[0] - (0.5 + 0.3 * (-2.0f64).exp())).abs()
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!((3.8..=4.2).contains(&order), "order {order}");
    }

    #[test]
    fn lorentz_drift_is_straight_and_degree_dependent() {
        let s = system(
            PinningLandscape::Constant(1.0),
            [0.5, 0.0],
            1.0,
            0.0,
            0.4,
            vec![1, -1],
        );
        let sol = integrate_law(&s, &[[0.3, 0.5], [0.7, 0.5]], 0.3, 1e-2).unwrap();
        let f = sol.final_positions();
        // a' = -2 d lambda Z^perp = -2 d 0.4 (0, 0.5).
        assert!((f[0][1] - (0.5 - 0.4 * 0.3)).abs() < 1e-12 && (f[0][0] - 0.3).abs() < 1e-12);
        assert!((f[1][1] - (0.5 + 0.4 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn head_on_pair_collides_at_the_analytic_time() {
        // Z = (0, 1): +1 moves along +x at speed 2 lambda, -1 along -x.
        let s = system(
            PinningLandscape::Constant(1.0),
            [0.0, 1.0],
            1.0,
            0.0,
            0.5,
            vec![1, -1],
        );
        let sol = integrate_law(&s, &[[0.3, 0.5], [0.7, 0.5]], 1.0, 1e-3).unwrap();
        assert_eq!(sol.stop_reason, StopReason::Collision);
        assert_eq!(sol.involved, vec![0, 1]);
        let expect = (0.4 - stop_radius(&s)) / 2.0;
        assert!(
            (sol.t_star - expect).abs() < 1e-12,
            "{} vs {expect}",
            sol.t_star
        );
        for tr in sol.trajectories() {
            assert_eq!(tr.termination.t, sol.t_star);
        }
    }

    #[test]
    fn drift_out_of_the_box_is_an_exit() {
        let s = system(
            PinningLandscape::Constant(1.0),
            [0.0, 1.0],
            1.0,
            0.0,
            1.0,
            vec![1],
        );
        let sol = integrate_law(&s, &[[0.5, 0.5]], 1.0, 1e-2).unwrap();
        assert_eq!(sol.stop_reason, StopReason::Exit);
        assert!((sol.t_star - (0.5 - 1e-3) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn halved_step_agrees() {
        let w = PinningLandscape::GaussianWell(Well {
            center: [0.5, 0.5],
            depth: 0.5,
            width: 0.3,
        });
        let s = system(w, [0.3, 0.1], 1.0, 0.5, 0.4, vec![1]);
        let a = integrate_law(&s, &[[0.35, 0.6]], 0.5, 1e-3).unwrap();
        let b = integrate_law(&s, &[[0.35, 0.6]], 0.5, 5e-4).unwrap();
        let (p, q) = (a.final_positions()[0], b.final_positions()[0]);
        assert!((p[0] - q[0]).hypot(p[1] - q[1]) < 1e-8);
    }

    #[test]
    fn degree_flip_negates_only_the_degree_dependent_part() {
        let w = PinningLandscape::GaussianWell(Well {
            center: [0.5, 0.5],
            depth: 0.5,
            width: 0.3,
        });
        let s = system(w, [0.3, 0.1], 1.3, 0.7, 0.4, vec![1]);
        let p = [0.4, 0.55];
        let (plus, minus) = (s.velocity(p, 1).unwrap(), s.velocity(p, -1).unwrap());
        // Degree-independent summand: -alpha grad log b - 2 beta lambda Z over alpha^2+beta^2.
        let g = s.landscape.grad_log_b(p[0], p[1]).unwrap();
        let den = 1.3f64.powi(2) + 0.49;
        for k in 0..2 {
            let even = (-1.3 * g[k] - 0.7 * 2.0 * 0.4 * [0.3, 0.1][k]) / den;
            assert!((0.5 * (plus[k] + minus[k]) - even).abs() < 1e-14);
        }
    }

    #[test]
    fn critical_current_matches_force_balance() {
        // log b = c |x - x0|^2 with constant Z: the equilibrium sits at
        // distance lambda |Z| / c, so confinement within R ends at lambda* = c R / |Z|.
        let c = 2.0;
        let land = PinningLandscape::expression("exp(2 * ((x - 0.5)^2 + (y - 0.5)^2))").unwrap();
        let s = system(land, [0.6, 0.8], 1.0, 0.0, 0.0, vec![1]);
        let spec = ConfinementSpec {
            minima: vec![[0.5, 0.5]],
            radius: 0.2,
            horizon: 10.0,
            dt: 1e-2,
        };
        let grid: Vec<f64> = (0..=8).map(|k| 0.1 * k as f64).collect();
        let r = critical_current(&s, &[[0.5, 0.5]], &grid, &spec, None).unwrap();
        let exact = c * 0.2 / 1.0;
        match r.estimate {
            CriticalEstimate::Bracket { lambda0, .. } => {
                assert!(
                    (lambda0 - exact).abs() < 2.0 * r.tolerance,
                    "{lambda0} vs {exact}"
                )
            }
            e => panic!("unexpected {e:?}"),
        }
        let zeros = critical_current(&s, &[[0.5, 0.5]], &[0.0, 0.0], &spec, None).unwrap();
        assert_eq!(zeros.estimate, CriticalEstimate::AboveGrid);
    }
}
