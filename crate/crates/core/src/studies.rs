//! Paper-level experiments: PDE runs with tracking and energy monitoring,
//! PDE-versus-law trajectory comparison, energy growth, and observed-order
//! batteries on manufactured solutions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::elliptic::{SolverSettings, COMPATIBILITY_TOL};
use crate::energy::{
    energy_evolution_step, to_substituted, total_energies, EnergyReport, EvolutionTerms,
};
use crate::error::{Error, Result};
use crate::grid::{integrate, ComplexField, EdgeValues, Grid, ScalarField, VectorField};
use crate::landscape::{PinningLandscape, Well};
use crate::law::{integrate_law, OdeSolution, OdeSystem, VectorSource};
use crate::pinning::{
    solve_h0_with_source, solve_phi0_with_source, solve_psi_with_field, solve_xi0_x0,
    AuxiliaryFields, BoundaryData,
};
use crate::sim::{
    make_well_prepared, Coefficients, Flavor, ModelParams, PinnedForm, SimState, Simulator,
    VortexSpec,
};
use crate::vortex::{
    continuity_residual, detect, track, StopReason, TrackParams, Tracking, Trajectory, VortexState,
};
use crate::Complex64;

/// Where the current-force field of a forced run comes from.
#[derive(Debug, Clone)]
pub enum Forcing {
    /// No applied current: `Z = 0` and `f_eps = lap(sqrt b) / sqrt b`.
    None,
    /// `Z` and `f_eps` from boundary data through the auxiliary fields.
    Boundary {
        data: BoundaryData,
        settings: SolverSettings,
    },
    /// A prescribed unit-current field `Z` with `f_eps = 0`.
    Prescribed(VectorSource),
}

/// One PDE experiment: model, landscape, forcing, initial vortices and
/// recording schedule.
#[derive(Debug, Clone)]
pub struct PdeCase {
    pub grid: Grid,
    pub params: ModelParams,
    pub landscape: PinningLandscape,
    pub forcing: Forcing,
    pub vortices: Vec<VortexSpec>,
    pub horizon: f64,
    /// Step override; the simulator default otherwise.
    pub dt: Option<f64>,
    /// Time between recorded frames, rounded to a whole number of steps.
    pub frame_interval: f64,
    /// Keep the order parameter every this many frames.
    pub snapshot_every: Option<usize>,
    /// Record the energy identity and continuity residual on the step ending at each frame.
    pub record_identities: bool,
}

/// A case with its simulator, coefficients and matching point-vortex law.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub simulator: Simulator,
    pub b: ScalarField,
    pub auxiliary: Option<AuxiliaryFields>,
    /// Coefficients in which energies are evaluated.
    pub energy_coefficients: Coefficients,
    pub law: OdeSystem,
}

/// Recorded output of [`PdeCase::run`].
#[derive(Debug, Clone)]
pub struct PdeRun {
    pub dt: f64,
    pub steps: usize,
    pub frames: Vec<VortexState>,
    pub tracking: Tracking,
    pub energies: Vec<EnergyReport>,
    pub evolution: Vec<EvolutionTerms>,
    /// `(t, max |d_t mu + curl V|)` on the step ending at each frame.
    pub continuity: Vec<(f64, f64)>,
    pub max_modulus: f64,
    pub forcing_bound_holds: bool,
    /// States kept at the snapshot cadence, starting with the initial one.
    pub snapshots: Vec<SimState>,
    pub final_state: SimState,
}

impl PdeRun {
    /// First time the detected vortex count differs from the initial one.
    pub fn count_change(&self) -> Option<f64> {
        let n0 = self.frames.first().map_or(0, |f| f.vortices.len());
        self.frames
            .iter()
            .find(|f| f.vortices.len() != n0)
            .map(|f| f.t)
    }
}

impl PdeCase {
    pub fn prepare(&self) -> Result<PreparedCase> {
        self.params.validate()?;
        if !(self.horizon > 0.0 && self.frame_interval > 0.0) {
            return Err(Error::InvalidParameter(
                "horizon and frame interval must be positive".into(),
            ));
        }
        let g = self.grid;
        let b = self.landscape.realize(g)?;
        let grad_h = VectorField::from_fn(g, |x, y| {
            self.landscape.grad_log_b(x, y).unwrap_or([0.0, 0.0])
        });
        let (lx, ly) = (g.lx(), g.ly());
        let mut law = OdeSystem {
            alpha: self.params.alpha,
            beta: self.params.beta,
            lambda: self.params.lambda,
            degrees: self.vortices.iter().map(|v| v.degree).collect(),
            z: VectorSource::Constant([0.0, 0.0]),
            landscape: self.landscape.clone(),
            lx,
            ly,
        };
        let unforced = Coefficients::unforced(b.clone())?.with_grad_h(grad_h.clone())?;
        if self.params.flavor == Flavor::PinnedGl {
            law.lambda = 0.0;
            let simulator = Simulator::pinned(self.params, b.clone(), PinnedForm::Substituted)?;
            return Ok(PreparedCase {
                simulator,
                b,
                auxiliary: None,
                energy_coefficients: unforced,
                law,
            });
        }
        let (coeffs, auxiliary) = match &self.forcing {
            Forcing::None => (unforced, None),
            Forcing::Boundary { data, settings } => {
                let aux = AuxiliaryFields::solve(
                    &b,
                    data,
                    self.params.alpha,
                    self.params.sigma,
                    *settings,
                )?;
                law.z = VectorSource::gridded(&aux.z);
                let c = Coefficients::from_auxiliary(&aux, b.clone(), &self.params)?
                    .with_grad_h(grad_h)?;
                (c, Some(aux))
            }
            Forcing::Prescribed(z) => {
                let s = self.params.lambda * self.params.log_eps();
                let (mut zx, mut zy) = (Vec::with_capacity(g.len()), Vec::with_capacity(g.len()));
                for j in 0..g.ny() {
                    for i in 0..g.nx() {
                        let v = z.eval(g.x(i), g.y(j))?;
                        zx.push(s * v[0]);
                        zy.push(s * v[1]);
                    }
                }
                let zf = VectorField::from_vecs(g, zx, zy)?;
                law.z = z.clone();
                let c =
                    Coefficients::new(b.clone(), zf, ScalarField::zeros(g))?.with_grad_h(grad_h)?;
                (c, None)
            }
        };
        let simulator = Simulator::forced(self.params, coeffs.clone())?;
        Ok(PreparedCase {
            simulator,
            b,
            auxiliary,
            energy_coefficients: coeffs,
            law,
        })
    }

    pub fn run(&self) -> Result<PdeRun> {
        let prepared = self.prepare()?;
        self.run_prepared(&prepared)
    }

    /// Integrate, recording detections and energies every frame, then track.
    pub fn run_prepared(&self, p: &PreparedCase) -> Result<PdeRun> {
        let sim = &p.simulator;
        let u0 = make_well_prepared(&self.vortices, &self.params, &p.b)?;
        let dt_max = self.dt.unwrap_or_else(|| sim.default_dt());
        let every = ((self.frame_interval / dt_max).ceil() as usize).max(1);
        let frames_total = (self.horizon / (every as f64 * dt_max)).ceil().max(1.0) as usize;
        let steps = frames_total * every;
        let dt = self.horizon / steps as f64;
        let eps = self.params.eps;
        let pinned = self.params.flavor == Flavor::PinnedGl;
        let energy_state = |u: &ComplexField| -> Result<ComplexField> {
            if pinned {
                to_substituted(u, &p.b)
            } else {
                Ok(u.clone())
            }
        };
        let b_at = |x: f64, y: f64| self.landscape.b(x, y).unwrap_or(f64::NAN);
        let mut run = PdeRun {
            dt,
            steps,
            frames: Vec::with_capacity(frames_total + 1),
            tracking: Tracking {
                trajectories: Vec::new(),
                ambiguities: Vec::new(),
            },
            energies: Vec::new(),
            evolution: Vec::new(),
            continuity: Vec::new(),
            max_modulus: u0.max_modulus(),
            forcing_bound_holds: sim.forcing_bound_holds(),
            snapshots: Vec::new(),
            final_state: SimState {
                t: 0.0,
                u: u0.clone(),
            },
        };
        let record = |state: &SimState, prev: Option<&SimState>, run: &mut PdeRun| -> Result<()> {
            if let Some(k) = self.snapshot_every {
                if run.frames.len().is_multiple_of(k.max(1)) {
                    run.snapshots.push(state.clone());
                }
            }
            let frame = detect(&state.u, state.t);
            let v = energy_state(&state.u)?;
            run.energies.push(total_energies(
                state.t,
                &v,
                &p.energy_coefficients,
                eps,
                Some((&frame, &b_at)),
            ));
            if let (Some(prev), true) = (prev, self.record_identities) {
                let h = state.t - prev.t;
                let w = energy_state(&prev.u)?;
                run.evolution.push(energy_evolution_step(
                    state.t,
                    &w,
                    &v,
                    h,
                    &p.energy_coefficients,
                    self.params.alpha,
                    eps,
                )?);
                run.continuity
                    .push((state.t, continuity_residual(&w, &v, h)?.max_abs()));
            }
            run.frames.push(frame);
            Ok(())
        };
        let mut state = SimState { t: 0.0, u: u0 };
        record(&state, None, &mut run)?;
        for n in 1..=steps {
            let mut next = sim.step(&state, dt)?;
            if n == steps {
                next.t = self.horizon;
            }
            run.max_modulus = run.max_modulus.max(next.u.max_modulus());
            if n % every == 0 {
                record(&next, Some(&state), &mut run)?;
            }
            state = next;
        }
        let v_max = p.law.speed_bound(&self.grid)?;
        run.tracking = track(
            &run.frames,
            &self.grid,
            TrackParams {
                eps,
                dt: every as f64 * dt,
                v_max,
            },
        )?;
        run.final_state = state;
        Ok(run)
    }

    /// The point-vortex law for this case from the prescribed positions.
    pub fn integrate_law(&self, dt: f64) -> Result<OdeSolution> {
        let p = self.prepare()?;
        let initial: Vec<[f64; 2]> = self.vortices.iter().map(|v| v.position).collect();
        integrate_law(&p.law, &initial, self.horizon, dt)
    }
}

/// PDE-versus-law trajectory discrepancy.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrajectoryComparison {
    /// `pairs[k] = (pde id, law index)`.
    pub pairs: Vec<(usize, usize)>,
    pub per_vortex: Vec<f64>,
    pub sup_error: f64,
    pub window_end: f64,
    pub t_star_pde: f64,
    pub t_star_ode: f64,
    pub stop_pde: StopReason,
    pub stop_ode: StopReason,
}

/// First non-horizon termination among `trajectories`, or the horizon.
pub fn pde_stop(trajectories: &[Trajectory]) -> (f64, StopReason) {
    trajectories
        .iter()
        .filter(|t| t.termination.reason != StopReason::Horizon)
        .map(|t| (t.termination.t, t.termination.reason))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or_else(|| {
            let t = trajectories
                .iter()
                .map(|t| t.termination.t)
                .fold(0.0, f64::max);
            (t, StopReason::Horizon)
        })
}

/// Sup-norm distance between tracked PDE vortices and the law's paths on
/// `[0, min(T*_pde, T*_ode) - guard]`, sampled at the PDE frame times.
/// Vortices are paired by initial position among equal degrees.
pub fn compare_trajectories(
    pde: &[Trajectory],
    ode: &OdeSolution,
    guard: f64,
) -> Result<TrajectoryComparison> {
    let ode_traj = ode.trajectories();
    if pde.len() != ode_traj.len() {
        return Err(Error::CountMismatch(format!(
            "{} tracked vortices, {} in the law",
            pde.len(),
            ode_traj.len()
        )));
    }
    if let Some(late) = pde
        .iter()
        .find(|t| t.samples.first().is_none_or(|s| s.0 > 0.0))
    {
        return Err(Error::CountMismatch(format!(
            "vortex {} appeared after t = 0",
            late.id
        )));
    }
    let (t_star_pde, stop_pde) = pde_stop(pde);
    let t_star_ode = ode.t_star;
    let window_end = t_star_pde.min(t_star_ode) - guard;
    // A trajectory that ends before the window without being part of the
    // first event means detection lost it.
    if let Some(lost) = pde.iter().find(|t| t.termination.t < window_end) {
        return Err(Error::CountMismatch(format!(
            "vortex {} lost at t = {}",
            lost.id, lost.termination.t
        )));
    }
    let mut free: Vec<usize> = (0..ode_traj.len()).collect();
    let mut pairs = Vec::with_capacity(pde.len());
    for tr in pde {
        let a = tr.start();
        let best = free
            .iter()
            .enumerate()
            .filter(|(_, &k)| ode_traj[k].degree == tr.degree)
            .min_by(|x, y| {
                let d = |k: usize| {
                    let b = ode_traj[k].start();
                    (a[0] - b[0]).hypot(a[1] - b[1])
                };
                d(*x.1).total_cmp(&d(*y.1))
            })
            .map(|(slot, &k)| (slot, k));
        let Some((slot, k)) = best else {
            return Err(Error::CountMismatch(format!(
                "no law vortex of degree {} for vortex {}",
                tr.degree, tr.id
            )));
        };
        free.swap_remove(slot);
        pairs.push((tr.id, k));
    }
    let mut per_vortex = Vec::with_capacity(pairs.len());
    for (tr, &(_, k)) in pde.iter().zip(&pairs) {
        let mut e: f64 = 0.0;
        for &(t, p) in tr.samples.iter().filter(|s| s.0 <= window_end) {
            if let Some(q) = ode_traj[k].position_at(t) {
                e = e.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        per_vortex.push(e);
    }
    Ok(TrajectoryComparison {
        sup_error: per_vortex.iter().copied().fold(0.0, f64::max),
        pairs,
        per_vortex,
        window_end,
        t_star_pde,
        t_star_ode,
        stop_pde,
        stop_ode: ode.stop_reason,
    })
}

/// Normalized excess energy `(F~ - pi sum b(a_i) L) / L` of a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyGrowth {
    pub eps: f64,
    pub times: Vec<f64>,
    pub excess: Vec<f64>,
    pub max_excess: f64,
    /// `pi inf b`.
    pub threshold: f64,
    pub count_constant_until: Option<f64>,
}

pub fn energy_growth(run: &PdeRun, eps: f64, inf_b: f64) -> EnergyGrowth {
    let l = eps.ln().abs();
    let (times, excess): (Vec<f64>, Vec<f64>) = run
        .energies
        .iter()
        .map(|e| (e.t, (e.f_tilde - e.vortex_target.unwrap_or(0.0) * l) / l))
        .unzip();
    EnergyGrowth {
        eps,
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        times,
        excess,
        threshold: PI * inf_b,
        count_constant_until: run.count_change(),
    }
}

/// Slope of the least-squares line through `(log h, log err)`.
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Which discretization a battery refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryTarget {
    /// The four linear boundary-value solvers, ladder of grid sizes.
    Elliptic,
    /// The structural identity residual, ladder of grid sizes.
    Identity,
    /// RK4 on the exponential-decay law, ladder of step divisors.
    Rk4,
    /// IMEX stepping against a fine-step reference, ladder of step divisors.
    Imex,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderEstimate {
    pub quantity: String,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
    /// Accepted orders; no upper bound when the second entry is `None`.
    pub band: (f64, Option<f64>),
    pub pass: bool,
}

impl OrderEstimate {
    fn new(quantity: &str, steps: Vec<f64>, errors: Vec<f64>, band: (f64, Option<f64>)) -> Self {
        let order = observed_order(&steps, &errors);
        Self {
            quantity: quantity.into(),
            pass: order >= band.0 && band.1.is_none_or(|hi| order <= hi),
            steps,
            errors,
            order,
            band,
        }
    }
}

/// Observed orders for `target` over `ladder` (at least three rungs).
pub fn convergence_battery(target: BatteryTarget, ladder: &[usize]) -> Result<Vec<OrderEstimate>> {
    if ladder.len() < 3 {
        return Err(Error::InvalidParameter(
            "a refinement ladder needs at least three rungs".into(),
        ));
    }
    match target {
        BatteryTarget::Elliptic => {
            let errs = ladder
                .iter()
                .map(|&n| elliptic_errors(n))
                .collect::<Result<Vec<_>>>()?;
            let h: Vec<f64> = ladder.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
            Ok(["phi0", "h0", "xi0", "psi0"]
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    OrderEstimate::new(
                        name,
                        h.clone(),
                        errs.iter().map(|e| e[k]).collect(),
                        (1.8, Some(2.2)),
                    )
                })
                .collect())
        }
        BatteryTarget::Identity => {
            let errs = ladder
                .iter()
                .map(|&n| identity_residual_on(n))
                .collect::<Result<Vec<_>>>()?;
            let h: Vec<f64> = ladder.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
            Ok(vec![OrderEstimate::new(
                "identity_residual",
                h,
                errs,
                (1.8, None),
            )])
        }
        BatteryTarget::Rk4 => {
            let land = PinningLandscape::expression("exp((x - 0.5)^2 + (y - 0.5)^2)")?;
            let sys = OdeSystem {
                alpha: 1.0,
                beta: 0.0,
                lambda: 0.0,
                degrees: vec![1],
                z: VectorSource::Constant([0.0, 0.0]),
                landscape: land,
                lx: 1.0,
                ly: 1.0,
            };
            let exact = [0.5 + 0.3 * (-2.0f64).exp(), 0.5 - 0.2 * (-2.0f64).exp()];
            let mut steps = Vec::new();
            let mut errors = Vec::new();
            for &m in ladder {
                let dt = 0.4 / m as f64;
                let p = integrate_law(&sys, &[[0.8, 0.3]], 1.0, dt)?.final_positions()[0];
                steps.push(dt);
                errors.push((p[0] - exact[0]).hypot(p[1] - exact[1]));
            }
            Ok(vec![OrderEstimate::new(
                "rk4_position",
                steps,
                errors,
                (3.7, Some(4.3)),
            )])
        }
        BatteryTarget::Imex => {
            let g = Grid::unit_square(33)?;
            let params = ModelParams {
                alpha: 1.0,
                beta: 0.5,
                sigma: 1.0,
                eps: 0.2,
                lambda: 0.0,
                flavor: Flavor::ForcedGl,
            };
            let b = ScalarField::from_fn(g, |x, y| {
                1.0 - 0.3 * (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / 0.1).exp()
            });
            let sim = Simulator::forced(params, Coefficients::unforced(b)?)?;
            let u0 = ComplexField::from_fn(g, |x, y| {
                Complex64::from_polar(0.8 + 0.1 * (PI * x).cos(), (PI * y).cos() + x)
            });
            let horizon = 0.1;
            let end = |dt: f64| -> Result<ComplexField> {
                Ok(sim
                    .run(
                        SimState {
                            t: 0.0,
                            u: u0.clone(),
                        },
                        horizon,
                        dt,
                        usize::MAX,
                        |_| Ok(()),
                    )?
                    .final_state
                    .u)
            };
            let finest = *ladder.iter().max().expect("nonempty");
            let reference = end(horizon / (64 * finest) as f64)?;
            let mut steps = Vec::new();
            let mut errors = Vec::new();
            for &m in ladder {
                let dt = horizon / m as f64;
                steps.push(dt);
                errors.push(end(dt)?.max_diff(&reference));
            }
            Ok(vec![OrderEstimate::new(
                "imex_state",
                steps,
                errors,
                (0.8, Some(1.2)),
            )])
        }
    }
}

/// Max-norm errors of the four solvers against manufactured solutions on the unit square.
fn elliptic_errors(n: usize) -> Result<[f64; 4]> {
    let g = Grid::unit_square(n)?;
    let settings = SolverSettings::default();
    let b_fn = |x: f64, y: f64| 1.0 + 0.3 * x * x * y;
    let grad_b = |x: f64, y: f64| [0.6 * x * y, 0.3 * x * x];
    let b = ScalarField::from_fn(g, b_fn);
    let flux_of = |grad: &dyn Fn(f64, f64) -> [f64; 2]| {
        EdgeValues::from_fn(&g, |e, x, y| {
            let (v, nu) = (grad(x, y), e.normal());
            v[0] * nu[0] + v[1] * nu[1]
        })
    };
    let (cx, sx) = (|x: f64| (PI * x).cos(), |x: f64| (PI * x).sin());

    // -sigma lap phi + alpha b phi = s.
    let (alpha, sigma) = (1.5, 0.7);
    let phi = |x: f64, y: f64| cx(x) * cx(y) + 0.5 * x * y;
    let grad_phi = |x: f64, y: f64| [-PI * sx(x) * cx(y) + 0.5 * y, -PI * cx(x) * sx(y) + 0.5 * x];
    let s = ScalarField::from_fn(g, |x, y| {
        sigma * 2.0 * PI * PI * cx(x) * cx(y) + alpha * b_fn(x, y) * phi(x, y)
    });
    let flux = flux_of(&|x, y| {
        let v = grad_phi(x, y);
        [sigma * v[0], sigma * v[1]]
    });
    let e_phi = solve_phi0_with_source(&b, alpha, sigma, &s, &flux, settings)?
        .field
        .max_diff(&ScalarField::from_fn(g, phi));

    // -div(grad h / b) + h = s with h on the boundary.
    let hf = |x: f64, y: f64| sx(x) * sx(y) + x + y * y;
    let grad_hf = |x: f64, y: f64| [PI * cx(x) * sx(y) + 1.0, PI * sx(x) * cx(y) + 2.0 * y];
    let lap_hf = |x: f64, y: f64| -2.0 * PI * PI * sx(x) * sx(y) + 2.0;
    let s = ScalarField::from_fn(g, |x, y| {
        let (bb, gb, gh) = (b_fn(x, y), grad_b(x, y), grad_hf(x, y));
        -lap_hf(x, y) / bb + (gb[0] * gh[0] + gb[1] * gh[1]) / (bb * bb) + hf(x, y)
    });
    let exact_h = ScalarField::from_fn(g, hf);
    let e_h = solve_h0_with_source(&b, &s, &EdgeValues::trace(&exact_h), settings)?
        .0
        .max_diff(&exact_h);

    // lap xi = h0 with xi = 0 on the boundary.
    let xi = |x: f64, y: f64| sx(x) * (2.0 * PI * y).sin();
    let h0 = ScalarField::from_fn(g, |x, y| -5.0 * PI * PI * xi(x, y));
    let e_xi = solve_xi0_x0(&h0, settings)?
        .0
        .max_diff(&ScalarField::from_fn(g, xi));

    // lap psi = div Y with dpsi/dnu = J . nu, Y = grad psi + perp_grad(sin(pi x) sin(pi y)).
    let psi = |x: f64, y: f64| cx(x) * cx(y) + 0.3 * x * x * y;
    let grad_psi = |x: f64, y: f64| {
        [
            -PI * sx(x) * cx(y) + 0.6 * x * y,
            -PI * cx(x) * sx(y) + 0.3 * x * x,
        ]
    };
    let y_fn = |x: f64, y: f64| {
        let gp = grad_psi(x, y);
        [gp[0] - PI * sx(x) * cx(y), gp[1] + PI * cx(x) * sx(y)]
    };
    let yv = VectorField::from_fn(g, y_fn);
    let sol = solve_psi_with_field(
        &yv,
        &flux_of(&y_fn),
        &flux_of(&grad_psi),
        COMPATIBILITY_TOL,
        settings,
    )?;
    let exact = ScalarField::from_fn(g, psi);
    let mean = integrate(&exact) / (g.lx() * g.ly());
    let e_psi = sol.field.max_diff(&exact.map(|v| v - mean));
    Ok([e_phi, e_h, e_xi, e_psi])
}

/// Structural identity residual for a Gaussian well, `J = (1, 0)` and
/// `H = 0.3 sin^2(pi x) sin^2(pi y)` on an `n x n` unit square.
pub fn identity_residual_on(n: usize) -> Result<f64> {
    let g = Grid::unit_square(n)?;
    let land = PinningLandscape::GaussianWell(Well {
        center: [0.5, 0.5],
        depth: 0.5,
        width: 0.2,
    });
    let b = land.realize(g)?;
    let bd = BoundaryData::from_fns(
        &g,
        |x, y| 0.3 * ((PI * x).sin() * (PI * y).sin()).powi(2),
        |_, _| [1.0, 0.0],
    )?;
    Ok(AuxiliaryFields::solve(&b, &bd, 1.0, 1.0, SolverSettings::default())?.identity_residual)
}

/// One metric row of a [`StudyReport`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricRow {
    pub case: String,
    pub config_hash: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StudyReport {
    pub kind: String,
    pub rows: Vec<MetricRow>,
    pub verdicts: Vec<Verdict>,
}

impl StudyReport {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            rows: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn row(&mut self, case: impl Into<String>, config_hash: &str, metrics: &[(&str, f64)]) {
        self.rows.push(MetricRow {
            case: case.into(),
            config_hash: config_hash.into(),
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// `true` when `values` strictly decrease.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vortex::Termination;

    fn law_case() -> (OdeSystem, Vec<[f64; 2]>) {
        let sys = OdeSystem {
            alpha: 1.0,
            beta: 0.4,
            lambda: 0.5,
            degrees: vec![1, -1],
            z: VectorSource::Constant([0.2, 0.3]),
            landscape: PinningLandscape::GaussianWell(Well {
                center: [0.5, 0.5],
                depth: 0.4,
                width: 0.3,
            }),
            lx: 1.0,
            ly: 1.0,
        };
        (sys, vec![[0.3, 0.4], [0.7, 0.6]])
    }

    #[test]
    fn identical_trajectories_compare_to_zero() {
        let (sys, a0) = law_case();
        let ode = integrate_law(&sys, &a0, 0.5, 1e-2).unwrap();
        let c = compare_trajectories(&ode.trajectories(), &ode, 0.0).unwrap();
        assert_eq!(c.sup_error, 0.0);
        assert_eq!(c.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn halved_law_step_is_within_rk4_tolerance() {
        let (sys, a0) = law_case();
        let a = integrate_law(&sys, &a0, 0.5, 1e-3).unwrap();
        let b = integrate_law(&sys, &a0, 0.5, 5e-4).unwrap();
        let c = compare_trajectories(&a.trajectories(), &b, 0.0).unwrap();
        assert!(c.sup_error < 1e-8, "{}", c.sup_error);
    }

    #[test]
    fn late_or_missing_vortices_are_count_mismatches() {
        let (sys, a0) = law_case();
        let ode = integrate_law(&sys, &a0, 0.5, 1e-2).unwrap();
        let mut tr = ode.trajectories();
        tr.pop();
        assert!(matches!(
            compare_trajectories(&tr, &ode, 0.0),
            Err(Error::CountMismatch(_))
        ));
        let mut tr = ode.trajectories();
        tr[1].samples.remove(0);
        assert!(matches!(
            compare_trajectories(&tr, &ode, 0.0),
            Err(Error::CountMismatch(_))
        ));
        let mut tr = ode.trajectories();
        tr[0].samples.truncate(3);
        tr[0].termination = Termination {
            reason: StopReason::Horizon,
            t: tr[0].samples[2].0,
        };
        assert!(matches!(
            compare_trajectories(&tr, &ode, 0.0),
            Err(Error::CountMismatch(_))
        ));
    }

    #[test]
    fn pairing_ignores_order() {
        let (sys, a0) = law_case();
        let ode = integrate_law(&sys, &a0, 0.5, 1e-2).unwrap();
        let mut tr = ode.trajectories();
        tr.reverse();
        let c = compare_trajectories(&tr, &ode, 0.0).unwrap();
        assert_eq!(c.pairs, vec![(1, 1), (0, 0)]);
        assert_eq!(c.sup_error, 0.0);
    }

    #[test]
    fn least_squares_order_of_exact_power() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((observed_order(&h, &e) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn battery_orders() {
        for est in convergence_battery(BatteryTarget::Rk4, &[1, 2, 4]).unwrap() {
            assert!(est.pass, "{est:?}");
        }
        for est in convergence_battery(BatteryTarget::Imex, &[10, 20, 40]).unwrap() {
            assert!(est.pass, "{est:?}");
        }
        for est in convergence_battery(BatteryTarget::Elliptic, &[17, 33, 65]).unwrap() {
            assert!(est.pass, "{est:?}");
        }
        assert!(convergence_battery(BatteryTarget::Rk4, &[1, 2]).is_err());
    }

    #[test]
    fn stationary_vortex_has_flat_excess() {
        let case = PdeCase {
            grid: Grid::new(65, 65, 2.0, 2.0).unwrap(),
            params: ModelParams {
                alpha: 1.0,
                beta: 0.0,
                sigma: 1.0,
                eps: 0.1,
                lambda: 0.0,
                flavor: Flavor::ForcedGl,
            },
            landscape: PinningLandscape::Constant(1.0),
            forcing: Forcing::None,
            vortices: vec![VortexSpec {
                position: [1.0, 1.0],
                degree: 1,
            }],
            horizon: 0.05,
            dt: None,
            frame_interval: 0.01,
            snapshot_every: None,
            record_identities: false,
        };
        let run = case.run().unwrap();
        let growth = energy_growth(&run, 0.1, 1.0);
        assert_eq!(growth.times.len(), 6);
        assert!(growth.count_constant_until.is_none());
        // Relaxation from the tanh profile only lowers the energy.
        assert!(
            growth.excess.windows(2).all(|w| w[1] <= w[0] + 1e-9),
            "{:?}",
            growth.excess
        );
        assert!(growth.max_excess < growth.threshold);
        let tr = &run.tracking.trajectories;
        assert_eq!(tr.len(), 1, "{tr:?} {:?}", run.frames);
        let end = tr[0].samples.last().unwrap().1;
        assert!((end[0] - 1.0).hypot(end[1] - 1.0) < 2.0 * case.grid.h());
    }
}
