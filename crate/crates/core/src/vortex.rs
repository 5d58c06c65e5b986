//! Vorticity and velocity of an order parameter, vortex detection by
//! plaquette winding, and frame-to-frame tracking.

use crate::error::{Error, Result};
use crate::grid::{
    complex_gradient, curl, inner_product, ComplexField, Grid, ScalarField, VectorField,
};
use crate::Complex64;
use std::f64::consts::PI;

/// `mu(u) = 2 (i d1 u, d2 u)`.
pub fn vorticity(u: &ComplexField) -> ScalarField {
    let (d1, d2) = complex_gradient(u);
    let id1 = d1.map(|z| z * Complex64::i());
    inner_product(&id1, &d2).expect("same grid").scaled(2.0)
}

/// `V = 2 ((u_next - u_prev) / dt, i grad w)` with `w` the given time level.
fn velocity_at(
    u_prev: &ComplexField,
    u_next: &ComplexField,
    w: &ComplexField,
    dt: f64,
) -> Result<VectorField> {
    u_prev.grid().check(u_next.grid(), "velocity")?;
    let g = *u_prev.grid();
    let ut = ComplexField::from_vec(
        g,
        u_prev
            .data()
            .iter()
            .zip(u_next.data())
            .map(|(a, b)| (b - a) / dt)
            .collect(),
    )?;
    let (d1, d2) = complex_gradient(w);
    let i = Complex64::i();
    let v1 = inner_product(&ut, &d1.map(|z| z * i))?.scaled(2.0);
    let v2 = inner_product(&ut, &d2.map(|z| z * i))?.scaled(2.0);
    VectorField::from_components(v1, v2)
}

/// `V = 2 ((u_next - u_prev) / dt, i grad u_prev)`, the velocity at the
/// start of the step.
pub fn velocity(u_prev: &ComplexField, u_next: &ComplexField, dt: f64) -> Result<VectorField> {
    velocity_at(u_prev, u_next, u_prev, dt)
}

/// `V = 2 ((u_next - u_prev) / dt, i grad u_mid)` with `u_mid` the average.
pub fn velocity_midpoint(
    u_prev: &ComplexField,
    u_next: &ComplexField,
    dt: f64,
) -> Result<VectorField> {
    u_prev.grid().check(u_next.grid(), "velocity")?;
    let mid = ComplexField::from_vec(
        *u_prev.grid(),
        u_prev
            .data()
            .iter()
            .zip(u_next.data())
            .map(|(a, b)| (a + b) * 0.5)
            .collect(),
    )?;
    velocity_at(u_prev, u_next, &mid, dt)
}

/// `(mu(u_next) - mu(u_prev)) / dt + curl V` at every node, `V` from
/// [`velocity`]. The time part is `2 dt (i d1 u_t, d2 u_t)` and the space
/// part is the `O(h^2)` product-rule defect of the stencils. With
/// [`velocity_midpoint`] the time part vanishes identically.
pub fn continuity_residual(
    u_prev: &ComplexField,
    u_next: &ComplexField,
    dt: f64,
) -> Result<ScalarField> {
    let v = velocity(u_prev, u_next, dt)?;
    let dmu = vorticity(u_next).zip_map(&vorticity(u_prev), |a, b| (a - b) / dt);
    Ok(dmu.zip_map(&curl(&v), |a, b| a + b))
}

/// Principal value of a phase difference, in `(-pi, pi]`.
fn wrap(d: f64) -> f64 {
    let mut w = d % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn winding_of(phases: &[f64]) -> i32 {
    let n = phases.len();
    let total: f64 = (0..n).map(|k| wrap(phases[(k + 1) % n] - phases[k])).sum();
    (total / (2.0 * PI)).round() as i32
}

/// Phase at a node. An exact zero takes the phase of `u` a little along the
/// diagonal `(1, 1)`, which moves the zero into the plaquette to its lower
/// left so that exactly one plaquette winds.
fn node_phase(u: &ComplexField, i: usize, j: usize) -> f64 {
    let z = u.at(i, j);
    if z.norm() >= DEGENERATE_MODULUS {
        return z.arg();
    }
    let g = u.grid();
    let diff = |lo: Complex64, hi: Complex64| hi - lo;
    let dx = diff(
        u.at(i.saturating_sub(1), j),
        u.at((i + 1).min(g.nx() - 1), j),
    );
    let dy = diff(
        u.at(i, j.saturating_sub(1)),
        u.at(i, (j + 1).min(g.ny() - 1)),
    );
    (dx + dy).arg()
}

/// Winding of plaquette `(i, j)`, corners traversed counterclockwise.
fn plaquette_winding(u: &ComplexField, i: usize, j: usize) -> i32 {
    winding_of(&[
        node_phase(u, i, j),
        node_phase(u, i + 1, j),
        node_phase(u, i + 1, j + 1),
        node_phase(u, i, j + 1),
    ])
}

/// Winding of `u` along the outer boundary loop.
pub fn boundary_winding(u: &ComplexField) -> i32 {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mut loop_phases = Vec::with_capacity(2 * (nx + ny));
    loop_phases.extend((0..nx - 1).map(|i| u.at(i, 0).arg()));
    loop_phases.extend((0..ny - 1).map(|j| u.at(nx - 1, j).arg()));
    loop_phases.extend((1..nx).rev().map(|i| u.at(i, ny - 1).arg()));
    loop_phases.extend((1..ny).rev().map(|j| u.at(0, j).arg()));
    winding_of(&loop_phases)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectedVortex {
    pub position: [f64; 2],
    pub degree: i32,
    /// `|u|` vanished on the whole cluster boundary; position is the centroid.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexState {
    pub t: f64,
    pub vortices: Vec<DetectedVortex>,
    /// Nonzero plaquette windings `(i, j, w)`, plaquette `(i, j)` spanning
    /// nodes `i..=i+1` by `j..=j+1`.
    pub raw_winding: Vec<(usize, usize, i32)>,
}

impl VortexState {
    pub fn total_degree(&self) -> i32 {
        self.raw_winding.iter().map(|w| w.2).sum()
    }
}

/// Zero of the bilinear interpolant of `(Re u, Im u)` on plaquette `(i, j)`,
/// in local coordinates, if Newton's method finds one inside.
fn bilinear_zero(u: &ComplexField, i: usize, j: usize) -> Option<(f64, f64)> {
    let (a, b, c, d) = (
        u.at(i, j),
        u.at(i + 1, j),
        u.at(i, j + 1),
        u.at(i + 1, j + 1),
    );
    let f = |s: f64, t: f64| {
        a * (1.0 - s) * (1.0 - t) + b * s * (1.0 - t) + c * (1.0 - s) * t + d * s * t
    };
    let (mut s, mut t) = (0.5, 0.5);
    for _ in 0..50 {
        let v = f(s, t);
        let fs = (b - a) * (1.0 - t) + (d - c) * t;
        let ft = (c - a) * (1.0 - s) + (d - b) * s;
        let det = fs.re * ft.im - fs.im * ft.re;
        if det.abs() < 1e-300 {
            return None;
        }
        let ds = (v.re * ft.im - v.im * ft.re) / det;
        let dt = (fs.re * v.im - fs.im * v.re) / det;
        s -= ds;
        t -= dt;
        if ds.abs() + dt.abs() < 1e-14 {
            break;
        }
    }
    let tol = 1e-9;
    if (-tol..=1.0 + tol).contains(&s)
        && (-tol..=1.0 + tol).contains(&t)
        && f(s, t).norm() < 1e-8 * (a.norm() + b.norm() + c.norm() + d.norm() + 1e-300)
    {
        Some((s.clamp(0.0, 1.0), t.clamp(0.0, 1.0)))
    } else {
        None
    }
}

/// Floor on `|u|` below which a node counts as an exact zero.
pub const DEGENERATE_MODULUS: f64 = 1e-12;

/// Plaquette windings, clustered with 8-connectivity; each cluster with a
/// nonzero net winding is one vortex.
pub fn detect(u: &ComplexField, t: f64) -> VortexState {
    let g = *u.grid();
    let (px, py) = (g.nx() - 1, g.ny() - 1);
    let mut w = vec![0i32; px * py];
    let mut raw = Vec::new();
    for j in 0..py {
        for i in 0..px {
            let k = plaquette_winding(u, i, j);
            if k != 0 {
                w[j * px + i] = k;
                raw.push((i, j, k));
            }
        }
    }
    let mut seen = vec![false; px * py];
    let mut vortices = Vec::new();
    for &(i0, j0, _) in &raw {
        if seen[j0 * px + i0] {
            continue;
        }
        seen[j0 * px + i0] = true;
        let mut stack = vec![(i0, j0)];
        let mut members = Vec::new();
        while let Some((i, j)) = stack.pop() {
            members.push((i, j));
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= px as i64 || nj >= py as i64 {
                        continue;
                    }
                    let q = nj as usize * px + ni as usize;
                    if w[q] != 0 && !seen[q] {
                        seen[q] = true;
                        stack.push((ni as usize, nj as usize));
                    }
                }
            }
        }
        members.sort_unstable();
        let degree: i32 = members.iter().map(|&(i, j)| w[j * px + i]).sum();
        if degree == 0 {
            continue;
        }
        vortices.push(locate_cluster(u, &g, &members, &w, px, degree));
    }
    vortices.sort_by(|a, b| {
        a.position[0]
            .total_cmp(&b.position[0])
            .then(a.position[1].total_cmp(&b.position[1]))
    });
    VortexState {
        t,
        vortices,
        raw_winding: raw,
    }
}

fn locate_cluster(
    u: &ComplexField,
    g: &Grid,
    members: &[(usize, usize)],
    w: &[i32],
    px: usize,
    degree: i32,
) -> DetectedVortex {
    let centroid = {
        let n = members.len() as f64;
        let (sx, sy) = members.iter().fold((0.0, 0.0), |acc, &(i, j)| {
            (acc.0 + g.x(i) + 0.5 * g.hx(), acc.1 + g.y(j) + 0.5 * g.hy())
        });
        [sx / n, sy / n]
    };
    let degenerate = members.iter().all(|&(i, j)| {
        [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
            .iter()
            .all(|&(a, b)| u.at(a, b).norm() < DEGENERATE_MODULUS)
    });
    if degenerate {
        return DetectedVortex {
            position: centroid,
            degree,
            degenerate,
        };
    }
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for &(i, j) in members {
        let k = w[j * px + i];
        if let Some((s, t)) = bilinear_zero(u, i, j) {
            let wt = k.abs() as f64;
            sx += wt * (g.x(i) + s * g.hx());
            sy += wt * (g.y(j) + t * g.hy());
            sw += wt;
        }
    }
    let position = if sw > 0.0 {
        [sx / sw, sy / sw]
    } else {
        centroid
    };
    DetectedVortex {
        position,
        degree,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Collision,
    Exit,
    Horizon,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Collision => "collision",
            StopReason::Exit => "exit",
            StopReason::Horizon => "horizon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Termination {
    pub reason: StopReason,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trajectory {
    pub id: usize,
    pub degree: i32,
    /// `(t, [x, y])`, strictly increasing in `t`.
    pub samples: Vec<(f64, [f64; 2])>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn start(&self) -> [f64; 2] {
        self.samples[0].1
    }

    /// Position at time `t` by linear interpolation; `None` outside the sampled span.
    pub fn position_at(&self, t: f64) -> Option<[f64; 2]> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].0 || t > s[s.len() - 1].0 {
            return None;
        }
        let k = s.partition_point(|p| p.0 <= t);
        if k == 0 {
            return Some(s[0].1);
        }
        if k == s.len() {
            return Some(s[k - 1].1);
        }
        let (t0, a) = s[k - 1];
        let (t1, b) = s[k];
        let r = (t - t0) / (t1 - t0);
        Some([a[0] + r * (b[0] - a[0]), a[1] + r * (b[1] - a[1])])
    }
}

/// Length scales for tracking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackParams {
    pub eps: f64,
    /// Interval between frames.
    pub dt: f64,
    /// Speed bound from the point-vortex law.
    pub v_max: f64,
}

impl TrackParams {
    /// `10 max(h, dt v_max)`.
    pub fn gate(&self, g: &Grid) -> f64 {
        10.0 * g.h().max(self.dt * self.v_max)
    }

    /// `max(4 eps, 2h)`, used for both collision and exit.
    pub fn stop_radius(&self, g: &Grid) -> f64 {
        (4.0 * self.eps).max(2.0 * g.h())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    pub trajectories: Vec<Trajectory>,
    /// Frames where two candidate assignments tied within `0.1 h`.
    pub ambiguities: Vec<f64>,
}

struct Active {
    id: usize,
    degree: i32,
    samples: Vec<(f64, [f64; 2])>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Greedy nearest-neighbour matching of same-degree vortices between frames,
/// with collision and exit closing trajectories.
pub fn track(states: &[VortexState], grid: &Grid, params: TrackParams) -> Result<Tracking> {
    for w in states.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::InvalidParameter(
                "frames must be strictly increasing in t".into(),
            ));
        }
    }
    let gate = params.gate(grid);
    let r_stop = params.stop_radius(grid);
    let tie = 0.1 * grid.h();
    let mut active: Vec<Active> = Vec::new();
    let mut done: Vec<Trajectory> = Vec::new();
    let mut ambiguities = Vec::new();
    let mut next_id = 0;
    let close = |a: Active, reason: StopReason, t: f64, done: &mut Vec<Trajectory>| {
        done.push(Trajectory {
            id: a.id,
            degree: a.degree,
            samples: a.samples,
            termination: Termination { reason, t },
        });
    };

    for (frame, state) in states.iter().enumerate() {
        let t = state.t;
        let mut vs: Vec<DetectedVortex> = state.vortices.clone();
        vs.sort_by(|a, b| {
            a.degree
                .cmp(&b.degree)
                .then(a.position[0].total_cmp(&b.position[0]))
                .then(a.position[1].total_cmp(&b.position[1]))
        });
        let mut claimed = vec![false; vs.len()];
        if frame > 0 {
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for a in &active {
                let last = a.samples.last().expect("nonempty").1;
                for (vi, v) in vs.iter().enumerate() {
                    let d = dist(last, v.position);
                    if v.degree == a.degree && d <= gate {
                        pairs.push((d, a.id, vi));
                    }
                }
            }
            pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
            let mut matched: Vec<Option<usize>> = vec![None; active.len()];
            for (k, &(d, id, vi)) in pairs.iter().enumerate() {
                let ai = active.iter().position(|a| a.id == id).expect("active id");
                if matched[ai].is_some() || claimed[vi] {
                    continue;
                }
                let rival = pairs[k + 1..].iter().any(|&(d2, id2, vi2)| {
                    d2 - d < tie
                        && ((id2 == id && !claimed[vi2] && vi2 != vi) || (vi2 == vi && id2 != id))
                });
                if rival {
                    ambiguities.push(t);
                }
                matched[ai] = Some(vi);
                claimed[vi] = true;
            }
            let mut still = Vec::new();
            let mut vanished = Vec::new();
            for (a, m) in active.drain(..).zip(matched) {
                match m {
                    Some(vi) => {
                        let mut a = a;
                        a.samples.push((t, vs[vi].position));
                        still.push(a);
                    }
                    None => vanished.push(a),
                }
            }
            // A vortex that vanished next to a vanished partner of opposite
            // degree was annihilated; otherwise it left the domain.
            let last = |a: &Active| a.samples.last().expect("nonempty").1;
            let reasons: Vec<StopReason> = vanished
                .iter()
                .map(|a| {
                    let partner = vanished
                        .iter()
                        .any(|b| b.degree == -a.degree && dist(last(a), last(b)) <= gate + r_stop);
                    if partner {
                        StopReason::Collision
                    } else {
                        StopReason::Exit
                    }
                })
                .collect();
            for (a, r) in vanished.into_iter().zip(reasons) {
                close(a, r, t, &mut done);
            }
            active = still;
        }
        for (vi, v) in vs.iter().enumerate() {
            if !claimed[vi] {
                active.push(Active {
                    id: next_id,
                    degree: v.degree,
                    samples: vec![(t, v.position)],
                });
                next_id += 1;
            }
        }
        // Event checks on the updated positions.
        let pos: Vec<[f64; 2]> = active
            .iter()
            .map(|a| a.samples.last().expect("nonempty").1)
            .collect();
        let mut reason: Vec<Option<StopReason>> = vec![None; active.len()];
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                if active[i].degree == -active[j].degree && dist(pos[i], pos[j]) < r_stop {
                    reason[i] = Some(StopReason::Collision);
                    reason[j] = Some(StopReason::Collision);
                }
            }
        }
        for (i, p) in pos.iter().enumerate() {
            if reason[i].is_none() && grid.boundary_distance(p[0], p[1]) < r_stop {
                reason[i] = Some(StopReason::Exit);
            }
        }
        let mut keep = Vec::new();
        for (a, r) in active.drain(..).zip(reason) {
            match r {
                Some(r) => close(a, r, t, &mut done),
                None => keep.push(a),
            }
        }
        active = keep;
    }
    let t_end = states.last().map_or(0.0, |s| s.t);
    for a in active {
        close(a, StopReason::Horizon, t_end, &mut done);
    }
    done.sort_by_key(|tr| tr.id);
    Ok(Tracking {
        trajectories: done,
        ambiguities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;

    fn vortex_field(g: Grid, centers: &[([f64; 2], i32)], core: f64) -> ComplexField {
        ComplexField::from_fn(g, |x, y| {
            centers
                .iter()
                .fold(Complex64::new(1.0, 0.0), |acc, &(c, d)| {
                    let (dx, dy) = (x - c[0], y - c[1]);
                    let r = (dx * dx + dy * dy).sqrt();
                    acc * Complex64::from_polar((r / core).tanh(), d as f64 * dy.atan2(dx))
                })
        })
    }

    #[test]
    fn constant_and_plane_wave_have_no_vorticity() {
        let g = Grid::unit_square(32).unwrap();
        assert!(vorticity(&ComplexField::constant(g, Complex64::new(0.3, -0.2))).max_abs() < 1e-14);
        let wave = ComplexField::from_fn(g, |x, _| Complex64::from_polar(1.0, 3.0 * x));
        assert!(vorticity(&wave).max_abs() < 1e-10);
    }

    #[test]
    fn single_vortex_is_found_with_subgrid_accuracy() {
        let g = Grid::unit_square(64).unwrap();
        let a = [0.4137, 0.5821];
        let u = vortex_field(g, &[(a, 1)], 0.05);
        let s = detect(&u, 0.0);
        assert_eq!(s.vortices.len(), 1);
        assert_eq!(s.vortices[0].degree, 1);
        assert!(dist(s.vortices[0].position, a) < g.h());
        let c = detect(&u.conj(), 0.0);
        assert_eq!(c.vortices[0].degree, -1);
        assert_eq!(c.vortices[0].position, s.vortices[0].position);
        assert_eq!(boundary_winding(&u), 1);
        assert_eq!(s.total_degree(), 1);
    }

    #[test]
    fn zero_on_a_node_winds_exactly_once() {
        let g = Grid::unit_square(65).unwrap();
        for d in [1, -1] {
            let u = vortex_field(g, &[([0.5, 0.5], d)], 0.05);
            assert_eq!(u.at(32, 32).norm(), 0.0);
            let s = detect(&u, 0.0);
            assert_eq!(s.raw_winding.len(), 1, "{:?}", s.raw_winding);
            assert_eq!(s.vortices[0].degree, d);
            assert!(dist(s.vortices[0].position, [0.5, 0.5]) < 1e-12);
        }
    }

    #[test]
    fn integrated_vorticity_is_quantized() {
        let g = Grid::unit_square(256).unwrap();
        let u = vortex_field(g, &[([0.5, 0.5], 1)], 0.05);
        let total = integrate(&vorticity(&u));
        assert!((total - 2.0 * PI).abs() < 0.02 * 2.0 * PI, "total {total}");
    }

    #[test]
    fn static_frames_track_to_horizon() {
        let g = Grid::unit_square(64).unwrap();
        let u = vortex_field(g, &[([0.5, 0.5], 1)], 0.05);
        let states: Vec<_> = (0..100).map(|k| detect(&u, k as f64 * 0.01)).collect();
        let tr = track(
            &states,
            &g,
            TrackParams {
                eps: 0.05,
                dt: 0.01,
                v_max: 1.0,
            },
        )
        .unwrap();
        assert_eq!(tr.trajectories.len(), 1);
        assert_eq!(
            tr.trajectories[0].termination,
            Termination {
                reason: StopReason::Horizon,
                t: 0.99
            }
        );
        assert_eq!(tr.trajectories[0].samples.len(), 100);
    }

    fn scripted(t: f64, vs: &[([f64; 2], i32)]) -> VortexState {
        VortexState {
            t,
            vortices: vs
                .iter()
                .map(|&(p, d)| DetectedVortex {
                    position: p,
                    degree: d,
                    degenerate: false,
                })
                .collect(),
            raw_winding: Vec::new(),
        }
    }

    #[test]
    fn approaching_pair_collides() {
        let g = Grid::unit_square(101).unwrap();
        let states: Vec<_> = (0..20)
            .map(|k| {
                let s = 0.2 - 0.01 * k as f64;
                scripted(0.1 * k as f64, &[([0.5 - s, 0.5], 1), ([0.5 + s, 0.5], -1)])
            })
            .collect();
        let tr = track(
            &states,
            &g,
            TrackParams {
                eps: 0.01,
                dt: 0.1,
                v_max: 0.1,
            },
        )
        .unwrap();
        assert_eq!(tr.trajectories.len(), 2);
        let t = tr.trajectories[0].termination;
        assert_eq!(t.reason, StopReason::Collision);
        assert_eq!(tr.trajectories[1].termination, t);
    }

    #[test]
    fn drifting_vortex_exits() {
        let g = Grid::unit_square(101).unwrap();
        let states: Vec<_> = (0..30)
            .map(|k| scripted(k as f64, &[([0.5 + 0.02 * k as f64, 0.5], 1)]))
            .collect();
        let tr = track(
            &states,
            &g,
            TrackParams {
                eps: 0.01,
                dt: 1.0,
                v_max: 0.02,
            },
        )
        .unwrap();
        assert_eq!(tr.trajectories[0].termination.reason, StopReason::Exit);
    }

    #[test]
    fn velocity_vanishes_for_frozen_frames() {
        let g = Grid::unit_square(32).unwrap();
        let u = vortex_field(g, &[([0.5, 0.5], 1)], 0.1);
        assert_eq!(velocity(&u, &u, 0.1).unwrap().max_abs(), 0.0);
        let far = ComplexField::from_fn(g, |x, y| Complex64::from_polar(1.0, x + y));
        let far_rot = far.map(|z| z * Complex64::from_polar(1.0, 0.01));
        assert!(curl(&velocity(&far, &far_rot, 0.1).unwrap()).max_abs() < 1e-10);
    }

    #[test]
    fn translating_vortex_velocity_encodes_perpendicular_motion() {
        let g = Grid::unit_square(128).unwrap();
        let (a0, vel, dt) = ([0.5, 0.5], [0.3, -0.2], 1e-3);
        let a1 = [a0[0] + vel[0] * dt, a0[1] + vel[1] * dt];
        let v = velocity(
            &vortex_field(g, &[(a0, 1)], 0.03),
            &vortex_field(g, &[(a1, 1)], 0.03),
            dt,
        )
        .unwrap();
        // V ~ 2 pi a'^perp delta_a; integrate against a bump of unit height at a.
        let bump = ScalarField::from_fn(g, |x, y| {
            let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
            if r2 < 0.04 {
                (-(r2 / 0.04) / (1.0 - r2 / 0.04)).exp()
            } else {
                0.0
            }
        });
        let vx = integrate(&v.component(0).zip_map(&bump, |a, b| a * b));
        let vy = integrate(&v.component(1).zip_map(&bump, |a, b| a * b));
        let expect = [2.0 * PI * -vel[1], 2.0 * PI * vel[0]];
        assert!(
            ((vx - expect[0]).powi(2) + (vy - expect[1]).powi(2)).sqrt()
                < 0.1 * 2.0 * PI * 0.36f64.sqrt()
        );
    }
}
