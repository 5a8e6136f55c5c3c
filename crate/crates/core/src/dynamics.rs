//! Force balance and motion of a sphere near a plate: force–distance profiles
//! including gravity, levitation points, a cached force field on an adaptive
//! distance grid, and Newtonian trajectories optionally coupled to the
//! sphere's cooling.
//!
//! Distances are center-to-plate distances. Forces are positive towards the
//! plate, so a zero of the force is stable when the force grows through zero
//! with increasing distance.

use crate::constants::{C, G_ACCEL, HBAR, K_B};
use crate::error::{Error, Result};
use crate::forces::total_force;
use crate::materials::Material;
use crate::quadrature::{LmaxPolicy, QuadratureSpec};
use crate::radiation::{net_exchange, sphere_emission};
use crate::transfer::{sphere_plate_transfer_1refl, sphere_plate_transfer_dipole, Geometry, Method, TwoBodyConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Shape {
    Solid { r: f64 },
    Shell { r_outer: f64, r_inner: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// gravity pulls towards the plate
    AbovePlate,
    /// gravity pulls away from the plate
    BelowPlate,
}

#[derive(Debug, Clone)]
pub struct BodySpec {
    pub shape: Shape,
    /// kg/m³
    pub density: f64,
    /// J/(kg K)
    pub specific_heat: f64,
    pub material: Material,
}

impl BodySpec {
    pub fn validate(&self) -> Result<()> {
        match self.shape {
            Shape::Solid { r } if !(r > 0.0) => return Err(Error::Config(format!("sphere radius {r} must be positive"))),
            Shape::Shell { r_outer, r_inner } if !(r_inner >= 0.0 && r_inner < r_outer) => {
                return Err(Error::Config(format!(
                    "shell radii need 0 ≤ R_inner < R_outer (got {r_inner}, {r_outer})"
                )))
            }
            _ => {}
        }
        if !(self.density > 0.0) {
            return Err(Error::Config(format!("mass density {} must be positive", self.density)));
        }
        if !(self.specific_heat > 0.0) {
            return Err(Error::Config(format!("specific heat {} must be positive", self.specific_heat)));
        }
        Ok(())
    }

    /// Optical radius (the outer radius for shells).
    pub fn radius(&self) -> f64 {
        match self.shape {
            Shape::Solid { r } => r,
            Shape::Shell { r_outer, .. } => r_outer,
        }
    }

    pub fn mass(&self) -> f64 {
        let v = match self.shape {
            Shape::Solid { r } => r.powi(3),
            Shape::Shell { r_outer, r_inner } => r_outer.powi(3) - r_inner.powi(3),
        };
        self.density * 4.0 / 3.0 * PI * v
    }

    /// κ_s in J/K.
    pub fn heat_capacity(&self) -> f64 {
        self.mass() * self.specific_heat
    }

    /// Shells are treated optically as solid spheres; warns when the wall is
    /// thinner than three skin depths at the thermal peak of `t_max`.
    pub fn optics_warnings(&self, t_max: f64) -> Vec<String> {
        let Shape::Shell { r_outer, r_inner } = self.shape else {
            return Vec::new();
        };
        let w = 2.82 * K_B * t_max.max(1.0) / HBAR;
        let Ok((eps, mu)) = self.material.response(w) else {
            return vec!["shell treated as a solid sphere; skin depth unavailable".into()];
        };
        let k = (eps * mu).sqrt().im;
        let skin = if k > 0.0 { C / (w * k) } else { f64::INFINITY };
        let wall = r_outer - r_inner;
        if wall < 3.0 * skin {
            vec![format!(
                "shell wall {:.1} nm is below three skin depths ({:.1} nm); solid-sphere optics may be inaccurate",
                wall * 1e9,
                3.0 * skin * 1e9
            )]
        } else {
            Vec::new()
        }
    }
}

/// A sphere near a plate with fixed plate and environment temperatures.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sphere: BodySpec,
    pub orientation: Orientation,
    pub plate: Material,
    pub t_plate: f64,
    pub t_env: f64,
    pub t_sphere: f64,
    pub method: Method,
    pub policy: LmaxPolicy,
    pub spec: QuadratureSpec,
    pub include_gravity: bool,
    /// adds the sphere's net emission into the environment to its cooling
    pub environment_cooling: bool,
}

impl Scenario {
    pub fn config(&self, d: f64, t_sphere: f64) -> TwoBodyConfig {
        TwoBodyConfig {
            geometry: Geometry::SpherePlate { r: self.sphere.radius(), d },
            body1: self.plate.clone(),
            body2: self.sphere.material.clone(),
            t1: self.t_plate,
            t2: t_sphere,
            t_env: self.t_env,
        }
    }

    /// Gravitational force, positive towards the plate.
    pub fn gravity(&self) -> f64 {
        if !self.include_gravity {
            return 0.0;
        }
        let w = self.sphere.mass() * G_ACCEL;
        match self.orientation {
            Orientation::AbovePlate => w,
            Orientation::BelowPlate => -w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sphere.validate()?;
        self.config(2.0 * self.sphere.radius(), self.t_sphere).validate()
    }

    /// dT_s/dt from the transfer to the plate (and the environment if enabled).
    pub fn cooling_rate(&self, d: f64, t_sphere: f64) -> Result<f64> {
        let cfg = self.config(d, t_sphere);
        let h = match self.method {
            Method::Dipole => sphere_plate_transfer_dipole(&cfg, &self.spec)?,
            _ => sphere_plate_transfer_1refl(&cfg, self.policy, &self.spec)?,
        };
        let mut gain = h.h_1to2;
        if self.environment_cooling {
            let em = |t: f64| sphere_emission(&self.sphere.material, self.sphere.radius(), t, &self.spec).map(|e| e.total);
            gain -= net_exchange(em, t_sphere, self.t_env)?;
        }
        Ok(gain / self.sphere.heat_capacity())
    }

    /// Total force towards the plate (with gravity) at distance d.
    pub fn force(&self, d: f64, t_sphere: f64) -> Result<f64> {
        Ok(total_force(&self.config(d, t_sphere), self.method, self.policy, &self.spec)?.total + self.gravity())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub d: f64,
    pub total: f64,
    pub equilibrium: f64,
    pub interaction: f64,
    pub self_force: f64,
    pub gravity: f64,
    pub warnings: Vec<String>,
    /// set when the force evaluation failed at this point
    pub error: Option<String>,
}

/// F_total(d) with its components on the given grid; failures are annotated
/// per point instead of aborting the sweep.
pub fn force_profile(scn: &Scenario, grid: &[f64]) -> Vec<ProfilePoint> {
    let g = scn.gravity();
    grid.par_iter()
        .map(|&d| match total_force(&scn.config(d, scn.t_sphere), scn.method, scn.policy, &scn.spec) {
            Ok(b) => ProfilePoint {
                d,
                total: b.total + g,
                equilibrium: b.equilibrium,
                interaction: b.interaction_from_other,
                self_force: b.self_force,
                gravity: g,
                warnings: b.warnings,
                error: None,
            },
            Err(e) => ProfilePoint {
                d,
                total: f64::NAN,
                equilibrium: f64::NAN,
                interaction: f64::NAN,
                self_force: f64::NAN,
                gravity: g,
                warnings: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevitationPoint {
    pub d: f64,
    pub stability: Stability,
}

/// Zeros of a force (positive towards the plate) in [lo, hi]: sign changes on
/// a log-spaced scan of `n_scan` points, refined by bisection to relative
/// width `rel_tol`.
pub fn find_levitation_points<F>(force: F, lo: f64, hi: f64, n_scan: usize, rel_tol: f64) -> Result<Vec<LevitationPoint>>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(lo > 0.0 && hi > lo) || n_scan < 2 {
        return Err(Error::Config(format!("invalid scan window [{lo}, {hi}] with {n_scan} points")));
    }
    let ds: Vec<f64> = (0..n_scan).map(|i| lo * (hi / lo).powf(i as f64 / (n_scan - 1) as f64)).collect();
    let fs = ds.iter().map(|&d| force(d)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..n_scan - 1 {
        let (mut a, mut b, fa, fb) = (ds[i], ds[i + 1], fs[i], fs[i + 1]);
        if fa == 0.0 && i > 0 {
            continue; // counted as the right end of the previous bracket
        }
        if fa * fb > 0.0 || (fa == 0.0 && fb == 0.0) {
            continue;
        }
        let stability = if fa < fb { Stability::Stable } else { Stability::Unstable };
        let mut sa = fa.signum();
        while (b - a) > rel_tol * a {
            let m = 0.5 * (a + b);
            let fm = force(m)?;
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == sa {
                a = m;
                sa = fm.signum();
            } else {
                b = m;
            }
        }
        out.push(LevitationPoint { d: 0.5 * (a + b), stability });
    }
    Ok(out)
}

// ---------------------------------------------------------------- cached field

/// Cubic Hermite interpolation on non-uniform nodes with three-point slopes.
fn hermite<F: Fn(usize) -> f64>(xs: &[f64], y: F, x: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return y(0);
    }
    let i = match xs.partition_point(|&v| v <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let slope = |k: usize| -> f64 {
        if n == 2 {
            return (y(1) - y(0)) / (xs[1] - xs[0]);
        }
        let (a, b, c) = if k == 0 {
            (0, 1, 2)
        } else if k == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (k - 1, k, k + 1)
        };
        // derivative of the parabola through a, b, c at node k
        let (x0, x1, x2) = (xs[a], xs[b], xs[c]);
        let (y0, y1, y2) = (y(a), y(b), y(c));
        let xk = xs[k];
        y0 * (2.0 * xk - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * xk - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * xk - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    let h = xs[i + 1] - xs[i];
    let s = (x - xs[i]) / h;
    let (h00, h10, h01, h11) = (
        (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
        s * (1.0 - s) * (1.0 - s),
        s * s * (3.0 - 2.0 * s),
        s * s * (s - 1.0),
    );
    h00 * y(i) + h10 * h * slope(i) + h01 * y(i + 1) + h11 * h * slope(i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    /// interpolation error budget relative to the local value
    pub rel_tol: f64,
    /// absolute floor for the force check (N)
    pub force_floor: f64,
    pub initial_nodes: usize,
    pub max_nodes: usize,
    pub t_nodes: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        FieldOptions {
            rel_tol: 5e-3,
            force_floor: 0.0,
            initial_nodes: 12,
            max_nodes: 240,
            t_nodes: 9,
        }
    }
}

/// Force (towards the plate, with gravity) and dT_s/dt on a grid in
/// (ln d, T_s), cubic in both directions.
#[derive(Debug, Clone)]
pub struct ForceField {
    xs: Vec<f64>,
    ts: Vec<f64>,
    vals: Vec<Vec<[f64; 2]>>,
    pub d_range: (f64, f64),
    pub warnings: Vec<String>,
}

impl ForceField {
    /// Builds the grid from `eval(d, T) -> [force, dT/dt]`, refining the
    /// distance nodes until midpoint predictions agree within the budget.
    pub fn build<F>(eval: F, d_range: (f64, f64), t_range: (f64, f64), opts: FieldOptions) -> Result<ForceField>
    where
        F: Fn(f64, f64) -> Result<[f64; 2]> + Sync,
    {
        let (d_lo, d_hi) = d_range;
        if !(d_lo > 0.0 && d_hi > d_lo) {
            return Err(Error::Config(format!("invalid distance range [{d_lo}, {d_hi}]")));
        }
        let mut nt = if t_range.1 > t_range.0 { opts.t_nodes.max(2) } else { 1 };
        loop {
            let ts: Vec<f64> = (0..nt)
                .map(|j| {
                    if nt == 1 {
                        t_range.0
                    } else {
                        t_range.0 + (t_range.1 - t_range.0) * j as f64 / (nt - 1) as f64
                    }
                })
                .collect();
            let field = Self::build_d(&eval, d_range, &ts, opts)?;
            if nt == 1 || nt >= 33 {
                return Ok(field);
            }
            // check the temperature direction at three distance nodes
            let n = field.xs.len();
            let probes: Vec<(usize, f64)> = [0, n / 2, n - 1]
                .iter()
                .flat_map(|&i| ts.windows(2).map(move |w| (i, 0.5 * (w[0] + w[1]))))
                .collect();
            let got = probes.par_iter().map(|&(i, t)| eval(field.xs[i].exp(), t)).collect::<Result<Vec<_>>>()?;
            let floor = field.floors(opts);
            let ok = probes.iter().zip(&got).all(|(&(i, t), v)| {
                let p = field.eval_ln(field.xs[i], t);
                (0..2).all(|c| (p[c] - v[c]).abs() <= opts.rel_tol * v[c].abs().max(floor[c]))
            });
            if ok {
                return Ok(field);
            }
            nt = 2 * nt - 1;
        }
    }

    fn floors(&self, opts: FieldOptions) -> [f64; 2] {
        let mut m = [0.0f64; 2];
        for col in &self.vals {
            for v in col {
                m[0] = m[0].max(v[0].abs());
                m[1] = m[1].max(v[1].abs());
            }
        }
        [opts.force_floor.max(1e-6 * m[0]), 1e-3 * m[1]]
    }

    fn build_d<F>(eval: &F, d_range: (f64, f64), ts: &[f64], opts: FieldOptions) -> Result<ForceField>
    where
        F: Fn(f64, f64) -> Result<[f64; 2]> + Sync,
    {
        let columns = |xs: &[f64]| -> Result<Vec<Vec<[f64; 2]>>> {
            let flat = xs
                .par_iter()
                .flat_map(|&x| ts.par_iter().map(move |&t| (x, t)))
                .map(|(x, t)| eval(x.exp(), t))
                .collect::<Result<Vec<_>>>()?;
            Ok(flat.chunks(ts.len()).map(|c| c.to_vec()).collect())
        };
        let (a, b) = (d_range.0.ln(), d_range.1.ln());
        let n0 = opts.initial_nodes.max(4);
        let xs: Vec<f64> = (0..n0).map(|i| a + (b - a) * i as f64 / (n0 - 1) as f64).collect();
        let vals = columns(&xs)?;
        let mut field = ForceField {
            xs,
            ts: ts.to_vec(),
            vals,
            d_range,
            warnings: Vec::new(),
        };
        let mut pending: Vec<(f64, f64)> = field.xs.windows(2).map(|w| (w[0], w[1])).collect();
        while !pending.is_empty() {
            if field.xs.len() + pending.len() > opts.max_nodes {
                field.warnings.push(format!(
                    "force grid stopped at {} nodes with {} intervals above the interpolation budget",
                    field.xs.len(),
                    pending.len()
                ));
                break;
            }
            let mids: Vec<f64> = pending.iter().map(|(l, r)| 0.5 * (l + r)).collect();
            let got = columns(&mids)?;
            let floor = field.floors(opts);
            let mut next = Vec::new();
            for ((&(l, r), &m), col) in pending.iter().zip(&mids).zip(&got) {
                let bad = ts.iter().zip(col).any(|(&t, v)| {
                    let p = field.eval_ln(m, t);
                    (0..2).any(|c| (p[c] - v[c]).abs() > opts.rel_tol * v[c].abs().max(floor[c]))
                });
                if bad {
                    next.push((l, m));
                    next.push((m, r));
                }
            }
            for (m, col) in mids.into_iter().zip(got) {
                let k = field.xs.partition_point(|&v| v < m);
                field.xs.insert(k, m);
                field.vals.insert(k, col);
            }
            pending = next;
        }
        Ok(field)
    }

    fn eval_ln(&self, x: f64, t: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = hermite(&self.xs, |i| hermite(&self.ts, |j| self.vals[i][j][c], t), x);
        }
        out
    }

    /// [force towards the plate, dT_s/dt] at (d, T_s); T_s is clamped to the grid.
    pub fn eval(&self, d: f64, t: f64) -> [f64; 2] {
        let t = t.clamp(self.ts[0], *self.ts.last().unwrap());
        self.eval_ln(d.ln(), t)
    }

    pub fn nodes(&self) -> usize {
        self.xs.len() * self.ts.len()
    }

    /// Force field of a scenario over [d_lo, d_hi] and sphere temperatures
    /// between the coldest reservoir and `t_max` (cooling only if requested).
    pub fn for_scenario(scn: &Scenario, d_range: (f64, f64), t_max: f64, cooling: bool, opts: FieldOptions) -> Result<ForceField> {
        scn.validate()?;
        let t_lo = if cooling { scn.t_plate.min(scn.t_env).min(t_max) } else { t_max };
        let mut opts = opts;
        if opts.force_floor == 0.0 {
            opts.force_floor = 1e-3 * scn.sphere.mass() * G_ACCEL;
        }
        let mut f = ForceField::build(
            |d, t| {
                let force = scn.force(d, t)?;
                let rate = if cooling { scn.cooling_rate(d, t)? } else { 0.0 };
                Ok([force, rate])
            },
            d_range,
            (t_lo, t_max),
            opts,
        )?;
        f.warnings.extend(scn.sphere.optics_warnings(t_max.max(scn.t_env)));
        Ok(f)
    }
}

// ---------------------------------------------------------------- trajectories

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceBalanceState {
    pub t: f64,
    pub d: f64,
    pub v: f64,
    pub t_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Outcome {
    Completed,
    Contact { time: f64 },
    Escape { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub t_end: f64,
    pub with_cooling: bool,
    /// contact when d falls to this value
    pub d_contact: f64,
    /// escape when d rises to this value
    pub d_escape: f64,
    pub rtol: f64,
    pub atol_d: f64,
    /// minimum spacing of stored samples (0 stores every step)
    pub sample_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<ForceBalanceState>,
    pub outcome: Outcome,
}

/// Forces and heating seen by the integrator.
pub trait Dynamics {
    /// force towards the plate (N)
    fn force(&self, d: f64, t_s: f64) -> f64;
    /// dT_s/dt (K/s)
    fn heating(&self, d: f64, t_s: f64) -> f64;
}

impl Dynamics for ForceField {
    fn force(&self, d: f64, t_s: f64) -> f64 {
        self.eval(d, t_s)[0]
    }
    fn heating(&self, d: f64, t_s: f64) -> f64 {
        self.eval(d, t_s)[1]
    }
}

impl<F: Fn(f64, f64) -> f64> Dynamics for F {
    fn force(&self, d: f64, t_s: f64) -> f64 {
        self(d, t_s)
    }
    fn heating(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates m d̈ = −F_towards(d, T_s) (and dT_s/dt from `Dynamics::heating`
/// when cooling is on) with adaptive Dormand–Prince steps until `t_end`,
/// contact or escape.
pub fn integrate_trajectory<D: Dynamics>(dynamics: &D, mass: f64, state0: ForceBalanceState, opts: &TrajectoryOptions) -> Result<Trajectory> {
    if !(mass > 0.0) || !(opts.t_end > 0.0) {
        return Err(Error::Config("mass and t_end must be positive".into()));
    }
    if !(state0.d > opts.d_contact && state0.d < opts.d_escape) {
        return Err(Error::Config(format!(
            "initial distance {} outside ({}, {})",
            state0.d, opts.d_contact, opts.d_escape
        )));
    }
    if state0.t_s < 0.0 {
        return Err(Error::Config("sphere temperature must be non-negative".into()));
    }
    let rhs = |y: &[f64; 3]| -> [f64; 3] {
        let tdot = if opts.with_cooling { dynamics.heating(y[0], y[2]) } else { 0.0 };
        [y[1], -dynamics.force(y[0], y[2]) / mass, tdot]
    };
    // error scales for (d, v, T)
    let v_scale = (2.0 * dynamics.force(state0.d, state0.t_s).abs().max(1e-300) * state0.d / mass).sqrt();
    let atol = [opts.atol_d, opts.atol_d * v_scale / state0.d.max(opts.atol_d), 1e-9 * state0.t_s.max(1.0)];
    let mut t = 0.0;
    let mut y = [state0.d, state0.v, state0.t_s];
    let mut h = opts.t_end * 1e-6;
    let h_min = opts.t_end * 1e-14;
    let mut samples = vec![ForceBalanceState {
        t,
        d: y[0],
        v: y[1],
        t_s: y[2],
    }];
    let mut last_sample = 0.0;
    let mut k = [[0.0; 3]; 7];
    k[0] = rhs(&y);
    loop {
        if t >= opts.t_end {
            return Ok(Trajectory {
                samples,
                outcome: Outcome::Completed,
            });
        }
        h = h.min(opts.t_end - t);
        for s in 1..7 {
            let mut ys = y;
            for (c, v) in ys.iter_mut().enumerate() {
                for j in 0..s {
                    *v += h * A[s - 1][j] * k[j][c];
                }
            }
            k[s] = rhs(&ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for c in 0..3 {
            let mut e = 0.0;
            for s in 0..7 {
                y5[c] += h * B5[s] * k[s][c];
                e += h * (B5[s] - B4[s]) * k[s][c];
            }
            let sc = atol[c] + opts.rtol * y[c].abs().max(y5[c].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            err = 1e10;
        }
        if err <= 1.0 {
            let t_new = t + h;
            if y5[0] <= opts.d_contact || y5[0] >= opts.d_escape {
                let target = if y5[0] <= opts.d_contact { opts.d_contact } else { opts.d_escape };
                // cubic Hermite for d(t) over the step (d' = v), root by bisection
                let acc = [k[0][1], k[6][1]];
                let dh = |s: f64| -> f64 {
                    let (h00, h10, h01, h11) = (
                        (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
                        s * (1.0 - s) * (1.0 - s),
                        s * s * (3.0 - 2.0 * s),
                        s * s * (s - 1.0),
                    );
                    h00 * y[0] + h10 * h * y[1] + h01 * y5[0] + h11 * h * y5[1] - target
                };
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..100 {
                    let m = 0.5 * (lo + hi);
                    if dh(m).signum() == dh(0.0).signum() {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                let f = 0.5 * (lo + hi);
                let te = t + f * h;
                let v = y[1] + h * (acc[0] * f + 0.5 * (acc[1] - acc[0]) * f * f);
                samples.push(ForceBalanceState {
                    t: te,
                    d: target,
                    v,
                    t_s: y[2] + f * (y5[2] - y[2]),
                });
                let outcome = if target == opts.d_contact {
                    Outcome::Contact { time: te }
                } else {
                    Outcome::Escape { time: te }
                };
                return Ok(Trajectory { samples, outcome });
            }
            t = t_new;
            y = y5;
            k[0] = k[6];
            if t - last_sample >= opts.sample_dt || t >= opts.t_end {
                samples.push(ForceBalanceState {
                    t,
                    d: y[0],
                    v: y[1],
                    t_s: y[2],
                });
                last_sample = t;
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < h_min {
            return Err(Error::Numerical(format!(
                "step size fell below {h_min:e} s at t = {t:e} s (d = {:e} m, v = {:e} m/s, T_s = {:.3} K)",
                y[0], y[1], y[2]
            )));
        }
    }
}

/// Mean time between successive maxima of d(t), from velocity sign changes.
pub fn oscillation_period(traj: &Trajectory) -> Option<f64> {
    let mut maxima = Vec::new();
    for w in traj.samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.v > 0.0 && b.v <= 0.0 {
            maxima.push(a.t + (b.t - a.t) * a.v / (a.v - b.v));
        }
    }
    if maxima.len() < 2 {
        return None;
    }
    Some((maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64)
}

/// Number of times d(t) turns from decreasing to increasing.
pub fn bounces(traj: &Trajectory) -> usize {
    traj.samples.windows(2).filter(|w| w[0].v < 0.0 && w[1].v >= 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::OpticalModel;

    fn opts(t_end: f64) -> TrajectoryOptions {
        TrajectoryOptions {
            t_end,
            with_cooling: false,
            d_contact: 1e-9,
            d_escape: 1.0,
            rtol: 1e-11,
            atol_d: 1e-18,
            sample_dt: 0.0,
        }
    }

    #[test]
    fn free_fall_parabola_and_energy() {
        let m = 2e-18;
        let grav = |_: f64, _: f64| m * G_ACCEL;
        let s0 = ForceBalanceState {
            t: 0.0,
            d: 1e-6,
            v: 0.0,
            t_s: 300.0,
        };
        let tr = integrate_trajectory(&grav, m, s0, &opts(2e-4)).unwrap();
        assert_eq!(tr.outcome, Outcome::Completed);
        let e0 = m * G_ACCEL * 1e-6;
        for s in &tr.samples {
            let exact = 1e-6 - 0.5 * G_ACCEL * s.t * s.t;
            assert!((s.d - exact).abs() < 1e-12 * 1e-6);
            let e = 0.5 * m * s.v * s.v + m * G_ACCEL * s.d;
            assert!(((e - e0) / e0).abs() < 1e-8);
        }
        // without support the sphere reaches the plate
        let tr = integrate_trajectory(
            &grav,
            m,
            s0,
            &TrajectoryOptions {
                d_contact: 1e-7,
                ..opts(1e-2)
            },
        )
        .unwrap();
        let Outcome::Contact { time } = tr.outcome else {
            panic!("{:?}", tr.outcome)
        };
        assert!((time - (2.0 * 0.9e-6 / G_ACCEL).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_well_period_and_stable_root() {
        let (m, k, d0) = (1e-17, 1e-10, 2e-6);
        let f = move |d: f64, _: f64| k * (d - d0);
        let pts = find_levitation_points(|d| Ok(f(d, 0.0)), 0.5e-6, 5e-6, 20, 1e-6).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].stability, Stability::Stable);
        assert!((pts[0].d / d0 - 1.0).abs() < 2e-6);
        let s0 = ForceBalanceState {
            t: 0.0,
            d: 2.5e-6,
            v: 0.0,
            t_s: 300.0,
        };
        let period = 2.0 * PI * (m / k).sqrt();
        let tr = integrate_trajectory(&f, m, s0, &opts(10.25 * period)).unwrap();
        assert!((oscillation_period(&tr).unwrap() / period - 1.0).abs() < 1e-6);
        assert_eq!(bounces(&tr), 10);
        let e = |s: &ForceBalanceState| 0.5 * m * s.v * s.v + 0.5 * k * (s.d - d0).powi(2);
        let e0 = e(&tr.samples[0]);
        let drift = tr.samples.iter().map(|s| ((e(s) - e0) / e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-6 * 10.0, "{drift}");
        let none = find_levitation_points(|_| Ok(-1.0), 1e-6, 2e-6, 10, 1e-6).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn cached_field_interpolates_within_budget() {
        let f = |d: f64, t: f64| Ok([1e-15 / (d * 1e6).powi(4) - 1e-16 + 1e-19 * t, -(t - 300.0) / (d * 1e6)]);
        let field = ForceField::build(
            f,
            (0.2e-6, 5e-6),
            (300.0, 900.0),
            FieldOptions {
                force_floor: 1e-18,
                ..Default::default()
            },
        )
        .unwrap();
        for i in 0..57 {
            let d = 0.2e-6 * (25f64).powf(i as f64 / 56.0);
            for t in [300.0, 433.0, 777.0] {
                let want = f(d, t).unwrap();
                let got = field.eval(d, t);
                assert!((got[0] - want[0]).abs() <= 5e-3 * want[0].abs().max(1e-18), "{d} {t}");
                assert!((got[1] - want[1]).abs() <= 5e-3 * want[1].abs().max(1e-3 * 600.0 / 0.2) + 1e-9);
            }
        }
    }

    #[test]
    fn body_properties() {
        let shell = BodySpec {
            shape: Shape::Shell {
                r_outer: 73e-9,
                r_inner: 23e-9,
            },
            density: 2700.0,
            specific_heat: 900.0,
            material: Material::new(OpticalModel::aluminum()),
        };
        shell.validate().unwrap();
        let m = 2700.0 * 4.0 / 3.0 * PI * (73e-9f64.powi(3) - 23e-9f64.powi(3));
        assert!((shell.mass() / m - 1.0).abs() < 1e-14);
        assert!(shell.optics_warnings(2862.0).is_empty());
        let thin = BodySpec {
            shape: Shape::Shell {
                r_outer: 73e-9,
                r_inner: 63e-9,
            },
            ..shell.clone()
        };
        assert_eq!(thin.optics_warnings(2862.0).len(), 1);
        let bad = BodySpec {
            shape: Shape::Shell {
                r_outer: 23e-9,
                r_inner: 73e-9,
            },
            ..shell
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn vacuum_sphere_feels_only_gravity() {
        let scn = Scenario {
            sphere: BodySpec {
                shape: Shape::Solid { r: 50e-9 },
                density: 2000.0,
                specific_heat: 800.0,
                material: Material::vacuum(),
            },
            orientation: Orientation::AbovePlate,
            plate: Material::new(OpticalModel::silicon_carbide()),
            t_plate: 300.0,
            t_env: 300.0,
            t_sphere: 500.0,
            method: Method::Dipole,
            policy: LmaxPolicy::Fixed(1),
            spec: QuadratureSpec::with_tol(1e-4),
            include_gravity: true,
            environment_cooling: false,
        };
        let prof = force_profile(&scn, &[0.3e-6, 1e-6]);
        for p in prof {
            assert!((p.total - scn.gravity()).abs() < 1e-12 * p.gravity);
            assert!(p.gravity > 0.0);
        }
        let pts = find_levitation_points(|d| scn.force(d, 500.0), 0.2e-6, 2e-6, 5, 1e-6).unwrap();
        assert!(pts.is_empty());
    }
}
