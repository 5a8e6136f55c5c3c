//! Dispatch of scenario commands to the library and the result document.

use crate::config::{BodyConfig, Command, OrientationFlag, RegimeFlag, ScenarioConfig, ShapeConfig, SweepVariable};
use neqcasimir::constants::{stefan_boltzmann, G_ACCEL};
use neqcasimir::dynamics::{
    bounces, find_levitation_points, integrate_trajectory, oscillation_period, BodySpec, FieldOptions, ForceBalanceState, ForceField, Orientation,
    Outcome, Scenario, Shape, TrajectoryOptions,
};
use neqcasimir::error::Error;
use neqcasimir::forces::total_force;
use neqcasimir::materials::Material;
use neqcasimir::radiation::{cylinder_emission, net_exchange, plate_emission, slab_emission, sphere_emission, sphere_emission_approx, DipoleLevel};
use neqcasimir::scattering::CylinderTMatrix;
use neqcasimir::transfer::{
    sphere_plate_propagating_limit, sphere_plate_transfer_1refl, sphere_plate_transfer_asymptotic, sphere_plate_transfer_dipole,
    sphere_sphere_transfer_1refl, sphere_sphere_transfer_dipole, sphere_sphere_transfer_exact, Geometry, Method, PlateRegime, TwoBodyConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::f64::consts::PI;
use std::path::Path;

/// Why a run failed; selects the exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

/// Result document. `rows` is the plot-ready table under `columns`; failed
/// sweep points are null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub command: String,
    pub version: String,
    pub method: String,
    /// "ok", or "partial" when some sweep points failed
    pub status: String,
    pub validity_warnings: Vec<String>,
    pub errors: Vec<String>,
    pub summary: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Output {
    fn new(command: &str, method: &str) -> Self {
        Output {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            method: method.into(),
            status: "ok".into(),
            validity_warnings: Vec::new(),
            errors: Vec::new(),
            summary: Map::new(),
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn warn(&mut self, ws: impl IntoIterator<Item = String>) {
        for w in ws {
            if !self.validity_warnings.contains(&w) {
                self.validity_warnings.push(w);
            }
        }
    }

    fn fail_point(&mut self, label: String, e: Error) -> Result<(), Failure> {
        if e.is_validation() {
            return Err(Failure::Validation(format!("{label}: {e}")));
        }
        self.status = "partial".into();
        self.errors.push(format!("{label}: {e}"));
        Ok(())
    }

    /// CSV with a header row; 15 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.map(|x| format!("{x:.14e}")).unwrap_or_default()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Dipole => "dipole",
        Method::OneReflection => "one_reflection",
        Method::Exact => "exact",
    }
}

fn sweep_values(cfg: &ScenarioConfig, allowed: &[SweepVariable]) -> Result<Option<(SweepVariable, Vec<f64>)>, Failure> {
    let Some(s) = cfg.sweep else { return Ok(None) };
    if !allowed.contains(&s.variable) {
        return Err(invalid(format!("sweep variable {:?} is not supported by this command", s.variable)));
    }
    Ok(Some((s.variable, s.values().map_err(invalid)?)))
}

pub fn run(cfg: &ScenarioConfig, base: &Path) -> Result<Output, Failure> {
    match cfg.command {
        Command::Radiate => radiate(cfg, base),
        Command::Transfer => transfer(cfg, base),
        Command::Force => force(cfg, base),
        Command::Levitate | Command::Trajectory => dynamics(cfg, base),
    }
}

// ---------------------------------------------------------------- radiate

fn radiate(cfg: &ScenarioConfig, base: &Path) -> Result<Output, Failure> {
    let [body] = cfg.bodies.as_slice() else {
        return Err(invalid("radiate needs exactly one body"));
    };
    let spec = cfg.quadrature.spec();
    let mat = body.material(base).map_err(invalid)?;
    let t_env = cfg.temperatures.t_env;
    let sweep = sweep_values(cfg, &[SweepVariable::R, SweepVariable::T1])?;
    let points: Vec<(f64, Option<f64>)> = match (&sweep, body.radius()) {
        (Some((SweepVariable::R, v)), _) => v.iter().map(|&r| (cfg.temperatures.t1, Some(r))).collect(),
        (Some((_, v)), r) => v.iter().map(|&t| (t, r)).collect(),
        (None, r) => vec![(cfg.temperatures.t1, r)],
    };
    if matches!(sweep, Some((SweepVariable::R, _))) && !matches!(body.shape, ShapeConfig::Sphere { .. }) {
        return Err(invalid("sweeps over R need a solid sphere"));
    }
    let method = cfg.method.method();
    let mut out = Output::new("radiate", method_name(method));
    match &body.shape {
        ShapeConfig::Sphere { .. } | ShapeConfig::Shell { .. } => {
            if let ShapeConfig::Shell { .. } = body.shape {
                out.warn(["shell emission computed with solid-sphere optics at the outer radius".to_string()]);
            }
            out.columns = ["R_m", "T_K", "H_W", "H_over_blackbody", "net_W"].map(String::from).to_vec();
            for (t, r) in points {
                let r = r.unwrap();
                let em = |tt: f64| match method {
                    Method::Dipole => sphere_emission_approx(DipoleLevel::DipoleFull, &mat, r, tt, &spec),
                    _ => sphere_emission(&mat, r, tt, &spec),
                };
                match em(t).and_then(|h| Ok((net_exchange(|tt| em(tt).map(|e| e.total), t, t_env)?, h))) {
                    Ok((net, h)) => {
                        out.warn(h.warnings.clone());
                        let bb = 4.0 * PI * r * r * stefan_boltzmann() * t.powi(4);
                        out.rows.push(vec![Some(r), Some(t), Some(h.total), Some(h.total / bb), Some(net)]);
                    }
                    Err(e) => {
                        out.fail_point(format!("R = {r:e} m, T = {t} K"), e)?;
                        out.rows.push(vec![Some(r), Some(t), None, None, None]);
                    }
                }
            }
        }
        ShapeConfig::Plate => {
            out.columns = ["T_K", "H_W_per_m2", "emissivity"].map(String::from).to_vec();
            for (t, _) in points {
                match plate_emission(&mat, t, &spec) {
                    Ok(h) => {
                        out.warn(h.warnings.clone());
                        out.rows
                            .push(vec![Some(t), Some(h.total), Some(h.total / (stefan_boltzmann() * t.powi(4)))]);
                    }
                    Err(e) => {
                        out.fail_point(format!("T = {t} K"), e)?;
                        out.rows.push(vec![Some(t), None, None]);
                    }
                }
            }
        }
        ShapeConfig::Slab { thickness } => {
            out.columns = ["T_K", "H_right_W_per_m2", "H_left_W_per_m2"].map(String::from).to_vec();
            for (t, _) in points {
                match slab_emission(&mat, *thickness, t, &spec) {
                    Ok((a, b)) => out.rows.push(vec![Some(t), Some(a.total), Some(b.total)]),
                    Err(e) => {
                        out.fail_point(format!("T = {t} K"), e)?;
                        out.rows.push(vec![Some(t), None, None]);
                    }
                }
            }
        }
        ShapeConfig::Cylinder { tmatrix_path } => {
            let text = crate::config::read_relative(base, tmatrix_path).map_err(invalid)?;
            let cyl = CylinderTMatrix::from_json(&text)?;
            out.columns = ["T_K", "H_W_per_m"].map(String::from).to_vec();
            for (t, _) in points {
                match cylinder_emission(&cyl, t, &spec) {
                    Ok(h) => {
                        out.warn(h.warnings.clone());
                        out.rows.push(vec![Some(t), Some(h.total)]);
                    }
                    Err(e) => {
                        out.fail_point(format!("T = {t} K"), e)?;
                        out.rows.push(vec![Some(t), None]);
                    }
                }
            }
        }
    }
    if out.rows.len() == 1 {
        for (c, v) in out.columns.clone().iter().zip(out.rows[0].clone()) {
            out.summary.insert(c.clone(), json!(v));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- two bodies

fn two_body(cfg: &ScenarioConfig, base: &Path) -> Result<TwoBodyConfig, Failure> {
    let [b1, b2] = cfg.bodies.as_slice() else {
        return Err(invalid("this command needs exactly two bodies"));
    };
    let d = cfg.geometry.ok_or_else(|| invalid("geometry.separation is required"))?.separation;
    let r2 = b2.radius().ok_or_else(|| invalid("body 2 must be a sphere or shell"))?;
    let geometry = if b1.is_plate() {
        Geometry::SpherePlate { r: r2, d }
    } else {
        let r1 = b1.radius().ok_or_else(|| invalid("body 1 must be a plate, sphere or shell"))?;
        Geometry::SphereSphere { r1, r2, d }
    };
    let t = cfg.temperatures;
    let c = TwoBodyConfig {
        geometry,
        body1: b1.material(base).map_err(invalid)?,
        body2: b2.material(base).map_err(invalid)?,
        t1: t.t1,
        t2: t.t2,
        t_env: t.t_env,
    };
    c.validate()?;
    Ok(c)
}

fn with_separation(c: &TwoBodyConfig, d: f64) -> TwoBodyConfig {
    let geometry = match c.geometry {
        Geometry::SpherePlate { r, .. } => Geometry::SpherePlate { r, d },
        Geometry::SphereSphere { r1, r2, .. } => Geometry::SphereSphere { r1, r2, d },
    };
    TwoBodyConfig { geometry, ..c.clone() }
}

fn separation(c: &TwoBodyConfig) -> f64 {
    match c.geometry {
        Geometry::SpherePlate { d, .. } | Geometry::SphereSphere { d, .. } => d,
    }
}

fn swept(c: &TwoBodyConfig, var: SweepVariable, v: f64) -> TwoBodyConfig {
    match var {
        SweepVariable::D => with_separation(c, v),
        SweepVariable::T1 => c.with_temperatures(v, c.t2, c.t_env),
        SweepVariable::T2 => c.with_temperatures(c.t1, v, c.t_env),
        SweepVariable::TEnv => c.with_temperatures(c.t1, c.t2, v),
        SweepVariable::R => c.clone(),
    }
}

fn transfer(cfg: &ScenarioConfig, base: &Path) -> Result<Output, Failure> {
    let c0 = two_body(cfg, base)?;
    let spec = cfg.quadrature.spec();
    let policy = cfg.policy();
    let method = cfg.method.method();
    let plate = matches!(c0.geometry, Geometry::SpherePlate { .. });
    if cfg.regime.is_some() && !plate {
        return Err(invalid("regime selectors apply to sphere–plate transfer only"));
    }
    if plate && method == Method::Exact {
        return Err(invalid("exact transfer is available for two spheres only"));
    }
    let label = match cfg.regime {
        Some(RegimeFlag::Far) => "asymptotic_far",
        Some(RegimeFlag::Near) => "asymptotic_near",
        Some(RegimeFlag::Propagating) => "propagating_limit",
        None => method_name(method),
    };
    let mut out = Output::new("transfer", label);
    out.columns = ["d_m", "T1_K", "T2_K", "H_W", "H_propagating_W", "H_evanescent_W"]
        .map(String::from)
        .to_vec();
    let points: Vec<TwoBodyConfig> = match sweep_values(cfg, &[SweepVariable::D, SweepVariable::T1, SweepVariable::T2])? {
        Some((var, v)) => v.iter().map(|&x| swept(&c0, var, x)).collect(),
        None => vec![c0.clone()],
    };
    for c in &points {
        let r = match (cfg.regime, plate, method) {
            (Some(RegimeFlag::Far), ..) => sphere_plate_transfer_asymptotic(PlateRegime::Far, c, &spec).map(|(h, w)| (h, None, None, w)),
            (Some(RegimeFlag::Near), ..) => sphere_plate_transfer_asymptotic(PlateRegime::Near, c, &spec).map(|(h, w)| (h, None, None, w)),
            (Some(RegimeFlag::Propagating), ..) => sphere_plate_propagating_limit(c, &spec).map(|h| (h, None, None, Vec::new())),
            (None, true, Method::Dipole) => {
                sphere_plate_transfer_dipole(c, &spec).map(|t| (t.h_1to2, Some(t.propagating), Some(t.evanescent), t.warnings))
            }
            (None, true, _) => sphere_plate_transfer_1refl(c, policy, &spec).map(|t| (t.h_1to2, Some(t.propagating), Some(t.evanescent), t.warnings)),
            (None, false, Method::Dipole) => sphere_sphere_transfer_dipole(c, &spec).map(|t| (t.h_1to2, None, None, t.warnings)),
            (None, false, Method::OneReflection) => sphere_sphere_transfer_1refl(c, policy, &spec).map(|t| (t.h_1to2, None, None, t.warnings)),
            (None, false, Method::Exact) => sphere_sphere_transfer_exact(c, policy, &spec).map(|t| (t.h_1to2, None, None, t.warnings)),
        };
        let d = separation(c);
        match r {
            Ok((h, pr, ev, w)) => {
                out.warn(w);
                out.rows.push(vec![Some(d), Some(c.t1), Some(c.t2), Some(h), pr, ev]);
            }
            Err(e) => {
                out.fail_point(format!("d = {d:e} m, T1 = {} K, T2 = {} K", c.t1, c.t2), e)?;
                out.rows.push(vec![Some(d), Some(c.t1), Some(c.t2), None, None, None]);
            }
        }
    }
    if out.rows.len() == 1 {
        out.summary.insert("H_1to2".into(), json!(out.rows[0][3]));
        out.summary.insert("units".into(), json!("W"));
    }
    Ok(out)
}

/// Gravity on body 2 towards the plate, when an orientation is configured.
fn gravity(cfg: &ScenarioConfig, c: &TwoBodyConfig) -> Result<Option<f64>, Failure> {
    let Some(o) = cfg.orientation else { return Ok(None) };
    if !matches!(c.geometry, Geometry::SpherePlate { .. }) {
        return Err(invalid("orientation applies to sphere–plate configurations"));
    }
    let spec = body_spec(&cfg.bodies[1], c.body2.clone())?;
    let w = spec.mass() * G_ACCEL;
    Ok(Some(if o == OrientationFlag::Above { w } else { -w }))
}

fn force(cfg: &ScenarioConfig, base: &Path) -> Result<Output, Failure> {
    let c0 = two_body(cfg, base)?;
    let spec = cfg.quadrature.spec();
    let method = cfg.method.method();
    let g = gravity(cfg, &c0)?;
    let mut out = Output::new("force", method_name(method));
    out.columns = ["d_m", "F_eq_N", "F_from_1_N", "F_from_2_N", "F_total_N"].map(String::from).to_vec();
    if g.is_some() {
        out.columns.extend(["F_gravity_N", "F_over_FG"].map(String::from));
    }
    let points: Vec<TwoBodyConfig> = match sweep_values(cfg, &[SweepVariable::D, SweepVariable::T1, SweepVariable::T2, SweepVariable::TEnv])? {
        Some((var, v)) => v.iter().map(|&x| swept(&c0, var, x)).collect(),
        None => vec![c0.clone()],
    };
    for c in &points {
        let d = separation(c);
        match total_force(c, method, cfg.policy(), &spec) {
            Ok(b) => {
                out.warn(b.warnings);
                let mut row = vec![
                    Some(d),
                    Some(b.equilibrium),
                    Some(b.interaction_from_other),
                    Some(b.self_force),
                    Some(b.total),
                ];
                if let Some(g) = g {
                    row.extend([Some(g), Some((b.total + g) / g.abs())]);
                }
                out.rows.push(row);
            }
            Err(e) => {
                out.fail_point(format!("d = {d:e} m"), e)?;
                let mut row = vec![Some(d), None, None, None, None];
                if g.is_some() {
                    row.extend([g, None]);
                }
                out.rows.push(row);
            }
        }
    }
    if out.rows.len() == 1 {
        let r = &out.rows[0];
        for (k, i) in [("F_eq", 1), ("F_from_1", 2), ("F_from_2", 3), ("F_total", 4)] {
            out.summary.insert(k.into(), json!(r[i]));
        }
        if g.is_some() {
            out.summary.insert("F_gravity".into(), json!(r[5]));
            out.summary.insert("F_over_FG".into(), json!(r[6]));
        }
        out.summary.insert("units".into(), json!("N"));
    }
    Ok(out)
}

// ---------------------------------------------------------------- dynamics

fn body_spec(b: &BodyConfig, material: Material) -> Result<BodySpec, Failure> {
    let shape = match b.shape {
        ShapeConfig::Sphere { radius } => Shape::Solid { r: radius },
        ShapeConfig::Shell { r_outer, r_inner } => Shape::Shell { r_outer, r_inner },
        _ => return Err(invalid("body 2 must be a sphere or shell")),
    };
    let density = b.density.ok_or_else(|| invalid("body 2 needs a mass density"))?;
    let s = BodySpec {
        shape,
        density,
        specific_heat: b.specific_heat.unwrap_or(800.0),
        material,
    };
    s.validate()?;
    Ok(s)
}

fn dynamics(cfg: &ScenarioConfig, base: &Path) -> Result<Output, Failure> {
    let c0 = two_body(cfg, base)?;
    if !matches!(c0.geometry, Geometry::SpherePlate { .. }) {
        return Err(invalid("levitate and trajectory need a plate (body 1) and a sphere (body 2)"));
    }
    let dy = cfg.dynamics.ok_or_else(|| invalid("a dynamics block is required"))?;
    let orientation = match cfg.orientation.ok_or_else(|| invalid("orientation is required"))? {
        OrientationFlag::Above => Orientation::AbovePlate,
        OrientationFlag::Below => Orientation::BelowPlate,
    };
    let method = cfg.method.method();
    if method == Method::Exact {
        return Err(invalid("forces are available at dipole and one-reflection order"));
    }
    let scn = Scenario {
        sphere: body_spec(&cfg.bodies[1], c0.body2.clone())?,
        orientation,
        plate: c0.body1.clone(),
        t_plate: c0.t1,
        t_env: c0.t_env,
        t_sphere: c0.t2,
        method,
        policy: cfg.policy(),
        spec: cfg.quadrature.spec(),
        include_gravity: true,
        environment_cooling: dy.environment_cooling,
    };
    scn.validate()?;
    let [lo, hi] = dy.d_range;
    if !(lo > scn.sphere.radius() && hi > lo) {
        return Err(invalid(format!(
            "dynamics.d_range must satisfy R < lo < hi (R = {:e} m)",
            scn.sphere.radius()
        )));
    }
    let fg = scn.sphere.mass() * G_ACCEL;
    let cooling = cfg.command == Command::Trajectory && dy.with_cooling;
    let field = ForceField::for_scenario(&scn, (lo, hi), scn.t_sphere, cooling, FieldOptions::default())?;
    let mut out = Output::new(
        if cfg.command == Command::Levitate { "levitate" } else { "trajectory" },
        method_name(method),
    );
    out.warn(field.warnings.clone());
    out.summary.insert("field_nodes".into(), json!(field.nodes()));
    out.summary.insert("F_G".into(), json!(fg));
    if cfg.command == Command::Levitate {
        let n = dy.scan_points.unwrap_or(400);
        let pts = find_levitation_points(|d| Ok(field.eval(d, scn.t_sphere)[0]), lo, hi, n, 1e-6)?;
        out.summary
            .insert("levitation_points".into(), serde_json::to_value(&pts).expect("serializable"));
        out.columns = ["d_m", "F_total_N", "F_over_FG"].map(String::from).to_vec();
        for i in 0..200 {
            let d = lo * (hi / lo).powf(i as f64 / 199.0);
            let f = field.eval(d, scn.t_sphere)[0];
            out.rows.push(vec![Some(d), Some(f), Some(f / fg)]);
        }
        return Ok(out);
    }
    let d0 = dy.d0.ok_or_else(|| invalid("dynamics.d0 is required for trajectories"))?;
    let t_end = dy.t_end.ok_or_else(|| invalid("dynamics.t_end is required for trajectories"))?;
    let opts = TrajectoryOptions {
        t_end,
        with_cooling: cooling,
        d_contact: lo,
        d_escape: hi,
        rtol: 1e-9,
        atol_d: 1e-6 * lo,
        sample_dt: dy.sample_dt,
    };
    let s0 = ForceBalanceState {
        t: 0.0,
        d: d0,
        v: dy.v0,
        t_s: scn.t_sphere,
    };
    let tr = integrate_trajectory(&field, scn.sphere.mass(), s0, &opts)?;
    let (outcome, end) = match tr.outcome {
        Outcome::Completed => ("completed", t_end),
        Outcome::Contact { time } => ("contact", time),
        Outcome::Escape { time } => ("escape", time),
    };
    out.summary.insert("outcome".into(), json!(outcome));
    out.summary.insert("end_time".into(), json!(end));
    out.summary.insert("bounces".into(), json!(bounces(&tr)));
    out.summary.insert("period".into(), json!(oscillation_period(&tr)));
    out.columns = ["t_s", "d_m", "v_mps", "Ts_K"].map(String::from).to_vec();
    out.rows = tr.samples.iter().map(|s| vec![Some(s.t), Some(s.d), Some(s.v), Some(s.t_s)]).collect();
    Ok(out)
}
