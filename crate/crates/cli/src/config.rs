//! Scenario configuration: the JSON schema read by the CLI and its conversion
//! into library types. Units are fixed: m, K, rad/s, kg/m³, J/(kg K), s.

use neqcasimir::materials::{ingest_tabulated, Material, OpticalModel};
use neqcasimir::quadrature::{LmaxPolicy, QuadratureSpec};
use neqcasimir::transfer::Method;
use num_complex::Complex64;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Radiate,
    Transfer,
    Force,
    Levitate,
    Trajectory,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub command: Command,
    pub bodies: Vec<BodyConfig>,
    #[serde(default)]
    pub temperatures: Temperatures,
    pub geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub method: MethodFlag,
    /// closed-form sphere–plate transfer regimes instead of the full kernel
    pub regime: Option<RegimeFlag>,
    /// fixed multipole order; automatic selection when absent
    pub l_max: Option<usize>,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
    pub sweep: Option<SweepConfig>,
    /// sphere above or below the plate; adds gravity to sphere–plate forces
    pub orientation: Option<OrientationFlag>,
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub shape: ShapeConfig,
    pub material: MaterialConfig,
    /// relative permeability [re, im], default 1
    pub mu: Option<[f64; 2]>,
    pub density: Option<f64>,
    pub specific_heat: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Sphere {
        radius: f64,
    },
    Shell {
        r_outer: f64,
        r_inner: f64,
    },
    Plate,
    Slab {
        thickness: f64,
    },
    /// external cylinder T-matrix file
    Cylinder {
        tmatrix_path: String,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialConfig {
    Gold,
    Aluminum,
    SiliconCarbide,
    OscillatorPlate,
    OscillatorSphere,
    Vacuum,
    PerfectMirror,
    Drude {
        omega_p: f64,
        omega_tau: f64,
    },
    Sic {
        eps_inf: f64,
        omega_lo: f64,
        omega_to: f64,
        gamma: f64,
    },
    TwoOscillator {
        c: f64,
        omega_a: f64,
        gamma_a: f64,
        d: f64,
        omega_b: f64,
        gamma_b: f64,
    },
    Constant {
        eps: [f64; 2],
    },
    LowFrequency {
        eps0: f64,
        lambda_in: f64,
    },
    /// CSV rows omega,re_eps,im_eps
    Tabulated {
        path: String,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Temperatures {
    #[serde(rename = "T1", default)]
    pub t1: f64,
    #[serde(rename = "T2", default)]
    pub t2: f64,
    #[serde(rename = "T_env", default)]
    pub t_env: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// center-to-center (two spheres) or center-to-plate distance
    pub separation: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodFlag {
    Dipole,
    #[default]
    OneReflection,
    Exact,
}

impl MethodFlag {
    pub fn method(self) -> Method {
        match self {
            MethodFlag::Dipole => Method::Dipole,
            MethodFlag::OneReflection => Method::OneReflection,
            MethodFlag::Exact => Method::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeFlag {
    Far,
    Near,
    Propagating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationFlag {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    pub rel_tol: Option<f64>,
    pub u_cutoff: Option<f64>,
    pub max_panels: Option<usize>,
    pub x_hi: Option<f64>,
}

impl QuadratureOverrides {
    pub fn spec(&self) -> QuadratureSpec {
        let mut s = QuadratureSpec::with_tol(self.rel_tol.unwrap_or(1e-4));
        if let Some(u) = self.u_cutoff {
            s.u_cutoff = u;
        }
        if let Some(n) = self.max_panels {
            s.max_panels = n;
        }
        if let Some(x) = self.x_hi {
            s.x_hi = x;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "d")]
    D,
    #[serde(rename = "R")]
    R,
    T1,
    T2,
    #[serde(rename = "T_env")]
    TEnv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Lin,
    Log,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl SweepConfig {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        if self.points == 0 {
            return Err("sweep.points must be at least 1".into());
        }
        if self.scale == Scale::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err("log sweeps need positive start and stop".into());
        }
        let n = self.points;
        Ok((0..n)
            .map(|i| {
                let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                match self.scale {
                    Scale::Lin => self.start + (self.stop - self.start) * f,
                    Scale::Log => self.start * (self.stop / self.start).powf(f),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// distance window [lo, hi] of the cached force field (m)
    pub d_range: [f64; 2],
    pub d0: Option<f64>,
    #[serde(default)]
    pub v0: f64,
    pub t_end: Option<f64>,
    #[serde(default)]
    pub with_cooling: bool,
    #[serde(default)]
    pub environment_cooling: bool,
    /// sample spacing in the trajectory output (s); 0 keeps every step
    #[serde(default)]
    pub sample_dt: f64,
    /// scan points for levitation search
    pub scan_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    pub path: Option<String>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn policy(&self) -> LmaxPolicy {
        match self.l_max {
            Some(l) => LmaxPolicy::Fixed(l),
            None => LmaxPolicy::default(),
        }
    }
}

/// Reads a path relative to the config file's directory.
pub fn read_relative(base: &Path, p: &str) -> Result<String, String> {
    let path = base.join(p);
    std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

impl BodyConfig {
    pub fn material(&self, base: &Path) -> Result<Material, String> {
        let eps = match &self.material {
            MaterialConfig::Gold => OpticalModel::gold(),
            MaterialConfig::Aluminum => OpticalModel::aluminum(),
            MaterialConfig::SiliconCarbide => OpticalModel::silicon_carbide(),
            MaterialConfig::OscillatorPlate => OpticalModel::oscillator_plate(),
            MaterialConfig::OscillatorSphere => OpticalModel::oscillator_sphere(),
            MaterialConfig::Vacuum => OpticalModel::vacuum(),
            MaterialConfig::PerfectMirror => OpticalModel::PerfectMirror,
            MaterialConfig::Drude { omega_p, omega_tau } => OpticalModel::Drude {
                omega_p: *omega_p,
                omega_tau: *omega_tau,
            },
            MaterialConfig::Sic {
                eps_inf,
                omega_lo,
                omega_to,
                gamma,
            } => OpticalModel::SiC {
                eps_inf: *eps_inf,
                omega_lo: *omega_lo,
                omega_to: *omega_to,
                gamma: *gamma,
            },
            MaterialConfig::TwoOscillator {
                c,
                omega_a,
                gamma_a,
                d,
                omega_b,
                gamma_b,
            } => OpticalModel::TwoOscillator {
                c: *c,
                omega_a: *omega_a,
                gamma_a: *gamma_a,
                d: *d,
                omega_b: *omega_b,
                gamma_b: *gamma_b,
            },
            MaterialConfig::Constant { eps } => OpticalModel::Constant(Complex64::new(eps[0], eps[1])),
            MaterialConfig::LowFrequency { eps0, lambda_in } => OpticalModel::LowFrequency {
                eps0: *eps0,
                lambda_in: *lambda_in,
            },
            MaterialConfig::Tabulated { path } => ingest_tabulated(&read_relative(base, path)?).map_err(|e| format!("{path}: {e}"))?,
        };
        Ok(match self.mu {
            Some([re, im]) => Material::with_mu(eps, Complex64::new(re, im)),
            None => Material::new(eps),
        })
    }

    /// Radius of spheres and shells.
    pub fn radius(&self) -> Option<f64> {
        match self.shape {
            ShapeConfig::Sphere { radius } => Some(radius),
            ShapeConfig::Shell { r_outer, .. } => Some(r_outer),
            _ => None,
        }
    }

    pub fn is_plate(&self) -> bool {
        matches!(self.shape, ShapeConfig::Plate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"command":"radiate","bodies":[],"colour":"red"}"#;
        assert!(ScenarioConfig::parse(bad).unwrap_err().contains("colour"));
        let bad = r#"{"command":"radiate","bodies":[{"shape":{"kind":"sphere","radius":1e-7,"x":1},"material":{"model":"gold"}}]}"#;
        assert!(ScenarioConfig::parse(bad).is_err());
    }

    #[test]
    fn sweep_grids() {
        let s = SweepConfig {
            variable: SweepVariable::R,
            start: 1e-8,
            stop: 1e-6,
            points: 3,
            scale: Scale::Log,
        };
        let v = s.values().unwrap();
        assert!((v[1] / 1e-7 - 1.0).abs() < 1e-12);
        let s = SweepConfig { scale: Scale::Lin, ..s };
        assert!((s.values().unwrap()[1] - 5.05e-7).abs() < 1e-18);
    }
}
