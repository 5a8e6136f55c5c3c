//! Dielectric response models, thermal weights and low-frequency insulator
//! expansions.

use crate::constants::{ev_to_rad_per_s, thermal_wavelength, C, HBAR, K_B};
use crate::error::{Error, Result};
use crate::quadrature::Feature;
use num_complex::Complex64;

/// Finite permittivity used where a perfect mirror must be evaluated numerically.
/// A large negative real value is the lossless metallic limit.
pub const MIRROR_STAND_IN: f64 = -1e8;

/// Frequency-dependent permittivity model. Frequencies are in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub enum OpticalModel {
    /// ε = 1 - ω_p² / (ω (ω + i ω_τ))
    Drude {
        omega_p: f64,
        omega_tau: f64,
    },
    /// ε = ε_∞ (ω² - ω_LO² + iωγ) / (ω² - ω_TO² + iωγ)
    SiC {
        eps_inf: f64,
        omega_lo: f64,
        omega_to: f64,
        gamma: f64,
    },
    /// ε = 1 + C ω_a² / (ω_a² - ω² - iγω) + D Ω² / (Ω² - ω² - iΓω)
    TwoOscillator {
        c: f64,
        omega_a: f64,
        gamma_a: f64,
        d: f64,
        omega_b: f64,
        gamma_b: f64,
    },
    Tabulated(Tabulated),
    Constant(Complex64),
    /// ε = ε_0 + i λ_in ω / c. Only meaningful below the lowest resonance; it has
    /// no finite high-frequency limit and exists to test low-temperature formulas.
    LowFrequency {
        eps0: f64,
        lambda_in: f64,
    },
    PerfectMirror,
}

/// Tabulated permittivity, linear interpolation in ln ω.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    omega: Vec<f64>,
    eps: Vec<Complex64>,
}

impl Tabulated {
    pub fn new(samples: Vec<(f64, Complex64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Ingestion {
                row: samples.len(),
                msg: "at least two samples required".into(),
            });
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Ingestion {
                    row: i + 2,
                    msg: "frequencies must be strictly increasing".into(),
                });
            }
        }
        for (i, (w, e)) in samples.iter().enumerate() {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::Ingestion {
                    row: i + 1,
                    msg: format!("frequency {w} must be positive"),
                });
            }
            if e.im < 0.0 {
                return Err(Error::Ingestion {
                    row: i + 1,
                    msg: format!("Im eps = {} < 0 violates passivity", e.im),
                });
            }
        }
        let (omega, eps) = samples.into_iter().unzip();
        Ok(Tabulated { omega, eps })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.omega[0], *self.omega.last().unwrap())
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.omega.iter().copied().zip(self.eps.iter().copied())
    }

    fn eval(&self, omega: f64) -> Result<Complex64> {
        let (lo, hi) = self.range();
        if !(omega >= lo && omega <= hi) {
            return Err(Error::Range { omega, lo, hi });
        }
        let k = match self.omega.binary_search_by(|w| w.partial_cmp(&omega).unwrap()) {
            Ok(k) => return Ok(self.eps[k]),
            Err(k) => k,
        };
        let (w0, w1) = (self.omega[k - 1], self.omega[k]);
        let t = (omega / w0).ln() / (w1 / w0).ln();
        Ok(self.eps[k - 1] * (1.0 - t) + self.eps[k] * t)
    }
}

impl OpticalModel {
    /// Gold, Drude with ω_p = 9.03 eV, ω_τ = 2.67e-2 eV.
    pub fn gold() -> Self {
        OpticalModel::Drude {
            omega_p: ev_to_rad_per_s(9.03),
            omega_tau: ev_to_rad_per_s(2.67e-2),
        }
    }

    /// Aluminum, Drude with ω_p = 12.04 eV, ω_τ = 12.87e-2 eV.
    pub fn aluminum() -> Self {
        OpticalModel::Drude {
            omega_p: ev_to_rad_per_s(12.04),
            omega_tau: ev_to_rad_per_s(12.87e-2),
        }
    }

    /// Silicon carbide phonon-polariton model.
    pub fn silicon_carbide() -> Self {
        OpticalModel::SiC {
            eps_inf: 6.7,
            omega_lo: ev_to_rad_per_s(0.12),
            omega_to: ev_to_rad_per_s(0.098),
            gamma: ev_to_rad_per_s(5.88e-4),
        }
    }

    /// Two-oscillator plate of the bouncing-sphere scenario.
    pub fn oscillator_plate() -> Self {
        OpticalModel::TwoOscillator {
            c: 3.0,
            omega_a: 1e13,
            gamma_a: 1e11,
            d: 1.0,
            omega_b: 1e16,
            gamma_b: 5e14,
        }
    }

    /// Two-oscillator sphere of the bouncing-sphere scenario (infrared resonance detuned by 1.19).
    pub fn oscillator_sphere() -> Self {
        OpticalModel::TwoOscillator {
            c: 1.5,
            omega_a: 1.19e13,
            gamma_a: 1e11,
            d: 0.5,
            omega_b: 1e16,
            gamma_b: 5e14,
        }
    }

    pub fn vacuum() -> Self {
        OpticalModel::Constant(Complex64::new(1.0, 0.0))
    }

    /// Analytic continuation ε(w) for complex w (upper half plane). Tabulated
    /// data has no continuation.
    pub fn epsilon_complex(&self, w: Complex64) -> Result<Complex64> {
        let i = Complex64::i();
        Ok(match self {
            OpticalModel::Drude { omega_p, omega_tau } => 1.0 - omega_p * omega_p / (w * (w + i * omega_tau)),
            OpticalModel::SiC {
                eps_inf,
                omega_lo,
                omega_to,
                gamma,
            } => eps_inf * (w * w - omega_lo * omega_lo + i * w * gamma) / (w * w - omega_to * omega_to + i * w * gamma),
            OpticalModel::TwoOscillator {
                c,
                omega_a,
                gamma_a,
                d,
                omega_b,
                gamma_b,
            } => {
                1.0 + c * omega_a * omega_a / (omega_a * omega_a - w * w - i * gamma_a * w)
                    + d * omega_b * omega_b / (omega_b * omega_b - w * w - i * gamma_b * w)
            }
            OpticalModel::LowFrequency { eps0, lambda_in } => eps0 + i * lambda_in * w / C,
            OpticalModel::Constant(e) => *e,
            OpticalModel::Tabulated(_) => return Err(Error::UnsupportedExpansion("tabulated data cannot be continued off the real axis".into())),
            OpticalModel::PerfectMirror => return Err(Error::LimitMaterial),
        })
    }

    /// ε(ω) for real ω > 0.
    pub fn epsilon(&self, omega: f64) -> Result<Complex64> {
        match self {
            OpticalModel::Tabulated(t) => t.eval(omega),
            _ => self.epsilon_complex(Complex64::new(omega, 0.0)),
        }
    }

    /// ε(ω), with the perfect mirror replaced by its finite stand-in.
    pub fn epsilon_or_stand_in(&self, omega: f64) -> Result<Complex64> {
        match self {
            OpticalModel::PerfectMirror => Ok(Complex64::new(MIRROR_STAND_IN, 0.0)),
            _ => self.epsilon(omega),
        }
    }

    /// ε(iξ), real for causal models. The perfect mirror maps to +1e8.
    pub fn epsilon_imaginary_axis(&self, xi: f64) -> Result<f64> {
        match self {
            OpticalModel::PerfectMirror => Ok(-MIRROR_STAND_IN),
            OpticalModel::Constant(e) => Ok(e.re),
            _ => Ok(self.epsilon_complex(Complex64::new(0.0, xi))?.re),
        }
    }

    pub fn is_conductor(&self) -> bool {
        matches!(self, OpticalModel::Drude { .. } | OpticalModel::PerfectMirror)
    }

    /// Static permittivity ε(0) for insulators.
    pub fn static_epsilon(&self) -> Result<f64> {
        match self {
            OpticalModel::Drude { .. } | OpticalModel::PerfectMirror => Err(Error::UnsupportedExpansion("conductor: ε diverges as ω → 0".into())),
            OpticalModel::SiC {
                eps_inf, omega_lo, omega_to, ..
            } => Ok(eps_inf * omega_lo * omega_lo / (omega_to * omega_to)),
            OpticalModel::TwoOscillator { c, d, .. } => Ok(1.0 + c + d),
            OpticalModel::LowFrequency { eps0, .. } => Ok(*eps0),
            OpticalModel::Constant(e) => Ok(e.re),
            OpticalModel::Tabulated(t) => Ok(t.eps[0].re),
        }
    }

    /// Lowest characteristic (resonance) frequency, if the model has one.
    pub fn lowest_resonance(&self) -> Option<f64> {
        match self {
            OpticalModel::SiC { omega_to, .. } => Some(*omega_to),
            OpticalModel::TwoOscillator { omega_a, omega_b, .. } => Some(omega_a.min(*omega_b)),
            OpticalModel::Drude { omega_tau, .. } => Some(*omega_tau),
            _ => None,
        }
    }
}

/// Material of a body: permittivity model plus a (constant) permeability.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub eps: OpticalModel,
    pub mu: Complex64,
}

impl Material {
    pub fn new(eps: OpticalModel) -> Self {
        Material {
            eps,
            mu: Complex64::new(1.0, 0.0),
        }
    }

    pub fn with_mu(eps: OpticalModel, mu: Complex64) -> Self {
        Material { eps, mu }
    }

    pub fn vacuum() -> Self {
        Material::new(OpticalModel::vacuum())
    }

    pub fn is_mirror(&self) -> bool {
        matches!(self.eps, OpticalModel::PerfectMirror)
    }

    /// (ε, μ) at ω, mirror stand-in applied.
    pub fn response(&self, omega: f64) -> Result<(Complex64, Complex64)> {
        Ok((self.eps.epsilon_or_stand_in(omega)?, self.mu))
    }

    /// True when ε = μ = 1 exactly (no scatterer).
    pub fn is_vacuum(&self) -> bool {
        matches!(self.eps, OpticalModel::Constant(e) if e == Complex64::new(1.0, 0.0)) && self.mu == Complex64::new(1.0, 0.0)
    }
}

impl From<OpticalModel> for Material {
    fn from(m: OpticalModel) -> Self {
        Material::new(m)
    }
}

/// Bose-Einstein occupation 1/(e^{ħω/k_BT} - 1); zero at T = 0.
pub fn bose_occupation(t: f64, omega: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * t);
    if x > 700.0 {
        return 0.0;
    }
    1.0 / x.exp_m1()
}

/// Temperature with its derived thermal length scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalContext {
    pub t: f64,
}

impl ThermalContext {
    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::Config(format!("temperature {t} K must be non-negative")));
        }
        Ok(ThermalContext { t })
    }

    pub fn lambda_t(&self) -> f64 {
        thermal_wavelength(self.t)
    }

    pub fn occupation(&self, omega: f64) -> f64 {
        bose_occupation(self.t, omega)
    }
}

/// Low-frequency expansion ε = ε_0 + i λ_in ω/c and α = α_0 + i α_i0 λ_in ω/c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsulatorExpansion {
    pub eps0: f64,
    pub lambda_in: f64,
    pub alpha0: f64,
    pub alpha_i0: f64,
}

impl InsulatorExpansion {
    pub fn from_parts(eps0: f64, lambda_in: f64, r: f64) -> Self {
        InsulatorExpansion {
            eps0,
            lambda_in,
            alpha0: (eps0 - 1.0) / (eps0 + 2.0) * r.powi(3),
            alpha_i0: 3.0 * r.powi(3) / (eps0 + 2.0).powi(2),
        }
    }

    /// The linearized model this expansion describes.
    pub fn linearized_model(&self) -> OpticalModel {
        OpticalModel::LowFrequency {
            eps0: self.eps0,
            lambda_in: self.lambda_in,
        }
    }
}

/// Fit window for λ_in, as fractions of the lowest resonance frequency.
#[derive(Debug, Clone, Copy)]
pub struct FitWindow {
    pub lo_fraction: f64,
    pub hi_fraction: f64,
    pub points: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            lo_fraction: 1e-4,
            hi_fraction: 1e-3,
            points: 16,
        }
    }
}

/// Low-frequency insulator expansion for a sphere of radius `r`.
pub fn insulator_expansion(model: &OpticalModel, r: f64) -> Result<InsulatorExpansion> {
    insulator_expansion_with(model, r, FitWindow::default())
}

pub fn insulator_expansion_with(model: &OpticalModel, r: f64, window: FitWindow) -> Result<InsulatorExpansion> {
    if model.is_conductor() {
        return Err(Error::UnsupportedExpansion("conductor: ε diverges as ω → 0".into()));
    }
    let eps0 = model.static_epsilon()?;
    if !(eps0 > 1.0) || !eps0.is_finite() {
        return Err(Error::UnsupportedExpansion(format!("static permittivity {eps0} must exceed 1")));
    }
    let lambda_in = match model {
        OpticalModel::Constant(_) => 0.0,
        OpticalModel::LowFrequency { lambda_in, .. } => *lambda_in,
        _ => {
            let (lo, hi) = match (model, model.lowest_resonance()) {
                (OpticalModel::Tabulated(t), _) => {
                    let (a, b) = t.range();
                    (a, (10.0 * a).min(b))
                }
                (_, Some(w0)) => (w0 * window.lo_fraction, w0 * window.hi_fraction),
                _ => return Err(Error::UnsupportedExpansion("no fit window available".into())),
            };
            // least squares y = λ + s ω with y = Im ε c / ω; λ is the intercept
            let n = window.points.max(2);
            let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..n {
                let w = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
                let y = model.epsilon(w)?.im * C / w;
                sx += w;
                sy += y;
                sxx += w * w;
                sxy += w * y;
            }
            let nf = n as f64;
            let s = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
            (sy - s * sx) / nf
        }
    };
    Ok(InsulatorExpansion::from_parts(eps0, lambda_in, r))
}

/// Parse CSV rows `omega_rad_per_s,re_eps,im_eps` (optional header) into a
/// tabulated model. Errors carry the 1-based row number.
pub fn ingest_tabulated(text: &str) -> Result<OpticalModel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut samples: Vec<(f64, Complex64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Ingestion { row, msg: e.to_string() })?;
        if rec.len() != 3 {
            return Err(Error::Ingestion {
                row,
                msg: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let v = match parsed {
            Ok(v) => v,
            Err(_) if row == 1 => continue,
            Err(e) => return Err(Error::Ingestion { row, msg: e.to_string() }),
        };
        if !(v[0] > 0.0) {
            return Err(Error::Ingestion {
                row,
                msg: format!("frequency {} must be positive", v[0]),
            });
        }
        if v[2] < 0.0 {
            return Err(Error::Ingestion {
                row,
                msg: format!("Im eps = {} < 0 violates passivity", v[2]),
            });
        }
        if let Some(&(prev, _)) = samples.last() {
            if !(v[0] > prev) {
                return Err(Error::Ingestion {
                    row,
                    msg: "frequencies must be strictly increasing".into(),
                });
            }
        }
        samples.push((v[0], Complex64::new(v[1], v[2])));
    }
    Tabulated::new(samples).map(OpticalModel::Tabulated)
}

impl OpticalModel {
    /// Sharp spectral structure (centre, width) in rad/s: material poles and the
    /// surface-mode conditions Re ε = −1 (plates) and Re ε = −2 (spheres).
    pub fn spectral_features(&self) -> Vec<Feature> {
        let poles: Vec<(f64, f64)> = match self {
            OpticalModel::SiC {
                omega_lo, omega_to, gamma, ..
            } => vec![(*omega_to, *gamma), (*omega_lo, *gamma)],
            OpticalModel::TwoOscillator {
                omega_a,
                gamma_a,
                omega_b,
                gamma_b,
                ..
            } => {
                vec![(*omega_a, *gamma_a), (*omega_b, *gamma_b)]
            }
            _ => return Vec::new(),
        };
        let mut out: Vec<Feature> = poles.iter().map(|&(w, g)| Feature { omega: w, width: g }).collect();
        let (lo, hi) = poles.iter().fold((f64::MAX, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let n = 4000;
        let grid: Vec<f64> = (0..=n).map(|k| lo * 0.5 * (8.0 * hi / lo).powf(k as f64 / n as f64)).collect();
        for target in [-1.0, -2.0] {
            let g = |w: f64| self.epsilon(w).map(|e| e.re - target).unwrap_or(f64::NAN);
            for pair in grid.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let (fa, fb) = (g(a), g(b));
                // a crossing from negative to positive Re ε + |target| (not a pole jump)
                if fa < 0.0 && fb >= 0.0 {
                    let (mut x0, mut x1) = (a, b);
                    for _ in 0..60 {
                        let xm = 0.5 * (x0 + x1);
                        if g(xm) < 0.0 {
                            x0 = xm;
                        } else {
                            x1 = xm;
                        }
                    }
                    let w = 0.5 * (x0 + x1);
                    let width = poles
                        .iter()
                        .min_by(|p, q| (p.0 - w).abs().partial_cmp(&(q.0 - w).abs()).unwrap())
                        .unwrap()
                        .1;
                    out.push(Feature { omega: w, width });
                }
            }
        }
        out.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
        out
    }
}
