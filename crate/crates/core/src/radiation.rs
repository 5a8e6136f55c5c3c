//! Heat emission of isolated bodies into vacuum at zero temperature: plates
//! (half-space and finite slab), spheres (full multipole sum and the dipole-level
//! approximations), cylinders from a supplied T-matrix, and the net exchange with
//! a thermal environment.

use crate::constants::{stefan_boltzmann, C, HBAR};
use crate::error::{Error, Result};
use crate::materials::{bose_occupation, Material};
use crate::quadrature::{integrate_kperp_vec, integrate_spectrum_vec, omega_scale, Feature, QuadratureSpec, SpectralResult};
use crate::scattering::{mie_t, slab_coefficients, CylinderTMatrix, Pol, SlabCoefficients};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Multipole truncation actually used: the largest order over all frequency
/// nodes and the largest relative tail (the last-half contribution at that order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub order: usize,
    pub tail: f64,
}

/// Emission spectrum and total. The integrand is the emission per unit angular
/// frequency at each quadrature node; the total is in W (sphere), W/m² (plate
/// face) or W/m (cylinder).
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSpectrum {
    pub omega_grid: Vec<f64>,
    pub integrand: Vec<f64>,
    pub total: f64,
    pub error: f64,
    pub converged: bool,
    pub truncation: Option<Truncation>,
    pub warnings: Vec<String>,
}

impl EmissionSpectrum {
    fn from_result(r: SpectralResult, component: usize) -> Self {
        let (omega_grid, integrand) = r.spectrum.iter().map(|(w, v)| (*w, v[component])).unzip();
        let mut warnings = Vec::new();
        if !r.converged {
            warnings.push(format!(
                "frequency quadrature did not reach tolerance (error estimate {:e})",
                r.error[component]
            ));
        }
        EmissionSpectrum {
            omega_grid,
            integrand,
            total: r.value[component],
            error: r.error[component],
            converged: r.converged,
            truncation: None,
            warnings,
        }
    }
}

/// Absolute accuracy floor relative to the blackbody scale of each integral.
const NOISE_FLOOR: f64 = 1e-13;

/// First error raised inside a quadrature closure; the closure itself returns 0.
#[derive(Default)]
pub(crate) struct ErrorSlot(Mutex<Option<Error>>);

impl ErrorSlot {
    pub(crate) fn record(&self, e: Error) {
        let mut g = self.0.lock().unwrap();
        if g.is_none() {
            *g = Some(e);
        }
    }

    pub(crate) fn check(self) -> Result<()> {
        match self.0.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("emission needs T > 0, got {t}")));
    }
    Ok(())
}

/// Absorptivity of a scattering channel, −(Re T + |T|²).
pub fn channel_absorption(t: Complex64) -> f64 {
    -(t.re + t.norm_sqr())
}

/// The same channel quantity written with the S-matrix element S = 1 + 2T:
/// (1 − |S|²)/4.
pub fn channel_absorption_s(t: Complex64) -> f64 {
    let s = 1.0 + 2.0 * t;
    (1.0 - s.norm_sqr()) / 4.0
}

/// Per-face emission of a planar body whose reflection/transmission at (k_⊥, ω)
/// comes from `coeffs`. Returns (right face, left face).
pub fn slab_emission_with<F>(coeffs: F, t: f64, features: &[Feature], spec: &QuadratureSpec) -> Result<(EmissionSpectrum, EmissionSpectrum)>
where
    F: Fn(f64, f64) -> Result<SlabCoefficients> + Sync,
{
    check_temperature(t)?;
    let slot = ErrorSlot::default();
    let outer = QuadratureSpec {
        abs_floor: spec.abs_floor.max(NOISE_FLOOR * stefan_boltzmann() * t.powi(4)),
        ..*spec
    };
    let r = integrate_spectrum_vec(
        |w| {
            let k0 = w / C;
            // rounding noise of nearly lossless faces sits far below this
            let inner = QuadratureSpec {
                rel_tol: spec.rel_tol * 0.1,
                abs_floor: NOISE_FLOOR * k0 * k0 / PI,
                ..*spec
            };
            let k = integrate_kperp_vec(
                |ks| match coeffs(ks.k_perp(), w) {
                    Ok(s) => {
                        let face =
                            |r: &[Complex64; 2], tr: &[Complex64; 2]| -> f64 { (0..2).map(|p| 1.0 - r[p].norm_sqr() - tr[p].norm_sqr()).sum() };
                        vec![face(&s.r_r, &s.t_r), face(&s.r_l, &s.t_l)]
                    }
                    Err(e) => {
                        slot.record(e);
                        vec![0.0, 0.0]
                    }
                },
                2,
                w,
                None,
                &inner,
            );
            let pre = HBAR / (2.0 * PI) * w * bose_occupation(t, w);
            vec![pre * k.propagating[0], pre * k.propagating[1]]
        },
        2,
        t,
        features,
        &outer,
    );
    slot.check()?;
    Ok((EmissionSpectrum::from_result(r.clone(), 0), EmissionSpectrum::from_result(r, 1)))
}

/// Emission per unit area of one face of a half-space of `material` at T.
pub fn plate_emission(material: &Material, t: f64, spec: &QuadratureSpec) -> Result<EmissionSpectrum> {
    let features = material.eps.spectral_features();
    let (right, _) = slab_emission_with(
        |kp, w| {
            let (eps, mu) = material.response(w)?;
            Ok(crate::scattering::slab_raw(eps, mu, f64::INFINITY, kp, w))
        },
        t,
        &features,
        spec,
    )?;
    Ok(right)
}

/// Emission per unit area of the two faces of a free-standing slab.
pub fn slab_emission(material: &Material, thickness: f64, t: f64, spec: &QuadratureSpec) -> Result<(EmissionSpectrum, EmissionSpectrum)> {
    if !(thickness > 0.0) {
        return Err(Error::Config(format!("slab thickness must be positive, got {thickness}")));
    }
    let features = material.eps.spectral_features();
    slab_emission_with(|kp, w| slab_coefficients(material, thickness, kp, w), t, &features, spec)
}

/// Hemispherical emissivity: plate emission over σT⁴.
pub fn emissivity(material: &Material, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(plate_emission(material, t, spec)?.total / (stefan_boltzmann() * t.powi(4)))
}

/// Σ_{P,l} (2l+1) (−Re T − |T|²) at one frequency, with the order that was
/// needed and the relative weight of its upper half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereChannelSum {
    pub value: f64,
    pub l_max: usize,
    pub tail: f64,
}

/// Hard limit on the adaptive multipole order.
pub const SPHERE_L_LIMIT: usize = 16384;

/// Channel sum at a fixed order.
pub fn sphere_channel_sum_at(material: &Material, radius: f64, omega: f64, l_max: usize) -> Result<SphereChannelSum> {
    let tm = mie_t(material, omega, radius, l_max)?;
    let mut value = 0.0;
    let mut tail = 0.0;
    let mut scale = 0.0;
    for l in 1..=l_max {
        let mut a = 0.0;
        for p in Pol::BOTH {
            let t = tm.t(p, l);
            a += (2 * l + 1) as f64 * channel_absorption(t);
            scale += (2 * l + 1) as f64 * (t.re.abs() + t.norm_sqr());
        }
        value += a;
        if 2 * l > l_max {
            tail += a.abs();
        }
    }
    // rounding level of a lossless sphere counts as converged
    let rel = if tail <= 1e-13 * scale {
        0.0
    } else {
        tail / value.abs().max(f64::MIN_POSITIVE)
    };
    Ok(SphereChannelSum { value, l_max, tail: rel })
}

/// Channel sum with the order doubled from `seed` until the last-half weight
/// drops below `tol`.
pub fn sphere_channel_sum(material: &Material, radius: f64, omega: f64, seed: usize, tol: f64) -> Result<SphereChannelSum> {
    let mut l = seed.max(1);
    loop {
        let s = sphere_channel_sum_at(material, radius, omega, l)?;
        if s.tail <= tol {
            return Ok(s);
        }
        if 2 * l > SPHERE_L_LIMIT {
            return Err(Error::Truncation(format!(
                "sphere multipole sum at ωR/c = {:.3e} still has relative tail {:.2e} at l_max = {l}",
                omega * radius / C,
                s.tail
            )));
        }
        l *= 2;
    }
}

/// Wien-peak seed max(8, ⌈5 ω_W R/c⌉).
pub fn sphere_lmax_seed(radius: f64, t: f64) -> usize {
    let w_wien = 2.821_439_372 * omega_scale(t);
    8usize.max((5.0 * w_wien * radius / C).ceil() as usize)
}

/// Total emission of a sphere in vacuum, full multipole sum.
pub fn sphere_emission(material: &Material, radius: f64, t: f64, spec: &QuadratureSpec) -> Result<EmissionSpectrum> {
    check_temperature(t)?;
    if !(radius > 0.0) {
        return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
    }
    let seed = sphere_lmax_seed(radius, t);
    let tol = spec.rel_tol * 0.1;
    let slot = ErrorSlot::default();
    let trunc = Mutex::new(Truncation { order: 0, tail: 0.0 });
    let features = material.eps.spectral_features();
    let outer = QuadratureSpec {
        abs_floor: spec
            .abs_floor
            .max(NOISE_FLOOR * 4.0 * PI * radius * radius * stefan_boltzmann() * t.powi(4)),
        ..*spec
    };
    let r = integrate_spectrum_vec(
        |w| match sphere_channel_sum(material, radius, w, seed, tol) {
            Ok(s) => {
                let mut g = trunc.lock().unwrap();
                g.order = g.order.max(s.l_max);
                g.tail = g.tail.max(s.tail);
                vec![2.0 * HBAR / PI * w * bose_occupation(t, w) * s.value]
            }
            Err(e) => {
                slot.record(e);
                vec![0.0]
            }
        },
        1,
        t,
        &features,
        &outer,
    );
    slot.check()?;
    let mut out = EmissionSpectrum::from_result(r, 0);
    out.truncation = Some(trunc.into_inner().unwrap());
    Ok(out)
}

/// Dipole-level approximations of sphere emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DipoleLevel {
    /// l = 1 channels with the quadratic term, valid for R ≪ λ_T
    DipoleFull,
    /// l = 1 without |T|², valid for |√(εμ)| R ≪ λ_T
    DipoleLinear,
    /// quasi-static polarizability, valid for |√ε| R ≪ λ_T and μ = 1
    Polarizability,
}

const VALIDITY_RATIO: f64 = 0.1;

fn approx_warnings(level: DipoleLevel, material: &Material, radius: f64, t: f64) -> Result<Vec<String>> {
    let lambda_t = crate::constants::thermal_wavelength(t);
    let w_wien = 2.821_439_372 * omega_scale(t);
    let (eps, mu) = material.response(w_wien)?;
    let mut out = Vec::new();
    let ratio = match level {
        DipoleLevel::DipoleFull => radius / lambda_t,
        DipoleLevel::DipoleLinear => (eps * mu).sqrt().norm() * radius / lambda_t,
        DipoleLevel::Polarizability => eps.sqrt().norm() * radius / lambda_t,
    };
    if ratio >= VALIDITY_RATIO {
        out.push(format!(
            "{level:?} used outside its validity range (size ratio {ratio:.3} at the Wien peak)"
        ));
    }
    if level == DipoleLevel::Polarizability && material.mu != Complex64::new(1.0, 0.0) {
        out.push("polarizability level ignores μ ≠ 1".to_string());
    }
    Ok(out)
}

/// Sphere emission at one of the dipole levels. Out-of-range use adds a warning
/// but still evaluates.
pub fn sphere_emission_approx(level: DipoleLevel, material: &Material, radius: f64, t: f64, spec: &QuadratureSpec) -> Result<EmissionSpectrum> {
    check_temperature(t)?;
    if !(radius > 0.0) {
        return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
    }
    let warnings = approx_warnings(level, material, radius, t)?;
    let slot = ErrorSlot::default();
    let features = material.eps.spectral_features();
    let density = |w: f64| -> Result<f64> {
        let n = bose_occupation(t, w);
        Ok(match level {
            DipoleLevel::Polarizability => {
                let (eps, _) = material.response(w)?;
                let alpha = crate::scattering::polarizability(eps, radius);
                4.0 * HBAR / (PI * C.powi(3)) * w.powi(4) * n * alpha.im
            }
            _ => {
                let tm = mie_t(material, w, radius, 1)?;
                let s: f64 = Pol::BOTH
                    .iter()
                    .map(|&p| {
                        let t1 = tm.t(p, 1);
                        if level == DipoleLevel::DipoleFull {
                            channel_absorption(t1)
                        } else {
                            -t1.re
                        }
                    })
                    .sum();
                6.0 * HBAR / PI * w * n * s
            }
        })
    };
    let r = integrate_spectrum_vec(
        |w| match density(w) {
            Ok(v) => vec![v],
            Err(e) => {
                slot.record(e);
                vec![0.0]
            }
        },
        1,
        t,
        &features,
        spec,
    );
    slot.check()?;
    let mut out = EmissionSpectrum::from_result(r, 0);
    out.warnings.extend(warnings);
    out.truncation = Some(Truncation { order: 1, tail: f64::NAN });
    Ok(out)
}

/// Σ_n ∫_{|k_z|<ω/c} dk_z/2π Σ_P (Re T^PP + |T^PP|² + |T^PP̄|²) for a T-matrix
/// given at one frequency, by the trapezoid rule on the supplied k_z nodes with
/// linear interpolation at ±ω/c.
pub fn cylinder_channel_integral(cyl: &CylinderTMatrix, omega: f64) -> Result<f64> {
    let k0 = omega / C;
    let mut ns: Vec<i64> = cyl.blocks.iter().map(|b| b.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let f = |t: &[[Complex64; 2]; 2]| -> f64 { (0..2).map(|p| t[p][p].re + t[p][p].norm_sqr() + t[p][1 - p].norm_sqr()).sum() };
    let mut total = 0.0;
    for n in ns {
        let mut pts: Vec<(f64, f64)> = cyl.blocks.iter().filter(|b| b.n == n).map(|b| (b.k_z, f(&b.t))).collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (lo, hi) = (pts[0].0, pts.last().unwrap().0);
        let slack = 1e-12 * k0;
        if lo > -k0 + slack || hi < k0 - slack {
            return Err(Error::Range {
                omega,
                lo: 0.0,
                hi: C * (-lo).min(hi).max(0.0),
            });
        }
        let interp = |k: f64| -> f64 {
            let j = pts.partition_point(|p| p.0 <= k).clamp(1, pts.len() - 1);
            let (a, b) = (pts[j - 1], pts[j]);
            if b.0 == a.0 {
                a.1
            } else {
                a.1 + (b.1 - a.1) * (k - a.0) / (b.0 - a.0)
            }
        };
        let mut nodes = vec![(-k0, interp(-k0))];
        nodes.extend(pts.iter().copied().filter(|p| p.0 > -k0 && p.0 < k0));
        nodes.push((k0, interp(k0)));
        let s: f64 = nodes.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        total += s / (2.0 * PI);
    }
    Ok(total)
}

/// Emission per unit length of a cylinder with a supplied T-matrix. Data tagged
/// with frequencies are interpolated in ω and only the tabulated window is
/// integrated; the Planck weight outside it is reported as a warning.
pub fn cylinder_emission(cyl: &CylinderTMatrix, t: f64, spec: &QuadratureSpec) -> Result<EmissionSpectrum> {
    check_temperature(t)?;
    if cyl.blocks.is_empty() {
        return Err(Error::Config("cylinder T-matrix has no records".into()));
    }
    let s = omega_scale(t);
    let ws = cyl.frequencies();
    let mut window = *spec;
    let mut warnings = Vec::new();
    if let (Some(&lo), Some(&hi)) = (ws.first(), ws.last()) {
        window.x_lo = spec.x_lo.max(lo / s);
        window.x_hi = spec.x_hi.min(hi / s);
        if !(window.x_hi > window.x_lo) {
            return Err(Error::Range { omega: s, lo, hi });
        }
        // blackbody weight ∫ x³/(eˣ−1) outside the window
        let planck = |a: f64, b: f64| crate::quadrature::integrate(|x| x.powi(3) / x.exp_m1(), a, b, &QuadratureSpec::with_tol(1e-8)).0;
        let missed = (planck(spec.x_lo, window.x_lo) + planck(window.x_hi, spec.x_hi)) / planck(spec.x_lo, spec.x_hi);
        if missed > spec.rel_tol {
            warnings.push(format!("tabulated frequencies miss a blackbody weight fraction {missed:.2e}"));
        }
    }
    let slot = ErrorSlot::default();
    let r = integrate_spectrum_vec(
        |w| match cyl.at_omega(w).and_then(|c| cylinder_channel_integral(&c, w)) {
            Ok(v) => vec![-2.0 * HBAR / PI * w * bose_occupation(t, w) * v],
            Err(e) => {
                slot.record(e);
                vec![0.0]
            }
        },
        1,
        t,
        &[],
        &window,
    );
    slot.check()?;
    let mut out = EmissionSpectrum::from_result(r, 0);
    out.warnings.extend(warnings);
    Ok(out)
}

/// Net emission H(T_obj) − H(T_env) of a body exchanging with an environment.
pub fn net_exchange<F>(emission: F, t_obj: f64, t_env: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = |t: f64| if t > 0.0 { emission(t) } else { Ok(0.0) };
    if t_obj == t_env {
        return Ok(0.0);
    }
    Ok(h(t_obj)? - h(t_env)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::OpticalModel;

    fn sigma_t4(t: f64) -> f64 {
        stefan_boltzmann() * t.powi(4)
    }

    #[test]
    fn blackbody_plate() {
        let h = plate_emission(&Material::vacuum(), 300.0, &QuadratureSpec::with_tol(1e-8)).unwrap();
        assert!((h.total / sigma_t4(300.0) - 1.0).abs() < 1e-7, "{}", h.total / sigma_t4(300.0));
        assert!(h.integrand.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn mirror_plate_is_dark() {
        let m = Material::new(OpticalModel::PerfectMirror);
        let h = plate_emission(&m, 300.0, &QuadratureSpec::default()).unwrap();
        assert!(h.total.abs() < 1e-6 * sigma_t4(300.0), "{}", h.total / sigma_t4(300.0));
    }

    #[test]
    fn sic_emissivity_in_unit_interval() {
        let e = emissivity(&Material::new(OpticalModel::silicon_carbide()), 300.0, &QuadratureSpec::default()).unwrap();
        assert!(e > 0.0 && e < 1.0, "{e}");
    }

    #[test]
    fn thick_slab_matches_half_space() {
        let m = Material::new(OpticalModel::gold());
        let spec = QuadratureSpec::with_tol(1e-8);
        let plate = plate_emission(&m, 300.0, &spec).unwrap().total;
        let (r, l) = slab_emission(&m, 1e-3, 300.0, &spec).unwrap();
        assert!((r.total / plate - 1.0).abs() < 1e-6);
        assert!((l.total / plate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn vacuum_and_thin_slab() {
        let spec = QuadratureSpec::default();
        let (r, _) = slab_emission(&Material::vacuum(), 1e-6, 300.0, &spec).unwrap();
        assert!(r.total.abs() < 1e-12);
        let sic = Material::new(OpticalModel::silicon_carbide());
        let (r, l) = slab_emission(&sic, 50e-9, 300.0, &spec).unwrap();
        assert!(r.total > 0.0 && r.total < sigma_t4(300.0));
        assert!((r.total - l.total).abs() < 1e-12 * r.total);
    }

    #[test]
    fn sphere_vacuum_and_mirror() {
        let spec = QuadratureSpec::default();
        let h = sphere_emission(&Material::vacuum(), 1e-6, 300.0, &spec).unwrap();
        assert_eq!(h.total, 0.0);
        for level in [DipoleLevel::DipoleFull, DipoleLevel::DipoleLinear, DipoleLevel::Polarizability] {
            assert_eq!(sphere_emission_approx(level, &Material::vacuum(), 1e-8, 300.0, &spec).unwrap().total, 0.0);
        }
        let r = 2e-6;
        let m = Material::new(OpticalModel::PerfectMirror);
        let h = sphere_emission(&m, r, 300.0, &spec).unwrap();
        assert!(h.total.abs() < 1e-6 * 4.0 * PI * r * r * sigma_t4(300.0));
    }

    #[test]
    fn s_matrix_form_agrees() {
        let m = Material::new(OpticalModel::gold());
        let tm = mie_t(&m, 3e13, 200e-9, 6).unwrap();
        for l in 1..=6 {
            for p in Pol::BOTH {
                let t = tm.t(p, l);
                assert!((channel_absorption(t) - channel_absorption_s(t)).abs() <= 1e-15 * (1.0 + t.norm()));
            }
        }
    }

    #[test]
    fn sphere_l_doubling_reports_tail() {
        let m = Material::new(OpticalModel::silicon_carbide());
        let s = sphere_channel_sum(&m, 20e-6, 2e14, 8, 1e-10).unwrap();
        assert!(s.l_max > 8 && s.tail <= 1e-10);
        let fine = sphere_channel_sum_at(&m, 20e-6, 2e14, 2 * s.l_max).unwrap();
        assert!((fine.value - s.value).abs() <= s.tail * s.value.abs() + 1e-15 * s.value.abs());
    }

    #[test]
    fn mock_cylinder_band_integral() {
        // constant −0.1 on the diagonal, no cross terms, n = −1..=1
        let t = 300.0;
        let kmax = 60.0 * omega_scale(t) / C;
        let mut recs = Vec::new();
        for n in -1..=1 {
            for j in 0..=40 {
                let kz = -kmax + 2.0 * kmax * j as f64 / 40.0;
                recs.push(format!(
                    r#"{{"n":{n},"k_z":{kz},"T_MM":[-0.1,0],"T_MN":[0,0],"T_NM":[0,0],"T_NN":[-0.1,0]}}"#
                ));
            }
        }
        let cyl = CylinderTMatrix::from_json(&format!("[{}]", recs.join(","))).unwrap();
        let h = cylinder_emission(&cyl, t, &QuadratureSpec::with_tol(1e-9)).unwrap();
        // (2ħ/π) · 3 n-values · 2 pol · 0.09/(πc) · ∫ω² n dω, with ∫ω² n = 2ζ(3)(k_BT/ħ)³
        let zeta3 = 1.202_056_903_159_594;
        let exact = 2.0 * HBAR / PI * 6.0 * 0.09 / (PI * C) * 2.0 * zeta3 * omega_scale(t).powi(3);
        assert!((h.total / exact - 1.0).abs() < 1e-6, "{} vs {exact}", h.total);
    }

    #[test]
    fn cylinder_coverage_error() {
        let cyl = CylinderTMatrix::from_json(
            r#"[{"n":0,"k_z":-1.0,"T_MM":[-0.1,0],"T_MN":[0,0],"T_NM":[0,0],"T_NN":[-0.1,0]},
                {"n":0,"k_z":1.0,"T_MM":[-0.1,0],"T_MN":[0,0],"T_NM":[0,0],"T_NN":[-0.1,0]}]"#,
        )
        .unwrap();
        assert!(matches!(
            cylinder_emission(&cyl, 300.0, &QuadratureSpec::default()),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn net_exchange_signs() {
        let h = |t: f64| Ok(sigma_t4(t));
        assert_eq!(net_exchange(h, 300.0, 300.0).unwrap(), 0.0);
        let a = net_exchange(h, 400.0, 300.0).unwrap();
        assert!(a > 0.0);
        assert_eq!(a, -net_exchange(h, 300.0, 400.0).unwrap());
    }
}
