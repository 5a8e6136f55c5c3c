//! Radiative heat transfer between two bodies: sphere–sphere (one reflection,
//! dipole asymptotics, exact multiple scattering) and sphere–plate (one
//! reflection with its propagating/evanescent split and the closed-form
//! asymptotic regimes), plus the heat balance of body 2 with an environment.

use crate::constants::{thermal_wavelength, C, HBAR};
use crate::error::{Error, Result};
use crate::materials::{bose_occupation, Material};
use crate::quadrature::{auto_lmax, integrate_kperp_vec, integrate_spectrum_vec, Feature, KSector, LmaxPolicy, QuadratureSpec};
use crate::radiation::{channel_absorption, net_exchange, sphere_emission, ErrorSlot, Truncation};
use crate::scattering::{fresnel_kz, mie_t, MieTMatrix, Pol};
use crate::waves::{translation_u_scaled, BlockLayout, ConversionD, Sign};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Two-body geometry. Sphere 1 sits at the origin and sphere 2 at +d ẑ
/// (centre-to-centre d). For sphere–plate, d is the distance from the sphere
/// centre to the plate surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    SphereSphere { r1: f64, r2: f64, d: f64 },
    SpherePlate { r: f64, d: f64 },
}

/// Bodies and temperatures. For sphere–plate, body 1 is the plate (half-space)
/// and body 2 the sphere, so `h_1to2` is the plate-to-sphere transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyConfig {
    pub geometry: Geometry,
    pub body1: Material,
    pub body2: Material,
    pub t1: f64,
    pub t2: f64,
    pub t_env: f64,
}

impl TwoBodyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("T1", self.t1), ("T2", self.t2), ("T_env", self.t_env)] {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("{name} = {t} K must be finite and non-negative")));
            }
        }
        match self.geometry {
            Geometry::SphereSphere { r1, r2, d } => {
                if !(r1 > 0.0 && r2 > 0.0) {
                    return Err(Error::Config(format!("sphere radii must be positive ({r1}, {r2})")));
                }
                if !(d > r1 + r2) {
                    return Err(Error::Config(format!("spheres overlap: d = {d:e} ≤ R1 + R2 = {:e}", r1 + r2)));
                }
            }
            Geometry::SpherePlate { r, d } => {
                if !(r > 0.0) {
                    return Err(Error::Config(format!("sphere radius must be positive ({r})")));
                }
                if !(d > r) {
                    return Err(Error::Config(format!("sphere touches the plate: d = {d:e} ≤ R = {r:e}")));
                }
            }
        }
        Ok(())
    }

    /// Surface-to-surface gap.
    pub fn gap(&self) -> f64 {
        match self.geometry {
            Geometry::SphereSphere { r1, r2, d } => d - r1 - r2,
            Geometry::SpherePlate { r, d } => d - r,
        }
    }

    fn features(&self) -> Vec<Feature> {
        let mut f = self.body1.eps.spectral_features();
        f.extend(self.body2.eps.spectral_features());
        f
    }

    /// Same configuration with other temperatures.
    pub fn with_temperatures(&self, t1: f64, t2: f64, t_env: f64) -> Self {
        TwoBodyConfig {
            t1,
            t2,
            t_env,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    OneReflection,
    Dipole,
    Exact,
}

/// Net transfer from body 1 to body 2 at (T1, T2).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub h_1to2: f64,
    pub propagating: f64,
    pub evanescent: f64,
    /// (ω, propagating + evanescent integrand)
    pub spectrum: Vec<(f64, f64)>,
    pub method: Method,
    pub truncation: Option<Truncation>,
    pub error: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Which sphere emits in a one-directional quantity H_α^{(β)}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Emitter {
    Body1,
    Body2,
}

/// Per-frequency kernel value with the order used and its relative tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub propagating: f64,
    pub evanescent: f64,
    pub l_max: usize,
    pub tail: f64,
}

/// Per-sphere channel data on the ρ-scaled basis, further balanced by
/// x_l = √max_P|T̂_l| so that T̃ = T̂/x² is O(1). Orders whose T̂ vanishes are
/// dropped: they neither absorb nor feed back.
struct SideScaling {
    l_eff: usize,
    x: Vec<f64>,
    t: Vec<[Complex64; 2]>,
    a: Vec<[f64; 2]>,
}

impl SideScaling {
    fn new(tm: &MieTMatrix, rho: f64) -> Self {
        let (mut x, mut t, mut a) = (Vec::new(), Vec::new(), Vec::new());
        for l in 1..=tm.l_max {
            // T_l/ρ^{2l+1}
            let s = (-(2.0 * l as f64 + 1.0) * rho.ln()).exp();
            let th = [tm.t(Pol::M, l) * s, tm.t(Pol::N, l) * s];
            let mag = th[0].norm().max(th[1].norm());
            if !(mag > 0.0) || !mag.is_finite() {
                break;
            }
            let xl = mag.sqrt();
            x.push(xl);
            t.push([th[0] / mag, th[1] / mag]);
            a.push([
                channel_absorption(tm.t(Pol::M, l)) * s / mag,
                channel_absorption(tm.t(Pol::N, l)) * s / mag,
            ]);
        }
        SideScaling { l_eff: x.len(), x, t, a }
    }
}

/// Condition number above which an exact block solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Σ over m-blocks of Tr{R_abs W R_emit W†} at one frequency for the sphere pair,
/// with W = (I − A T_e B T_a)^{-1} A (exact) or W = A (one reflection).
fn sphere_sphere_trace(cfg: &TwoBodyConfig, emitter: Emitter, method: Method, omega: f64, l_max: usize) -> Result<f64> {
    let Geometry::SphereSphere { r1, r2, d } = cfg.geometry else {
        return Err(Error::Config("sphere–sphere kernel needs a sphere–sphere geometry".into()));
    };
    let (me, re, ma, ra) = match emitter {
        Emitter::Body1 => (&cfg.body1, r1, &cfg.body2, r2),
        Emitter::Body2 => (&cfg.body2, r2, &cfg.body1, r1),
    };
    // emitter → absorber is U− for sphere 1 at the origin, U+ for sphere 2
    let (s_ea, s_ae) = match emitter {
        Emitter::Body1 => (Sign::Minus, Sign::Plus),
        Emitter::Body2 => (Sign::Plus, Sign::Minus),
    };
    let te = mie_t(me, omega, re, l_max)?;
    let ta = mie_t(ma, omega, ra, l_max)?;
    let rho = (omega * d / C).min(1.0);
    let se = SideScaling::new(&te, rho);
    let sa = SideScaling::new(&ta, rho);
    let l_top = se.l_eff.max(sa.l_eff);
    if se.l_eff == 0 || sa.l_eff == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for m in 0..=(l_top as i64) {
        let lay = BlockLayout::new(m, l_top);
        // channel indices kept on each side
        let pick = |s: &SideScaling| -> Vec<usize> { (0..lay.dim()).filter(|&k| lay.entry(k).1 <= s.l_eff).collect() };
        let (ie, ia) = (pick(&se), pick(&sa));
        if ie.is_empty() || ia.is_empty() {
            continue;
        }
        let (a_full, _) = translation_u_scaled(s_ea, m, d, omega, l_top)?;
        let a_blk = DMatrix::from_fn(ia.len(), ie.len(), |i, j| {
            let (li, lj) = (lay.entry(ia[i]).1, lay.entry(ie[j]).1);
            a_full.matrix[(ia[i], ie[j])] * (sa.x[li - 1] * se.x[lj - 1])
        });
        let w = match method {
            Method::Exact => {
                let (b_full, _) = translation_u_scaled(s_ae, m, d, omega, l_top)?;
                // B̃ T̃_a: emitter rows, absorber columns
                let bt = DMatrix::from_fn(ie.len(), ia.len(), |i, j| {
                    let li = lay.entry(ie[i]).1;
                    let (pj, lj) = lay.entry(ia[j]);
                    b_full.matrix[(ie[i], ia[j])] * (se.x[li - 1] * sa.x[lj - 1]) * sa.t[lj - 1][pj.index()]
                });
                let at = DMatrix::from_fn(ia.len(), ie.len(), |i, j| {
                    let (pj, lj) = lay.entry(ie[j]);
                    a_blk[(i, j)] * se.t[lj - 1][pj.index()]
                });
                let n = ia.len();
                let lhs = DMatrix::<Complex64>::identity(n, n) - at * bt;
                let sv = lhs.clone().singular_values();
                let cond = sv.max() / sv.min();
                if !(cond <= MAX_CONDITION) {
                    return Err(Error::Conditioning { omega, m: m as i32, cond });
                }
                lhs.lu()
                    .solve(&a_blk)
                    .ok_or_else(|| Error::Numerical(format!("singular resolvent at ω = {omega:e}, m = {m}")))?
            }
            _ => a_blk,
        };
        let mut s = 0.0;
        for (j, &kj) in ie.iter().enumerate() {
            let (pj, lj) = lay.entry(kj);
            let aj = se.a[lj - 1][pj.index()];
            if aj == 0.0 {
                continue;
            }
            for (i, &ki) in ia.iter().enumerate() {
                let (pi, li) = lay.entry(ki);
                s += sa.a[li - 1][pi.index()] * w[(i, j)].norm_sqr() * aj;
            }
        }
        // ±m blocks are related by a sign similarity and contribute equally
        total += if m == 0 { s } else { 2.0 * s };
    }
    if !total.is_finite() {
        return Err(Error::Numerical(format!("non-finite transfer kernel at ω = {omega:e}")));
    }
    Ok(total)
}

/// Closed dipole kernel Σ_{PP'} a_1 a_2 (9/2x² + 9/2x⁴ + 27/2x⁶ δ_PP'), x = ωd/c.
fn sphere_sphere_dipole(cfg: &TwoBodyConfig, omega: f64) -> Result<f64> {
    let Geometry::SphereSphere { r1, r2, d } = cfg.geometry else {
        return Err(Error::Config("dipole kernel needs a sphere–sphere geometry".into()));
    };
    let t1 = mie_t(&cfg.body1, omega, r1, 1)?;
    let t2 = mie_t(&cfg.body2, omega, r2, 1)?;
    let x = omega * d / C;
    let (x2, x4, x6) = (x * x, x.powi(4), x.powi(6));
    let mut s = 0.0;
    for p in Pol::BOTH {
        for q in Pol::BOTH {
            let k = 4.5 / x2 + 4.5 / x4 + if p == q { 13.5 / x6 } else { 0.0 };
            s += t1.absorption(p, 1) * t2.absorption(q, 1) * k;
        }
    }
    Ok(s)
}

/// Adaptive per-frequency order: evaluate at L and ⌈L/2⌉, double L under the
/// Auto policy until the relative change is below `tol`.
fn with_lmax<F>(eval: F, seed: usize, policy: LmaxPolicy, tol: f64, cap: usize) -> Result<(f64, usize, f64, bool)>
where
    F: Fn(usize) -> Result<f64>,
{
    let mut l = seed.max(1);
    loop {
        let full = eval(l)?;
        let tail = if l == 1 {
            0.0
        } else {
            let half = eval(l.div_ceil(2))?;
            if full == 0.0 {
                0.0
            } else {
                ((full - half) / full).abs()
            }
        };
        let auto = matches!(policy, LmaxPolicy::Auto { .. });
        if !auto || tail <= tol {
            return Ok((full, l, tail, tail <= tol));
        }
        if 2 * l > cap {
            return Ok((full, l, tail, false));
        }
        l *= 2;
    }
}

/// Hard cap on adaptive orders in two-body kernels.
pub const TWO_BODY_L_LIMIT: usize = 256;

fn seed_lmax(cfg: &TwoBodyConfig, policy: LmaxPolicy) -> usize {
    let r = match cfg.geometry {
        Geometry::SphereSphere { r1, r2, .. } => r1.max(r2),
        Geometry::SpherePlate { r, .. } => r,
    };
    let t = cfg.t1.max(cfg.t2).max(cfg.t_env);
    auto_lmax(r, cfg.gap(), thermal_wavelength(t), policy)
}

/// Per-frequency sphere–sphere kernel Tr{R_a W R_e W†} for the given emitter.
pub fn sphere_sphere_kernel(cfg: &TwoBodyConfig, emitter: Emitter, method: Method, omega: f64, l_max: usize) -> Result<f64> {
    match method {
        Method::Dipole => {
            let v = sphere_sphere_dipole(cfg, omega)?;
            Ok(v)
        }
        _ => sphere_sphere_trace(cfg, emitter, method, omega, l_max),
    }
}

struct Tracker {
    order: usize,
    tail: f64,
    unconverged: bool,
}

/// Shared driver: ∫dω (2ħ/π)[ω n(T_a) − ω n(T_b)] (pr + ev).
fn run<K>(kernel: K, t_a: f64, t_b: f64, features: &[Feature], method: Method, spec: &QuadratureSpec) -> Result<TransferResult>
where
    K: Fn(f64) -> Result<KernelValue> + Sync,
{
    let t_ref = t_a.max(t_b);
    if t_a == t_b || t_ref == 0.0 {
        return Ok(TransferResult {
            h_1to2: 0.0,
            propagating: 0.0,
            evanescent: 0.0,
            spectrum: Vec::new(),
            method,
            truncation: None,
            error: 0.0,
            converged: true,
            warnings: Vec::new(),
        });
    }
    let slot = ErrorSlot::default();
    let track = Mutex::new(Tracker {
        order: 0,
        tail: 0.0,
        unconverged: false,
    });
    let tol = spec.rel_tol * 0.1;
    let r = integrate_spectrum_vec(
        |w| {
            let weight = 2.0 * HBAR / PI * w * (bose_occupation(t_a, w) - bose_occupation(t_b, w));
            if weight == 0.0 {
                return vec![0.0, 0.0];
            }
            match kernel(w) {
                Ok(k) => {
                    let mut g = track.lock().unwrap();
                    g.order = g.order.max(k.l_max);
                    g.tail = g.tail.max(k.tail);
                    g.unconverged |= k.tail > tol;
                    vec![weight * k.propagating, weight * k.evanescent]
                }
                Err(e) => {
                    slot.record(e);
                    vec![0.0, 0.0]
                }
            }
        },
        2,
        t_ref,
        features,
        spec,
    );
    slot.check()?;
    let g = track.into_inner().unwrap();
    let mut warnings = Vec::new();
    if !r.converged {
        warnings.push(format!(
            "frequency quadrature did not reach tolerance (error {:e})",
            r.error[0] + r.error[1]
        ));
    }
    if g.unconverged {
        warnings.push(format!("multipole truncation: relative tail up to {:.2e} at l_max = {}", g.tail, g.order));
    }
    Ok(TransferResult {
        h_1to2: r.value[0] + r.value[1],
        propagating: r.value[0],
        evanescent: r.value[1],
        spectrum: r.spectrum.iter().map(|(w, v)| (*w, v[0] + v[1])).collect(),
        method,
        truncation: Some(Truncation {
            order: g.order,
            tail: g.tail,
        }),
        error: r.error[0] + r.error[1],
        converged: r.converged,
        warnings,
    })
}

fn sphere_sphere_kernel_adaptive(
    cfg: &TwoBodyConfig,
    emitter: Emitter,
    method: Method,
    policy: LmaxPolicy,
    tol: f64,
) -> impl Fn(f64) -> Result<KernelValue> + Sync + '_ {
    let seed = seed_lmax(cfg, policy);
    let close = cfg.gap()
        < 0.2
            * match cfg.geometry {
                Geometry::SphereSphere { r1, r2, .. } => r1.min(r2),
                Geometry::SpherePlate { r, .. } => r,
            };
    move |w| {
        if method == Method::Dipole {
            let v = sphere_sphere_dipole(cfg, w)?;
            return Ok(KernelValue {
                propagating: v,
                evanescent: 0.0,
                l_max: 1,
                tail: 0.0,
            });
        }
        let (v, l, tail, ok) = with_lmax(|l| sphere_sphere_trace(cfg, emitter, method, w, l), seed, policy, tol, TWO_BODY_L_LIMIT)?;
        if !ok && matches!(policy, LmaxPolicy::Auto { .. }) && !close {
            return Err(Error::Truncation(format!(
                "sphere–sphere kernel at ω = {w:e}: relative tail {tail:.2e} at l_max = {l}"
            )));
        }
        Ok(KernelValue {
            propagating: v,
            evanescent: 0.0,
            l_max: l,
            tail,
        })
    }
}

fn sphere_sphere(cfg: &TwoBodyConfig, method: Method, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<TransferResult> {
    cfg.validate()?;
    if !matches!(cfg.geometry, Geometry::SphereSphere { .. }) {
        return Err(Error::Config("expected a sphere–sphere configuration".into()));
    }
    let kernel = sphere_sphere_kernel_adaptive(cfg, Emitter::Body1, method, policy, spec.rel_tol * 0.1);
    let mut out = run(kernel, cfg.t1, cfg.t2, &cfg.features(), method, spec)?;
    if method == Method::Dipole {
        out.warnings.extend(dipole_guard(cfg));
    }
    Ok(out)
}

fn dipole_guard(cfg: &TwoBodyConfig) -> Vec<String> {
    let lt = thermal_wavelength(cfg.t1.max(cfg.t2));
    let (r, d) = match cfg.geometry {
        Geometry::SphereSphere { r1, r2, d } => (r1.max(r2), d),
        Geometry::SpherePlate { r, d } => (r, d),
    };
    let ratio = (r / d).max(r / lt);
    if ratio > 0.1 {
        vec![format!("dipole formula used with R/min(d, λ_T) = {ratio:.3} (valid for R ≪ d, λ_T)")]
    } else {
        Vec::new()
    }
}

/// One-reflection sphere–sphere transfer.
pub fn sphere_sphere_transfer_1refl(cfg: &TwoBodyConfig, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<TransferResult> {
    sphere_sphere(cfg, Method::OneReflection, policy, spec)
}

/// Large-separation dipole transfer (closed kernel).
pub fn sphere_sphere_transfer_dipole(cfg: &TwoBodyConfig, spec: &QuadratureSpec) -> Result<TransferResult> {
    sphere_sphere(cfg, Method::Dipole, LmaxPolicy::Fixed(1), spec)
}

/// Exact sphere–sphere transfer with multiple-scattering resolvents per m-block.
pub fn sphere_sphere_transfer_exact(cfg: &TwoBodyConfig, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<TransferResult> {
    sphere_sphere(cfg, Method::Exact, policy, spec)
}

/// One-directional H_α^{(β)}(T): heat emitted by `emitter` at temperature T and
/// absorbed by the other body, with everything else at zero temperature.
pub fn emitted_to_other(
    cfg: &TwoBodyConfig,
    emitter: Emitter,
    t: f64,
    method: Method,
    policy: LmaxPolicy,
    spec: &QuadratureSpec,
) -> Result<TransferResult> {
    cfg.validate()?;
    match cfg.geometry {
        Geometry::SphereSphere { .. } => {
            let kernel = sphere_sphere_kernel_adaptive(cfg, emitter, method, policy, spec.rel_tol * 0.1);
            run(kernel, t, 0.0, &cfg.features(), method, spec)
        }
        Geometry::SpherePlate { .. } => {
            // the one-reflection kernel is reciprocal, so either emitter gives it
            if method == Method::Exact {
                return Err(Error::Config("exact sphere–plate transfer is not provided".into()));
            }
            let kernel = sphere_plate_kernel(cfg, method, policy, spec)?;
            run(kernel, t, 0.0, &cfg.features(), method, spec)
        }
    }
}

fn sphere_plate_kernel<'a>(
    cfg: &'a TwoBodyConfig,
    method: Method,
    policy: LmaxPolicy,
    spec: &'a QuadratureSpec,
) -> Result<impl Fn(f64) -> Result<KernelValue> + Sync + 'a> {
    let Geometry::SpherePlate { r, d } = cfg.geometry else {
        return Err(Error::Config("expected a sphere–plate configuration".into()));
    };
    let seed = if method == Method::Dipole { 1 } else { seed_lmax(cfg, policy) };
    let tol = spec.rel_tol * 0.1;
    let pol_auto = if method == Method::Dipole { LmaxPolicy::Fixed(1) } else { policy };
    Ok(move |w: f64| -> Result<KernelValue> {
        let (eps_p, mu_p) = cfg.body1.response(w)?;
        let eval = |l_max: usize| -> Result<(f64, f64)> {
            let tm = mie_t(&cfg.body2, w, r, l_max)?;
            let a: Vec<[f64; 2]> = (1..=l_max).map(|l| [tm.absorption(Pol::M, l), tm.absorption(Pol::N, l)]).collect();
            let l_eff = (1..=l_max).rev().find(|&l| a[l - 1][0] != 0.0 || a[l - 1][1] != 0.0).unwrap_or(0);
            if l_eff == 0 {
                return Ok((0.0, 0.0));
            }
            let k0 = w / C;
            let u_cut = spec.u_cutoff.max(l_eff as f64 + 7.0 * (l_eff as f64).sqrt() + 20.0);
            let inner = QuadratureSpec {
                rel_tol: tol,
                u_cutoff: u_cut,
                ..*spec
            };
            let slot = ErrorSlot::default();
            let res = integrate_kperp_vec(
                |ks| {
                    let kp = ks.k_perp();
                    let dm = match ConversionD::for_sector(l_eff, ks, w) {
                        Ok(v) => v,
                        Err(e) => {
                            slot.record(e);
                            return vec![0.0];
                        }
                    };
                    let (rm, rn) = fresnel_kz(eps_p, mu_p, ks.k_z(), w);
                    let plate = match ks {
                        KSector::Propagating { .. } => [0.5 * (1.0 - rm.norm_sqr()), 0.5 * (1.0 - rn.norm_sqr())],
                        KSector::Evanescent { kappa, .. } => {
                            let e = (-2.0 * kappa * d).exp();
                            [rm.im * e, rn.im * e]
                        }
                    };
                    let mut s = 0.0;
                    for p in Pol::BOTH {
                        if plate[p.index()] == 0.0 {
                            continue;
                        }
                        let mut sph = 0.0;
                        for l in 1..=l_eff {
                            for q in Pol::BOTH {
                                let al = a[l - 1][q.index()];
                                if al == 0.0 {
                                    continue;
                                }
                                let dsum: f64 = (-(l as i64)..=(l as i64)).map(|m| dm.get(l, m, q, p).norm_sqr()).sum();
                                sph += al * dsum;
                            }
                        }
                        s += plate[p.index()] * sph;
                    }
                    let v = 0.5 * s / (k0 * k0);
                    if !v.is_finite() {
                        slot.record(Error::Saturation { l: l_eff, abs_z: kp / k0 });
                        return vec![0.0];
                    }
                    vec![v]
                },
                1,
                w,
                Some(d),
                &inner,
            );
            slot.check()?;
            Ok((res.propagating[0], res.evanescent[0]))
        };
        if method == Method::Dipole {
            let (pr, ev) = eval(1)?;
            return Ok(KernelValue {
                propagating: pr,
                evanescent: ev,
                l_max: 1,
                tail: 0.0,
            });
        }
        // the order adapts on the sum; the split is taken at the final order
        let cache = Mutex::new((0usize, (0.0, 0.0)));
        let (_, l, tail, ok) = with_lmax(
            |l| {
                let v = eval(l)?;
                let mut c = cache.lock().unwrap();
                if l >= c.0 {
                    *c = (l, v);
                }
                Ok(v.0 + v.1)
            },
            seed,
            pol_auto,
            tol,
            TWO_BODY_L_LIMIT,
        )?;
        let close = d - r < 0.2 * r;
        if !ok && matches!(pol_auto, LmaxPolicy::Auto { .. }) && !close {
            return Err(Error::Truncation(format!(
                "sphere–plate kernel at ω = {w:e}: relative tail {tail:.2e} at l_max = {l}"
            )));
        }
        let (pr, ev) = cache.into_inner().unwrap().1;
        Ok(KernelValue {
            propagating: pr,
            evanescent: ev,
            l_max: l,
            tail,
        })
    })
}

/// One-reflection plate-to-sphere transfer with its propagating/evanescent split.
pub fn sphere_plate_transfer_1refl(cfg: &TwoBodyConfig, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<TransferResult> {
    cfg.validate()?;
    let kernel = sphere_plate_kernel(cfg, Method::OneReflection, policy, spec)?;
    run(kernel, cfg.t1, cfg.t2, &cfg.features(), Method::OneReflection, spec)
}

/// The same kernel restricted to l = 1.
pub fn sphere_plate_transfer_dipole(cfg: &TwoBodyConfig, spec: &QuadratureSpec) -> Result<TransferResult> {
    cfg.validate()?;
    let kernel = sphere_plate_kernel(cfg, Method::Dipole, LmaxPolicy::Fixed(1), spec)?;
    let mut out = run(kernel, cfg.t1, cfg.t2, &cfg.features(), Method::Dipole, spec)?;
    out.warnings.extend(dipole_guard(cfg));
    Ok(out)
}

/// Closed-form evanescent regimes of the small-sphere plate transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateRegime {
    /// d ≫ λ_T ≫ R, decays as d⁻²
    Far,
    /// λ_T ≫ d ≫ R, decays as d⁻³
    Near,
}

/// √(1−ε) on the branch continuous from passive media: Re ≥ 0, Im ≤ 0.
pub(crate) fn root_one_minus(eps: Complex64) -> Complex64 {
    let z = 1.0 - eps;
    let s = z.sqrt();
    let s = if s.re < 0.0 { -s } else { s };
    if s.re == 0.0 && s.im > 0.0 {
        -s
    } else {
        s
    }
}

/// Closed-form evanescent transfer (plate → sphere) in the far or near regime,
/// with the material factors Im[(ε−1)/√(1−ε)] and Im[(ε−1)/(ε+1)]. Guards add
/// warnings. Channel absorptivities enter with their non-negative sign.
///
/// The far factor equals Re √(ε−1). The grazing limit of the full kernel is
/// Re[(1+ε)/√(ε−1)], so the far form is only accurate for |ε| ≫ 1 (metals).
pub fn sphere_plate_transfer_asymptotic(regime: PlateRegime, cfg: &TwoBodyConfig, spec: &QuadratureSpec) -> Result<(f64, Vec<String>)> {
    cfg.validate()?;
    let Geometry::SpherePlate { r, d } = cfg.geometry else {
        return Err(Error::Config("expected a sphere–plate configuration".into()));
    };
    let (tp, ts) = (cfg.t1, cfg.t2);
    let lt = thermal_wavelength(tp.max(ts));
    let mut warnings = Vec::new();
    match regime {
        PlateRegime::Far if !(d > 10.0 * lt && lt > 10.0 * r) => warnings.push(format!(
            "far-regime formula outside d ≫ λ_T ≫ R (d/λ_T = {:.3}, R/λ_T = {:.3})",
            d / lt,
            r / lt
        )),
        PlateRegime::Near if !(lt > 10.0 * d && d > 10.0 * r) => warnings.push(format!(
            "near-regime formula outside λ_T ≫ d ≫ R (d/λ_T = {:.3}, R/d = {:.3})",
            d / lt,
            r / d
        )),
        _ => {}
    }
    if tp == ts || tp.max(ts) == 0.0 {
        return Ok((0.0, warnings));
    }
    let slot = ErrorSlot::default();
    let density = |w: f64| -> Result<f64> {
        let dn = bose_occupation(tp, w) - bose_occupation(ts, w);
        if dn == 0.0 {
            return Ok(0.0);
        }
        let eps = cfg.body1.eps.epsilon_or_stand_in(w)?;
        let tm = mie_t(&cfg.body2, w, r, 1)?;
        Ok(match regime {
            PlateRegime::Far => {
                // (ε−1)/√(1−ε) = −√(1−ε), finite at ε = 1
                let f = (-root_one_minus(eps)).im;
                let a = tm.absorption(Pol::M, 1) + tm.absorption(Pol::N, 1);
                3.0 * HBAR * C * C / (2.0 * PI * d * d) * dn / w * f * a
            }
            PlateRegime::Near => {
                let f = ((eps - 1.0) / (eps + 1.0)).im;
                3.0 * HBAR * C.powi(3) / (2.0 * PI * d.powi(3)) * dn / (w * w) * f * tm.absorption(Pol::N, 1)
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
        tp.max(ts),
        &cfg.features(),
        spec,
    );
    slot.check()?;
    Ok((r.value[0], warnings))
}

/// Distance-independent propagating transfer of a small sphere (l = 1):
/// (3ħ/2π)∫dω[ωn_p − ωn_s](c/ω)∫_0^{ω/c} k dk/k_z Σ_{PP'}(1−|r^P|²) a^{P'}.
pub fn sphere_plate_propagating_limit(cfg: &TwoBodyConfig, spec: &QuadratureSpec) -> Result<f64> {
    cfg.validate()?;
    let Geometry::SpherePlate { r, .. } = cfg.geometry else {
        return Err(Error::Config("expected a sphere–plate configuration".into()));
    };
    let (tp, ts) = (cfg.t1, cfg.t2);
    if tp == ts {
        return Ok(0.0);
    }
    let slot = ErrorSlot::default();
    let res = integrate_spectrum_vec(
        |w| {
            let dn = w * (bose_occupation(tp, w) - bose_occupation(ts, w));
            if dn == 0.0 {
                return vec![0.0];
            }
            let go = || -> Result<f64> {
                let (eps, mu) = cfg.body1.response(w)?;
                let tm = mie_t(&cfg.body2, w, r, 1)?;
                let a = tm.absorption(Pol::M, 1) + tm.absorption(Pol::N, 1);
                let k0 = w / C;
                // k dk / k_z = dk_z on the propagating disc
                let (v, _, _) = crate::quadrature::integrate(
                    |kz| {
                        let (rm, rn) = fresnel_kz(eps, mu, Complex64::new(kz, 0.0), w);
                        2.0 - rm.norm_sqr() - rn.norm_sqr()
                    },
                    0.0,
                    k0,
                    &QuadratureSpec {
                        rel_tol: spec.rel_tol * 0.1,
                        ..*spec
                    },
                );
                Ok(3.0 * HBAR / (2.0 * PI) * dn / k0 * v * a)
            };
            match go() {
                Ok(v) => vec![v],
                Err(e) => {
                    slot.record(e);
                    vec![0.0]
                }
            }
        },
        1,
        tp.max(ts),
        &cfg.features(),
        spec,
    );
    slot.check()?;
    Ok(res.value[0])
}

/// Heat balance of body 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatBalance {
    /// H_1^{(2)}(T1) − H_1^{(2)}(T_env)
    pub from_body1: f64,
    /// H_2^{(2)}(T2) − H_2^{(2)}(T_env), approximated by minus the isolated
    /// emission of body 2 (one-reflection order; the reabsorbed part is dropped)
    pub self_term: f64,
    pub total: f64,
}

/// Total heat absorbed by body 2 with all three temperatures.
pub fn total_heat_to_object2(cfg: &TwoBodyConfig, method: Method, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<HeatBalance> {
    cfg.validate()?;
    let pair = cfg.with_temperatures(cfg.t1, cfg.t_env, cfg.t_env);
    let from_body1 = match (cfg.geometry, method) {
        (Geometry::SphereSphere { .. }, _) => sphere_sphere(&pair, method, policy, spec)?.h_1to2,
        (Geometry::SpherePlate { .. }, Method::Dipole) => sphere_plate_transfer_dipole(&pair, spec)?.h_1to2,
        (Geometry::SpherePlate { .. }, Method::OneReflection) => sphere_plate_transfer_1refl(&pair, policy, spec)?.h_1to2,
        (Geometry::SpherePlate { .. }, Method::Exact) => return Err(Error::Config("exact sphere–plate transfer is not provided".into())),
    };
    let r2 = match cfg.geometry {
        Geometry::SphereSphere { r2, .. } => r2,
        Geometry::SpherePlate { r, .. } => r,
    };
    let emission = |t: f64| sphere_emission(&cfg.body2, r2, t, spec).map(|e| e.total);
    let self_term = -net_exchange(emission, cfg.t2, cfg.t_env)?;
    Ok(HeatBalance {
        from_body1,
        self_term,
        total: from_body1 + self_term,
    })
}
