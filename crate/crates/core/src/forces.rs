//! Non-equilibrium Casimir forces on body 2 for sphere–sphere and sphere–plate
//! configurations: one-reflection interaction and self terms, their dipole
//! and low-temperature closed forms, the equilibrium force from a Matsubara sum
//! at dipole order, and the total-force assembly with an environment.
//!
//! Sign convention: positive forces attract body 2 towards body 1 (the other
//! sphere, or the plate).

use crate::constants::{thermal_wavelength, C, HBAR, K_B};
use crate::error::{Error, Result};
use crate::materials::{bose_occupation, insulator_expansion, InsulatorExpansion, Material, OpticalModel};
use crate::quadrature::{
    auto_lmax, integrate, integrate_kperp_vec, integrate_spectrum_oscillatory_vec, integrate_vec, Feature, KSector, LmaxPolicy, QuadratureSpec,
};
use crate::radiation::{ErrorSlot, Truncation};
use crate::scattering::{fresnel_kz, fresnel_raw, mie_t, MieTMatrix, Pol};
use crate::special::{riccati_log_derivative_j, sph_bessel_j_all};
use crate::transfer::{Geometry, Method, TwoBodyConfig};
use crate::waves::{pz_block, translation_u_scaled, BlockLayout, ConversionD, Sign};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Mutex;

type C64 = Complex64;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Which sources a non-equilibrium force term comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForceTerm {
    /// sources in body 1 acting on body 2
    Interaction,
    /// sources in body 2 acting on itself through reflections at body 1
    SelfForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceResult {
    pub force: f64,
    /// mode split for sphere–plate terms (zero otherwise)
    pub propagating: f64,
    pub evanescent: f64,
    /// (ω, force density)
    pub spectrum: Vec<(f64, f64)>,
    pub method: Method,
    pub truncation: Option<Truncation>,
    pub error: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl ForceResult {
    fn zero(method: Method) -> Self {
        ForceResult {
            force: 0.0,
            propagating: 0.0,
            evanescent: 0.0,
            spectrum: Vec::new(),
            method,
            truncation: None,
            error: 0.0,
            converged: true,
            warnings: Vec::new(),
        }
    }
}

/// Per-frequency force density divided by n(T, ω): complex amplitude g with
/// density Re[g e^{iτω}], and the propagating/evanescent parts (non-oscillatory).
struct ForceKernel {
    total: C64,
    propagating: f64,
    evanescent: f64,
    l_max: usize,
    tail: f64,
}

struct Tracker {
    order: usize,
    tail: f64,
    unconverged: bool,
}

fn integrate_force<K>(kernel: K, t: f64, tau: f64, features: &[Feature], method: Method, spec: &QuadratureSpec) -> Result<ForceResult>
where
    K: Fn(f64) -> Result<ForceKernel> + Sync,
{
    if t == 0.0 {
        return Ok(ForceResult::zero(method));
    }
    let slot = ErrorSlot::default();
    let track = Mutex::new(Tracker {
        order: 0,
        tail: 0.0,
        unconverged: false,
    });
    let tol = spec.rel_tol * 0.1;
    let r = integrate_spectrum_oscillatory_vec(
        |w| {
            let n = bose_occupation(t, w);
            if n == 0.0 {
                return vec![ZERO; 3];
            }
            match kernel(w) {
                Ok(k) => {
                    let mut g = track.lock().unwrap();
                    g.order = g.order.max(k.l_max);
                    g.tail = g.tail.max(k.tail);
                    g.unconverged |= k.tail > tol;
                    // the mode split is only used without an oscillatory factor
                    let ph = C64::new(0.0, -tau * w).exp();
                    vec![k.total * n, C64::new(k.propagating * n, 0.0) * ph, C64::new(k.evanescent * n, 0.0) * ph]
                }
                Err(e) => {
                    slot.record(e);
                    vec![ZERO; 3]
                }
            }
        },
        tau,
        3,
        t,
        features,
        spec,
        false,
    );
    slot.check()?;
    let g = track.into_inner().unwrap();
    let mut warnings = Vec::new();
    if !r.converged {
        warnings.push(format!("frequency quadrature did not reach tolerance (error {:e})", r.error[0]));
    }
    if g.unconverged {
        warnings.push(format!("multipole truncation: relative tail up to {:.2e} at l_max = {}", g.tail, g.order));
    }
    Ok(ForceResult {
        force: r.value[0],
        propagating: r.value[1],
        evanescent: r.value[2],
        spectrum: r.spectrum.iter().map(|(w, v)| (*w, v[0])).collect(),
        method,
        truncation: Some(Truncation {
            order: g.order,
            tail: g.tail,
        }),
        error: r.error[0],
        converged: r.converged,
        warnings,
    })
}

/// Order selection shared by the force kernels: the seed order, and under the
/// Auto policy up to two doublings while the relative change exceeds `tol`.
/// Non-convergence is reported through the tail, not raised.
fn adapt_order<F>(eval: F, seed: usize, policy: LmaxPolicy, tol: f64) -> Result<(ForceKernel, usize, f64)>
where
    F: Fn(usize) -> Result<ForceKernel>,
{
    let mut l = seed.max(1);
    let auto = matches!(policy, LmaxPolicy::Auto { .. });
    let mut tries = 0;
    loop {
        let full = eval(l)?;
        if !auto || l == 1 {
            return Ok((full, l, 0.0));
        }
        let half = eval(l.div_ceil(2))?;
        let scale = full.total.norm().max(half.total.norm());
        let tail = if scale == 0.0 { 0.0 } else { (full.total - half.total).norm() / scale };
        if tail <= tol || tries == 2 {
            return Ok((full, l, tail));
        }
        l *= 2;
        tries += 1;
    }
}

fn check_method(method: Method) -> Result<()> {
    if method == Method::Exact {
        return Err(Error::Config("forces are provided at one-reflection and dipole order only".into()));
    }
    Ok(())
}

fn features(cfg: &TwoBodyConfig) -> Vec<Feature> {
    let mut f = cfg.body1.eps.spectral_features();
    f.extend(cfg.body2.eps.spectral_features());
    f
}

fn seed_lmax(cfg: &TwoBodyConfig, t: f64, policy: LmaxPolicy) -> usize {
    let r = match cfg.geometry {
        Geometry::SphereSphere { r1, r2, .. } => r1.max(r2),
        Geometry::SpherePlate { r, .. } => r,
    };
    auto_lmax(r, cfg.gap(), thermal_wavelength(t.max(cfg.t_env)), policy)
}

fn rcoef(t: C64) -> f64 {
    // Re T + |T|², non-positive for passive channels
    t.re + t.norm_sqr()
}

// ---------------------------------------------------------------- sphere–sphere

/// Scaled channel data T̂ = T/ρ^{2l+1} and R̂ = (Re T + |T|²)/ρ^{2l+1} for
/// l ≤ l_max, zero-padded to l_max + 1.
fn scaled_channels(tm: &MieTMatrix, rho: f64, l_max: usize) -> (Vec<[C64; 2]>, Vec<[f64; 2]>) {
    let mut t = vec![[ZERO; 2]; l_max + 1];
    let mut r = vec![[0.0; 2]; l_max + 1];
    for l in 1..=l_max {
        let s = (-(2.0 * l as f64 + 1.0) * rho.ln()).exp();
        for p in Pol::BOTH {
            let v = tm.t(p, l);
            if v != ZERO {
                t[l - 1][p.index()] = v * s;
                r[l - 1][p.index()] = rcoef(v) * s;
            }
        }
    }
    (t, r)
}

fn diag_c(lay: &BlockLayout, v: &[[C64; 2]]) -> DMatrix<C64> {
    let n = lay.dim();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let (p, l) = lay.entry(i);
            v[l - 1][p.index()]
        } else {
            ZERO
        }
    })
}

fn diag_r(lay: &BlockLayout, v: &[[f64; 2]]) -> DMatrix<C64> {
    let n = lay.dim();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let (p, l) = lay.entry(i);
            C64::new(v[l - 1][p.index()], 0.0)
        } else {
            ZERO
        }
    })
}

/// S p_z S^{±1} with S = diag(ρ^{l+1/2}).
fn scaled_pz(lay: &BlockLayout, m: i64, omega: f64, rho: f64, plus: bool) -> DMatrix<C64> {
    let mut p = pz_block(m, omega, lay.l_max);
    if rho != 1.0 {
        for i in 0..lay.dim() {
            for j in 0..lay.dim() {
                if p[(i, j)] != ZERO {
                    let (li, lj) = (lay.entry(i).1 as f64, lay.entry(j).1 as f64);
                    let e = if plus { li + lj + 1.0 } else { li - lj };
                    p[(i, j)] *= rho.powf(e);
                }
            }
        }
    }
    p
}

fn sphere_pair(cfg: &TwoBodyConfig) -> Result<(f64, f64, f64)> {
    match cfg.geometry {
        Geometry::SphereSphere { r1, r2, d } => Ok((r1, r2, d)),
        _ => Err(Error::Config("expected a sphere–sphere configuration".into())),
    }
}

/// Interaction trace Σ_m Im Tr{T₂†p_z(I + T₂) U R₁ U†} for sphere 1 at +d ẑ
/// from sphere 2, with U = U⁺ (outgoing at sphere 1 → regular at sphere 2).
fn ss_interaction_trace(t1: &MieTMatrix, t2: &MieTMatrix, d: f64, omega: f64, l_max: usize) -> Result<f64> {
    let big = l_max + 1;
    let rho = (omega * d / C).min(1.0);
    let (_, r1) = scaled_channels(t1, rho, l_max);
    let (tt2, _) = scaled_channels(t2, rho, l_max);
    let mut total = 0.0;
    for m in -(big as i64)..=(big as i64) {
        let lay = BlockLayout::new(m, big);
        let (u, _) = translation_u_scaled(Sign::Plus, m, d, omega, big)?;
        let t2m = diag_c(&lay, &tt2);
        let t2a = t2m.adjoint();
        let op = &t2a * scaled_pz(&lay, m, omega, rho, false) + &t2a * scaled_pz(&lay, m, omega, rho, true) * &t2m;
        let corr = &u.matrix * diag_r(&lay, &r1) * u.matrix.adjoint();
        total += (op * corr).trace().im;
    }
    if !total.is_finite() {
        return Err(Error::Numerical(format!("non-finite interaction force kernel at ω = {omega:e}")));
    }
    Ok(total)
}

/// Self trace Σ_m Tr{R₂ p_z U⁺ T₁ U⁻} (complex; the force uses its imaginary part).
fn ss_self_trace(t1: &MieTMatrix, t2: &MieTMatrix, d: f64, omega: f64, l_max: usize) -> Result<C64> {
    let big = l_max + 1;
    let rho = (omega * d / C).min(1.0);
    let (tt1, _) = scaled_channels(t1, rho, l_max);
    let (_, r2) = scaled_channels(t2, rho, l_max);
    let mut total = ZERO;
    for m in -(big as i64)..=(big as i64) {
        let lay = BlockLayout::new(m, big);
        let (up, _) = translation_u_scaled(Sign::Plus, m, d, omega, big)?;
        let (um, _) = translation_u_scaled(Sign::Minus, m, d, omega, big)?;
        let op = diag_r(&lay, &r2) * scaled_pz(&lay, m, omega, rho, false);
        total += (op * &up.matrix * diag_c(&lay, &tt1) * &um.matrix).trace();
    }
    if !total.is_finite() {
        return Err(Error::Numerical(format!("non-finite self force kernel at ω = {omega:e}")));
    }
    Ok(total)
}

fn ss_kernel_general(cfg: &TwoBodyConfig, term: ForceTerm, omega: f64, l_max: usize) -> Result<ForceKernel> {
    let (r1, r2, d) = sphere_pair(cfg)?;
    let t1 = mie_t(&cfg.body1, omega, r1, l_max)?;
    let t2 = mie_t(&cfg.body2, omega, r2, l_max)?;
    let pre = 2.0 * HBAR / PI;
    let total = match term {
        ForceTerm::Interaction => C64::new(pre * ss_interaction_trace(&t1, &t2, d, omega, l_max)?, 0.0),
        ForceTerm::SelfForce => {
            // Im z = Re(−i z); the e^{2iωd/c} phase is handed to the Filon panels
            let z = ss_self_trace(&t1, &t2, d, omega, l_max)?;
            -C64::i() * z * pre * C64::new(0.0, -2.0 * omega * d / C).exp()
        }
    };
    Ok(ForceKernel {
        total,
        propagating: 0.0,
        evanescent: 0.0,
        l_max,
        tail: 0.0,
    })
}

/// Closed dipole kernels (interaction and self) divided by n(T, ω); the self
/// kernel is returned without its e^{2iωd/c} factor.
fn ss_kernel_dipole(cfg: &TwoBodyConfig, term: ForceTerm, omega: f64) -> Result<ForceKernel> {
    let (r1, r2, d) = sphere_pair(cfg)?;
    let t1 = mie_t(&cfg.body1, omega, r1, 1)?;
    let t2 = mie_t(&cfg.body2, omega, r2, 1)?;
    let x = omega * d / C;
    let pre = HBAR / (C * PI) * omega;
    let i = C64::i();
    let total = match term {
        ForceTerm::Interaction => {
            let mut k = 0.0;
            for p in Pol::BOTH {
                let r = rcoef(t1.t(p, 1));
                if r == 0.0 {
                    continue;
                }
                let cross = t2.t(p, 1) * t2.t(p.other(), 1).conj();
                for q in Pol::BOTH {
                    let same = p == q;
                    let tq = t2.t(q, 1);
                    let mut v = 9.0 / x.powi(2) * (tq.re + if same { cross.re } else { 0.0 });
                    v += tq.im * (9.0 / x.powi(3) + if same { 81.0 / x.powi(7) } else { 0.0 });
                    v += (tq.im - if same { 0.5 * cross.im } else { 0.0 }) * 18.0 / x.powi(5);
                    k -= r * v;
                }
            }
            C64::new(pre * k, 0.0)
        }
        ForceTerm::SelfForce => {
            let mut k = ZERO;
            for p in Pol::BOTH {
                let r = rcoef(t2.t(p, 1));
                if r == 0.0 {
                    continue;
                }
                let (a, b) = (t1.t(p, 1), t1.t(p.other(), 1));
                let br =
                    (a - b) * (9.0 / x.powi(2) + i * 27.0 / x.powi(3)) - (a - b / 2.0) * 72.0 / x.powi(4) - (a - b / 8.0) * i * 144.0 / x.powi(5)
                        + a * (162.0 / x.powi(6) + i * 81.0 / x.powi(7));
                k += r * br;
            }
            k * pre
        }
    };
    Ok(ForceKernel {
        total,
        propagating: 0.0,
        evanescent: 0.0,
        l_max: 1,
        tail: 0.0,
    })
}

fn dipole_guard(cfg: &TwoBodyConfig, t: f64) -> Vec<String> {
    let (r, d) = match cfg.geometry {
        Geometry::SphereSphere { r1, r2, d } => (r1.max(r2), d),
        Geometry::SpherePlate { r, d } => (r, d),
    };
    let ratio = (r / d).max(r / thermal_wavelength(t));
    if ratio > 0.1 {
        vec![format!(
            "dipole force formula used with R/min(d, λ_T) = {ratio:.3} (valid for R ≪ d, λ_T)"
        )]
    } else {
        Vec::new()
    }
}

fn one_reflection_guard(cfg: &TwoBodyConfig) -> Vec<String> {
    let (r, d) = match cfg.geometry {
        Geometry::SphereSphere { r1, r2, d } => (r1.max(r2), d),
        Geometry::SpherePlate { r, d } => (r, d),
    };
    if r / d > 0.2 {
        vec![format!(
            "one-reflection force used at R/d = {:.3}; multiple reflections are not included",
            r / d
        )]
    } else {
        Vec::new()
    }
}

/// Force on body 2 from the sources of body 1 (interaction) or body 2 (self)
/// at temperature `t`, i.e. F_1^{(2)}(t) or F_2^{(2)}(t).
pub fn force_term(cfg: &TwoBodyConfig, term: ForceTerm, t: f64, method: Method, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<ForceResult> {
    cfg.validate()?;
    check_method(method)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Config(format!("temperature {t} K must be finite and non-negative")));
    }
    let feats = features(cfg);
    let tol = spec.rel_tol * 0.1;
    let mut out = match cfg.geometry {
        Geometry::SphereSphere { d, .. } => {
            let tau = if term == ForceTerm::SelfForce { 2.0 * d / C } else { 0.0 };
            if method == Method::Dipole {
                integrate_force(|w| ss_kernel_dipole(cfg, term, w), t, tau, &feats, method, spec)?
            } else {
                let seed = seed_lmax(cfg, t, policy);
                integrate_force(
                    |w| {
                        let (k, l, tail) = adapt_order(|l| ss_kernel_general(cfg, term, w, l), seed, policy, tol)?;
                        Ok(ForceKernel { l_max: l, tail, ..k })
                    },
                    t,
                    tau,
                    &feats,
                    method,
                    spec,
                )?
            }
        }
        Geometry::SpherePlate { .. } => {
            let seed = if method == Method::Dipole { 1 } else { seed_lmax(cfg, t, policy) };
            let pol = if method == Method::Dipole { LmaxPolicy::Fixed(1) } else { policy };
            integrate_force(
                |w| {
                    let (k, l, tail) = adapt_order(|l| sp_kernel(cfg, term, w, l, spec), seed, pol, tol)?;
                    Ok(ForceKernel { l_max: l, tail, ..k })
                },
                t,
                0.0,
                &feats,
                method,
                spec,
            )?
        }
    };
    match method {
        Method::Dipole => out.warnings.extend(dipole_guard(cfg, t)),
        _ => out.warnings.extend(one_reflection_guard(cfg)),
    }
    Ok(out)
}

/// F_1^{(2)}(T1) between two spheres at one-reflection order.
pub fn sphere_sphere_force_interaction(cfg: &TwoBodyConfig, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<ForceResult> {
    sphere_pair(cfg)?;
    force_term(cfg, ForceTerm::Interaction, cfg.t1, Method::OneReflection, policy, spec)
}

/// F_2^{(2)}(T2) between two spheres at one-reflection order.
pub fn sphere_sphere_force_self(cfg: &TwoBodyConfig, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<ForceResult> {
    sphere_pair(cfg)?;
    force_term(cfg, ForceTerm::SelfForce, cfg.t2, Method::OneReflection, policy, spec)
}

/// Closed dipole kernels for either term (temperature T1 or T2 respectively).
pub fn sphere_sphere_force_dipole(term: ForceTerm, cfg: &TwoBodyConfig, spec: &QuadratureSpec) -> Result<ForceResult> {
    sphere_pair(cfg)?;
    let t = match term {
        ForceTerm::Interaction => cfg.t1,
        ForceTerm::SelfForce => cfg.t2,
    };
    force_term(cfg, term, t, Method::Dipole, LmaxPolicy::Fixed(1), spec)
}

// ---------------------------------------------------------------- sphere–plate

fn plate_sphere(cfg: &TwoBodyConfig) -> Result<(f64, f64)> {
    match cfg.geometry {
        Geometry::SpherePlate { r, d } => Ok((r, d)),
        _ => Err(Error::Config("expected a sphere–plate configuration".into())),
    }
}

/// Per-frequency sphere–plate kernels at order `l_max` (divided by n(T, ω)).
/// Method::Dipole is selected by l_max = 1 through the same general kernel,
/// since its closed forms are evaluated separately in [`sphere_plate_force_dipole`].
fn sp_kernel(cfg: &TwoBodyConfig, term: ForceTerm, omega: f64, l_max: usize, spec: &QuadratureSpec) -> Result<ForceKernel> {
    let (r, d) = plate_sphere(cfg)?;
    let (eps_p, mu_p) = cfg.body1.response(omega)?;
    let tm = mie_t(&cfg.body2, omega, r, l_max)?;
    let k0 = omega / C;
    let big = l_max + 1;
    let tv: Vec<[C64; 2]> = (1..=big)
        .map(|l| if l <= l_max { [tm.t(Pol::M, l), tm.t(Pol::N, l)] } else { [ZERO; 2] })
        .collect();
    if tv.iter().all(|t| t[0] == ZERO && t[1] == ZERO) {
        return Ok(ForceKernel {
            total: ZERO,
            propagating: 0.0,
            evanescent: 0.0,
            l_max,
            tail: 0.0,
        });
    }
    let u_cut = spec.u_cutoff.max(big as f64 + 7.0 * (big as f64).sqrt() + 20.0);
    let inner = QuadratureSpec {
        rel_tol: spec.rel_tol * 0.1,
        u_cutoff: u_cut,
        ..*spec
    };
    let slot = ErrorSlot::default();
    // X_m = T† p_z (I + T) per m for the interaction term
    let ops: Vec<(i64, BlockLayout, DMatrix<C64>)> = if term == ForceTerm::Interaction {
        (-(big as i64)..=(big as i64))
            .map(|m| {
                let lay = BlockLayout::new(m, big);
                let t = diag_c(&lay, &tv);
                let ta = t.adjoint();
                let n = lay.dim();
                let x = &ta * pz_block(m, omega, big) * (DMatrix::<C64>::identity(n, n) + &t);
                (m, lay, x)
            })
            .collect()
    } else {
        Vec::new()
    };
    let res = integrate_kperp_vec(
        |ks| {
            let kp = ks.k_perp();
            let dm = match ConversionD::for_sector(if term == ForceTerm::Interaction { big } else { l_max }, ks, omega) {
                Ok(v) => v,
                Err(e) => {
                    slot.record(e);
                    return vec![0.0];
                }
            };
            let (rm, rn) = fresnel_kz(eps_p, mu_p, ks.k_z(), omega);
            let rr = [rm, rn];
            let v = match term {
                ForceTerm::Interaction => {
                    let plate = match ks {
                        KSector::Propagating { .. } => [0.5 * (1.0 - rm.norm_sqr()), 0.5 * (1.0 - rn.norm_sqr())],
                        KSector::Evanescent { kappa, .. } => {
                            let e = (-2.0 * kappa * d).exp();
                            [rm.im * e, rn.im * e]
                        }
                    };
                    let mut s = 0.0;
                    for (m, lay, x) in &ops {
                        for p in Pol::BOTH {
                            if plate[p.index()] == 0.0 {
                                continue;
                            }
                            let col = nalgebra::DVector::from_fn(lay.dim(), |i, _| {
                                let (q, l) = lay.entry(i);
                                dm.get(l, *m, q, p)
                            });
                            s += plate[p.index()] * (col.adjoint() * x * &col)[(0, 0)].im;
                        }
                    }
                    // (2ħ/π) ½ (c/ω)² Im Tr{X D Π D†}
                    2.0 * HBAR / PI * 0.5 * s / (k0 * k0)
                }
                ForceTerm::SelfForce => {
                    let (kz_abs, phase, prop) = match ks {
                        KSector::Propagating { k_z, .. } => (k_z, C64::new(0.0, 2.0 * k_z * d).exp(), true),
                        KSector::Evanescent { kappa, .. } => (kappa, C64::new((-2.0 * kappa * d).exp(), 0.0), false),
                    };
                    let mut s = 0.0;
                    for l in 1..=l_max {
                        for p in Pol::BOTH {
                            let rc = rcoef(tv[l - 1][p.index()]);
                            if rc == 0.0 {
                                continue;
                            }
                            for m in -(l as i64)..=(l as i64) {
                                for q in Pol::BOTH {
                                    let g = if prop {
                                        let par = if (m + l as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                                        par * if p == q { -1.0 } else { 1.0 }
                                    } else {
                                        1.0
                                    };
                                    s += rc * (g * rr[q.index()] * phase).re * dm.get(l, m, p, q).norm_sqr();
                                }
                            }
                        }
                    }
                    -HBAR / (C * PI) * omega * s * kz_abs / k0.powi(3)
                }
            };
            if !v.is_finite() {
                slot.record(Error::Saturation { l: big, abs_z: kp / k0 });
                return vec![0.0];
            }
            vec![v]
        },
        1,
        omega,
        Some(d),
        &inner,
    );
    slot.check()?;
    let (pr, ev) = (res.propagating[0], res.evanescent[0]);
    Ok(ForceKernel {
        total: C64::new(pr + ev, 0.0),
        propagating: pr,
        evanescent: ev,
        l_max,
        tail: 0.0,
    })
}

/// F_p^{(s)}(T_p): force on the sphere from plate sources, with its split.
pub fn sphere_plate_force_interaction(cfg: &TwoBodyConfig, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<ForceResult> {
    plate_sphere(cfg)?;
    force_term(cfg, ForceTerm::Interaction, cfg.t1, Method::OneReflection, policy, spec)
}

/// F_s^{(s)}(T_s): force on the sphere from its own radiation reflected by the plate.
pub fn sphere_plate_force_self(cfg: &TwoBodyConfig, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<ForceResult> {
    plate_sphere(cfg)?;
    force_term(cfg, ForceTerm::SelfForce, cfg.t2, Method::OneReflection, policy, spec)
}

/// Closed dipole forms: (f_pr + f_ev) for the interaction and the r^P(2k²c²/ω² − 1)
/// + r^{P̄} kernel for the self term, both with full l = 1 Mie coefficients.
pub fn sphere_plate_force_dipole(term: ForceTerm, cfg: &TwoBodyConfig, spec: &QuadratureSpec) -> Result<ForceResult> {
    cfg.validate()?;
    let (r, d) = plate_sphere(cfg)?;
    let t = match term {
        ForceTerm::Interaction => cfg.t1,
        ForceTerm::SelfForce => cfg.t2,
    };
    let inner = QuadratureSpec {
        rel_tol: spec.rel_tol * 0.1,
        ..*spec
    };
    let kernel = |w: f64| -> Result<ForceKernel> {
        let (eps_p, mu_p) = cfg.body1.response(w)?;
        let tm = mie_t(&cfg.body2, w, r, 1)?;
        let ts = [tm.t(Pol::M, 1), tm.t(Pol::N, 1)];
        let k0 = w / C;
        let res = integrate_kperp_vec(
            |ks| {
                let kp = ks.k_perp();
                let (rm, rn) = fresnel_kz(eps_p, mu_p, ks.k_z(), w);
                let rr = [rm, rn];
                let mut s = 0.0;
                for p in Pol::BOTH {
                    let (a, b) = (ts[p.index()], ts[p.other().index()]);
                    let rp = rr[p.index()];
                    let rb = rr[p.other().index()];
                    match (term, ks) {
                        (ForceTerm::Interaction, KSector::Propagating { .. }) => {
                            for q in Pol::BOTH {
                                s += (1.0 - rp.norm_sqr()) * (ts[q.index()].re + if q == p { (a * b.conj()).re } else { 0.0 });
                            }
                        }
                        (ForceTerm::Interaction, KSector::Evanescent { kappa, .. }) => {
                            let e = (-2.0 * kappa * d).exp();
                            s += 2.0 * e * (rp.im * ((2.0 * kp * kp / (k0 * k0) - 1.0) * a.im - (a * b.conj()).im) + rb.im * a.im);
                        }
                        (ForceTerm::SelfForce, _) => {
                            let rc = rcoef(a);
                            let ph = match ks {
                                KSector::Propagating { k_z, .. } => C64::new(0.0, 2.0 * d * k_z).exp(),
                                KSector::Evanescent { kappa, .. } => C64::new((-2.0 * kappa * d).exp(), 0.0),
                            };
                            s += rc * (ph * (rp * (2.0 * kp * kp / (k0 * k0) - 1.0) + rb)).re;
                        }
                    }
                }
                vec![s]
            },
            1,
            w,
            Some(d),
            &inner,
        );
        // the k-integrator measures d²k/(2π)² = k dk/2π
        let (pr, ev) = (2.0 * PI * res.propagating[0], 2.0 * PI * res.evanescent[0]);
        let pre = match term {
            ForceTerm::Interaction => 1.5 * HBAR / (C * PI) * w / (k0 * k0),
            ForceTerm::SelfForce => -3.0 * HBAR * C / PI / w,
        };
        Ok(ForceKernel {
            total: C64::new(pre * (pr + ev), 0.0),
            propagating: pre * pr,
            evanescent: pre * ev,
            l_max: 1,
            tail: 0.0,
        })
    };
    let mut out = integrate_force(kernel, t, 0.0, &features(cfg), Method::Dipole, spec)?;
    out.warnings.extend(dipole_guard(cfg, t));
    Ok(out)
}

// ---------------------------------------------------------------- low temperature

/// Low-temperature sphere–sphere closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereLowT {
    /// interaction at λ_T1 ≫ λ_0, any d ≫ R
    Interaction,
    /// self term when d ≫ λ_T2
    SelfLargeD,
    /// self term when λ_T2 ≫ d
    SelfSmallT,
}

/// Low-temperature sphere–plate closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateLowT {
    Propagating,
    EvanescentFar,
    EvanescentNear,
    SelfNear,
}

fn expansion_of(m: &Material, r: f64) -> Result<InsulatorExpansion> {
    insulator_expansion(&m.eps, r)
}

fn resonance_guard(m: &Material, lt: f64, warnings: &mut Vec<String>) {
    if let Some(w0) = m.eps.lowest_resonance() {
        let l0 = 2.0 * PI * C / w0;
        if lt < 10.0 * l0 {
            warnings.push(format!("low-temperature form used at λ_T/λ_0 = {:.2} (needs λ_T ≫ λ_0)", lt / l0));
        }
    }
}

/// Sphere–sphere low-temperature forces built from the insulator expansions of
/// both spheres. Returns the force and guard warnings.
pub fn sphere_sphere_force_lowt(term: SphereLowT, cfg: &TwoBodyConfig) -> Result<(f64, Vec<String>)> {
    cfg.validate()?;
    let (r1, r2, d) = sphere_pair(cfg)?;
    let e1 = expansion_of(&cfg.body1, r1)?;
    let e2 = expansion_of(&cfg.body2, r2)?;
    let mut w = Vec::new();
    if d < 10.0 * r1.max(r2) {
        w.push(format!("low-temperature form used at d/R = {:.2} (needs d ≫ R)", d / r1.max(r2)));
    }
    let hc = HBAR * C;
    let f = match term {
        SphereLowT::Interaction => {
            let lt = thermal_wavelength(cfg.t1);
            resonance_guard(&cfg.body1, lt, &mut w);
            resonance_guard(&cfg.body2, lt, &mut w);
            if !lt.is_finite() {
                return Ok((0.0, w));
            }
            let pi = PI;
            hc / (3.0 * d * d) * e1.lambda_in * e1.alpha_i0 / lt.powi(7)
                * (-32.0 * pi.powi(7) * e2.lambda_in * e2.alpha_i0 / (5.0 * lt)
                    + e2.alpha0
                        * (32.0 * pi.powi(5) * lt / (21.0 * d)
                            + 8.0 * pi.powi(3) * lt.powi(3) / (5.0 * d.powi(3))
                            + 18.0 * pi * lt.powi(5) / d.powi(5)))
        }
        SphereLowT::SelfLargeD => {
            let lt = thermal_wavelength(cfg.t2);
            resonance_guard(&cfg.body2, lt, &mut w);
            if d < 10.0 * lt {
                w.push(format!("large-d self form used at d/λ_T = {:.2}", d / lt));
            }
            60.0 * hc / (PI * d.powi(9)) * e2.lambda_in * e2.alpha_i0 * e1.alpha0
        }
        SphereLowT::SelfSmallT => {
            let lt = thermal_wavelength(cfg.t2);
            resonance_guard(&cfg.body2, lt, &mut w);
            if lt < 10.0 * d {
                w.push(format!("small-T self form used at λ_T/d = {:.2}", lt / d));
            }
            if !lt.is_finite() {
                return Ok((0.0, w));
            }
            6.0 * PI * hc / (d.powi(7) * lt * lt) * e2.lambda_in * e2.alpha_i0 * e1.alpha0
        }
    };
    Ok((f, w))
}

/// (c/ω)² ∫_0^{ω/c} k dk Σ_P (1 − |r^P|²) for a static real ε (ω-independent).
pub fn plate_propagating_factor(eps0: f64) -> f64 {
    let e = C64::new(eps0, 0.0);
    let spec = QuadratureSpec::with_tol(1e-12);
    // s = k/k0; the Fresnel coefficients only depend on s
    let (v, _, _) = integrate(
        |s| {
            let (rm, rn) = fresnel_raw(e, C64::new(1.0, 0.0), s, 1.0 * C);
            s * (2.0 - rm.norm_sqr() - rn.norm_sqr())
        },
        0.0,
        1.0,
        &spec,
    );
    v
}

/// Sphere–plate low-temperature forces (plate = body 1, sphere = body 2).
pub fn sphere_plate_force_lowt(part: PlateLowT, cfg: &TwoBodyConfig) -> Result<(f64, Vec<String>)> {
    cfg.validate()?;
    let (r, d) = plate_sphere(cfg)?;
    let ep = expansion_of(&cfg.body1, r)?;
    let es = expansion_of(&cfg.body2, r)?;
    let mut w = Vec::new();
    if d < 10.0 * r {
        w.push(format!("low-temperature form used at d/R = {:.2} (needs d ≫ R)", d / r));
    }
    let hc = HBAR * C;
    let source = match part {
        PlateLowT::SelfNear => cfg.t2,
        _ => cfg.t1,
    };
    let lt = thermal_wavelength(source);
    resonance_guard(&cfg.body1, lt, &mut w);
    resonance_guard(&cfg.body2, lt, &mut w);
    if !lt.is_finite() {
        return Ok((0.0, w));
    }
    let f = match part {
        PlateLowT::Propagating => -8.0 * PI.powi(5) / 63.0 * hc / lt.powi(6) * plate_propagating_factor(ep.eps0) * es.lambda_in * es.alpha_i0,
        PlateLowT::EvanescentFar => {
            if d < 10.0 * lt {
                w.push(format!("far evanescent form used at d/λ_T = {:.2}", d / lt));
            }
            PI / 6.0 * hc / (lt * lt * d.powi(3)) * (1.0 + ep.eps0) / (ep.eps0 - 1.0).sqrt() * es.alpha0
        }
        PlateLowT::EvanescentNear => {
            if lt < 10.0 * d {
                w.push(format!("near evanescent form used at λ_T/d = {:.2}", lt / d));
            }
            PI / 2.0 * hc * ep.lambda_in / (lt * lt * d.powi(4)) / (1.0 + ep.eps0).powi(2) * es.alpha0
        }
        PlateLowT::SelfNear => {
            if lt < 10.0 * d {
                w.push(format!("near self form used at λ_T/d = {:.2}", lt / d));
            }
            PI / 4.0 * hc / (lt * lt * d.powi(4)) * (ep.eps0 - 1.0) / (ep.eps0 + 1.0) * es.lambda_in * es.alpha_i0
        }
    };
    Ok((f, w))
}

// ---------------------------------------------------------------- equilibrium

/// Electric and magnetic dipole polarizabilities α(iξ) (volume units) from the
/// l = 1 Mie coefficients continued to imaginary frequency.
pub fn dipole_polarizabilities_imag(m: &Material, r: f64, xi: f64) -> Result<(f64, f64)> {
    if m.is_vacuum() {
        return Ok((0.0, 0.0));
    }
    let r3 = r.powi(3);
    let mu = m.mu.re;
    let y = xi * r / C;
    let mirror = matches!(m.eps, OpticalModel::PerfectMirror);
    if y < 1e-3 {
        let ae = if m.eps.is_conductor() {
            r3
        } else if xi == 0.0 {
            let e0 = m.eps.static_epsilon()?;
            (e0 - 1.0) / (e0 + 2.0) * r3
        } else {
            let e = m.eps.epsilon_imaginary_axis(xi)?;
            (e - 1.0) / (e + 2.0) * r3
        };
        // for conductors the magnetic response needs the skin depth, see below
        if !(mirror || (m.eps.is_conductor() && xi > 0.0)) {
            return Ok((ae, (mu - 1.0) / (mu + 2.0) * r3));
        }
        if xi == 0.0 {
            return Ok((ae, if mirror { -0.5 * r3 } else { (mu - 1.0) / (mu + 2.0) * r3 }));
        }
    }
    if y > 300.0 {
        return Err(Error::Numerical(format!("imaginary-frequency Mie argument ξR/c = {y:.1} too large")));
    }
    let eps = m.eps.epsilon_imaginary_axis(xi)?;
    let x = C64::new(0.0, y);
    let n = (eps * mu).sqrt();
    let j = sph_bessel_j_all(1, x)?;
    let big_l = riccati_log_derivative_j(1, x * n);
    let e = (C64::i() * x).exp();
    let h0 = -C64::i() * e / x;
    let h1 = -e * (x + C64::i()) / (x * x);
    let psi_d = x * j[0] - j[1];
    let xi_d = x * h0 - h1;
    let chan = |w: f64| -> C64 {
        let num = w * psi_d - j[1] * big_l[1];
        let den = w * xi_d - h1 * big_l[1];
        -num / den
    };
    // T = (2/3) α (ξ/c)³ on the imaginary axis
    let s = 1.5 / y.powi(3) * r3;
    Ok((s * chan(eps).re, s * chan(mu).re))
}

/// Matsubara frequencies ξ_n with weights (½ for n = 0) as (ξ, k_B T w_n), or
/// a quadrature in ξ at T = 0 with weight ħ/2π. `cutoff` is the largest ξ kept.
fn matsubara_sum<F>(t: f64, cutoff: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if t == 0.0 {
        let slot = ErrorSlot::default();
        let edges = [0.0, cutoff * 1e-3, cutoff * 0.01, cutoff * 0.05, cutoff * 0.2, cutoff * 0.5, cutoff];
        let r = integrate_vec(
            |xi| match f(xi) {
                Ok(v) => vec![C64::new(v, 0.0)],
                Err(e) => {
                    slot.record(e);
                    vec![ZERO]
                }
            },
            &edges,
            0.0,
            1,
            &QuadratureSpec::with_tol(1e-9),
        );
        slot.check()?;
        return Ok(HBAR / (2.0 * PI) * r.value[0].re);
    }
    let step = 2.0 * PI * K_B * t / HBAR;
    let n_max = (cutoff / step).ceil() as usize + 1;
    if n_max > 2_000_000 {
        return Err(Error::Truncation(format!("Matsubara sum needs {n_max} terms at T = {t} K")));
    }
    let mut s = 0.5 * f(0.0)?;
    for n in 1..=n_max {
        s += f(n as f64 * step)?;
    }
    Ok(K_B * t * s)
}

/// ln det of the dipole round trip between two spheres on the imaginary axis,
/// with complex d for a complex-step derivative.
fn ss_dipole_logdet(a1: (f64, f64), a2: (f64, f64), kappa: f64, d: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let e = (-kappa * d).exp();
    let d3 = d * d * d;
    let gl = e * (one + kappa * d) * 2.0 / d3;
    let gt = -e * (one + kappa * d + kappa * kappa * d * d) / d3;
    let k = e * kappa * (one + kappa * d) / (d * d);
    let mut s = (one - a1.0 * a2.0 * gl * gl).ln() + (one - a1.1 * a2.1 * gl * gl).ln();
    // transverse channel (p_x, m_y): G = [[gt, ∓k], [∓k, gt]] in the two directions
    let g12 = [[gt, k], [k, gt]];
    let g21 = [[gt, -k], [-k, gt]];
    let a = |al: (f64, f64), i: usize| if i == 0 { al.0 } else { al.1 };
    let mut mm = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for q in 0..2 {
                mm[i][j] += a(a1, i) * g12[i][q] * a(a2, q) * g21[q][j];
            }
        }
    }
    let det = (one - mm[0][0]) * (one - mm[1][1]) - mm[0][1] * mm[1][0];
    s += 2.0 * det.ln();
    s
}

/// Equilibrium force at temperature `t_env` at dipole order, from the free
/// energy as a Matsubara sum over imaginary frequencies (T = 0: frequency
/// integral). Positive = attractive.
pub fn equilibrium_force(cfg: &TwoBodyConfig, t_env: f64, spec: &QuadratureSpec) -> Result<(f64, Vec<String>)> {
    cfg.validate()?;
    let _ = spec;
    let mut warnings = Vec::new();
    match cfg.geometry {
        Geometry::SphereSphere { r1, r2, d } => {
            if (r1 + r2) / d > 0.2 {
                warnings.push(format!("dipole-order equilibrium force at (R1+R2)/d = {:.3}", (r1 + r2) / d));
            }
            let gap = d - r1 - r2;
            let cutoff = 40.0 * C / gap.min(d);
            let h = 1e-20 * d;
            let f = matsubara_sum(t_env, cutoff, |xi| {
                let a1 = dipole_polarizabilities_imag(&cfg.body1, r1, xi)?;
                let a2 = dipole_polarizabilities_imag(&cfg.body2, r2, xi)?;
                let kappa = xi / C;
                // ∂_d ln det by a complex step; ∂_d 𝓕 > 0 means attraction
                Ok(ss_dipole_logdet(a1, a2, kappa, C64::new(d, h)).im / h)
            })?;
            Ok((f, warnings))
        }
        Geometry::SpherePlate { r, d } => {
            if r / d > 0.2 {
                warnings.push(format!(
                    "dipole-order sphere–plate equilibrium force at R/d = {:.3} (beyond scope)",
                    r / d
                ));
            }
            let plate = &cfg.body1;
            let mu_p = plate.mu.re;
            let mirror = matches!(plate.eps, OpticalModel::PerfectMirror);
            let cutoff = 40.0 * C / (d - r);
            let f = matsubara_sum(t_env, cutoff, |xi| {
                let (ae, am) = dipole_polarizabilities_imag(&cfg.body2, r, xi)?;
                if ae == 0.0 && am == 0.0 || plate.is_vacuum() {
                    return Ok(0.0);
                }
                let kappa = xi / C;
                let eps = if xi == 0.0 {
                    if plate.eps.is_conductor() {
                        f64::INFINITY
                    } else {
                        plate.eps.static_epsilon()?
                    }
                } else {
                    plate.eps.epsilon_imaginary_axis(xi)?
                };
                let refl = |q: f64| -> (f64, f64) {
                    if xi == 0.0 {
                        let tm = if eps.is_infinite() { 1.0 } else { (eps - 1.0) / (eps + 1.0) };
                        let te = if mirror { -1.0 } else { (mu_p - 1.0) / (mu_p + 1.0) };
                        return (tm, te);
                    }
                    let qe = (q * q + (eps * mu_p - 1.0) * kappa * kappa).sqrt();
                    ((eps * q - qe) / (eps * q + qe), (mu_p * q - qe) / (mu_p * q + qe))
                };
                // 2 ∫_κ^∞ dq q e^{−2qd} [α_E(−κ² r_TE + (2q² − κ²) r_TM) + α_M(TE ↔ TM)]
                let qmax = kappa + 40.0 / d;
                let (v, _, _) = integrate(
                    |q| {
                        let (tm, te) = refl(q);
                        let w = 2.0 * q * (-2.0 * q * d).exp();
                        w * (ae * (-kappa * kappa * te + (2.0 * q * q - kappa * kappa) * tm)
                            + am * (-kappa * kappa * tm + (2.0 * q * q - kappa * kappa) * te))
                    },
                    kappa,
                    qmax,
                    &QuadratureSpec::with_tol(1e-10),
                );
                Ok(v)
            })?;
            Ok((f, warnings))
        }
    }
}

// ---------------------------------------------------------------- assembly

/// Components of the total force on body 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceBreakdown {
    pub equilibrium: f64,
    /// F_1^{(2)}(T1) − F_1^{(2)}(T_env)
    pub interaction_from_other: f64,
    /// F_2^{(2)}(T2) − F_2^{(2)}(T_env)
    pub self_force: f64,
    pub total: f64,
    /// spectra of the four non-equilibrium evaluations, labelled
    pub spectra: Vec<(String, Vec<(f64, f64)>)>,
    pub warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn term_difference(
    cfg: &TwoBodyConfig,
    term: ForceTerm,
    t: f64,
    method: Method,
    policy: LmaxPolicy,
    spec: &QuadratureSpec,
    label: &str,
    out: &mut ForceBreakdown,
) -> Result<f64> {
    if t == cfg.t_env {
        return Ok(0.0);
    }
    let eval = |tt: f64, tag: &str| -> Result<ForceResult> {
        let r = match (cfg.geometry, method) {
            (Geometry::SpherePlate { .. }, Method::Dipole) => {
                let c = match term {
                    ForceTerm::Interaction => cfg.with_temperatures(tt, cfg.t2, cfg.t_env),
                    ForceTerm::SelfForce => cfg.with_temperatures(cfg.t1, tt, cfg.t_env),
                };
                sphere_plate_force_dipole(term, &c, spec)
            }
            _ => force_term(cfg, term, tt, method, policy, spec),
        };
        r.map_err(|e| e.labeled(format!("{label}({tag})")))
    };
    let hot = eval(t, "T")?;
    let env = eval(cfg.t_env, "T_env")?;
    for (tag, r) in [("T", &hot), ("T_env", &env)] {
        out.spectra.push((format!("{label}({tag})"), r.spectrum.clone()));
        out.warnings.extend(r.warnings.iter().map(|w| format!("{label}({tag}): {w}")));
    }
    Ok(hot.force - env.force)
}

/// Total force on body 2: F_eq(T_env) + Σ_α [F_α(T_α) − F_α(T_env)].
pub fn total_force(cfg: &TwoBodyConfig, method: Method, policy: LmaxPolicy, spec: &QuadratureSpec) -> Result<ForceBreakdown> {
    cfg.validate()?;
    check_method(method)?;
    let mut out = ForceBreakdown {
        equilibrium: 0.0,
        interaction_from_other: 0.0,
        self_force: 0.0,
        total: 0.0,
        spectra: Vec::new(),
        warnings: Vec::new(),
    };
    let (feq, w) = equilibrium_force(cfg, cfg.t_env, spec).map_err(|e| e.labeled("equilibrium"))?;
    out.equilibrium = feq;
    out.warnings.extend(w);
    out.interaction_from_other = term_difference(cfg, ForceTerm::Interaction, cfg.t1, method, policy, spec, "interaction", &mut out)?;
    out.self_force = term_difference(cfg, ForceTerm::SelfForce, cfg.t2, method, policy, spec, "self", &mut out)?;
    out.total = out.equilibrium + out.interaction_from_other + out.self_force;
    Ok(out)
}
