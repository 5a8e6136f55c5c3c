//! Integration engines: adaptive Gauss-Legendre panels with Filon weights for
//! oscillatory factors, Bose-substituted frequency integrals, split k_perp
//! integrals, and truncation-order policy.
//!
//! Panels are refined level by level. Node evaluations of one level may run in
//! parallel, but every reduction runs in panel order, so results do not depend on
//! the worker count.

use crate::constants::{C, HBAR, K_B};
use crate::special::sph_bessel_j_all;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

const NODES: usize = 20;

struct Rule {
    t: [f64; NODES],
    w: [f64; NODES],
    /// leg[k][j] = (2k+1)/2 w_j P_k(t_j): discrete Legendre transform
    leg: Vec<[f64; NODES]>,
}

fn legendre_p(n: usize, x: f64) -> (f64, f64) {
    // returns (P_n(x), P_{n-1}(x))
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, pm1) = legendre_p(n, x);
            let dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm1) = legendre_p(n, x);
        let _ = p;
        let dp = n as f64 * (x * legendre_p(n, x).0 - pm1) / (x * x - 1.0);
        t[n - 1 - i] = x;
        w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (t, w)
}

fn rule() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| {
        let (tv, wv) = gauss_legendre(NODES);
        let mut t = [0.0; NODES];
        let mut w = [0.0; NODES];
        t.copy_from_slice(&tv);
        w.copy_from_slice(&wv);
        let mut leg = vec![[0.0; NODES]; NODES];
        for (k, row) in leg.iter_mut().enumerate() {
            for j in 0..NODES {
                row[j] = (2 * k + 1) as f64 / 2.0 * w[j] * legendre_p(k, t[j]).0;
            }
        }
        Rule { t, w, leg }
    })
}

/// Tolerances and limits for the adaptive engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// maximum bisection depth below the initial partition
    pub max_level: usize,
    /// Bose-substituted window x = ħω/k_BT
    pub x_lo: f64,
    pub x_hi: f64,
    /// upper cutoff in u = |k_z| d for evanescent integrals
    pub u_cutoff: f64,
    /// refinement stops (unconverged) once this many panels are live
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-6,
            abs_floor: 0.0,
            max_level: 30,
            x_lo: 1e-4,
            x_hi: 45.0,
            u_cutoff: 40.0,
            max_panels: 20_000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(rel_tol: f64) -> Self {
        QuadratureSpec {
            rel_tol,
            ..Default::default()
        }
    }
}

/// Integrated vector-valued result.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: Vec<Complex64>,
    pub error: Vec<f64>,
    pub converged: bool,
    pub evaluations: usize,
    /// (node, integrand) pairs of the final partition, in order
    pub samples: Vec<(f64, Vec<Complex64>)>,
}

struct Panel {
    a: f64,
    b: f64,
    level: usize,
    value: Vec<Complex64>,
    error: Vec<f64>,
    abs: Vec<f64>,
    nodes: Vec<(f64, Vec<Complex64>)>,
}

fn filon_weights(theta: f64) -> [Complex64; NODES] {
    let r = rule();
    let mut out = [Complex64::new(0.0, 0.0); NODES];
    // ∫ P_k(t) e^{iθt} dt = 2 i^k j_k(θ)
    let jk = sph_bessel_j_all(NODES - 1, Complex64::new(theta, 0.0)).expect("real argument");
    let mut ik = Complex64::new(1.0, 0.0);
    for k in 0..NODES {
        let mom = 2.0 * ik * jk[k].re;
        for j in 0..NODES {
            out[j] += r.leg[k][j] * mom;
        }
        ik *= Complex64::i();
    }
    out
}

fn eval_panel<F>(f: &F, a: f64, b: f64, level: usize, kappa: f64, dim: usize) -> Panel
where
    F: Fn(f64) -> Vec<Complex64> + Sync,
{
    let r = rule();
    let h = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let vals: Vec<Vec<Complex64>> = (0..NODES).map(|j| f(mid + h * r.t[j])).collect();
    let theta = kappa * h;
    let phase = Complex64::new(0.0, kappa * mid).exp();
    let weights: [Complex64; NODES] = if kappa * (b - a) > PI / 4.0 {
        filon_weights(theta)
    } else {
        let mut w = [Complex64::new(0.0, 0.0); NODES];
        for j in 0..NODES {
            w[j] = r.w[j] * Complex64::new(0.0, theta * r.t[j]).exp();
        }
        w
    };
    let mut value = vec![Complex64::new(0.0, 0.0); dim];
    let mut abs = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    for c in 0..dim {
        let mut s = Complex64::new(0.0, 0.0);
        let mut sa = 0.0;
        for j in 0..NODES {
            s += weights[j] * vals[j][c];
            sa += r.w[j] * vals[j][c].norm();
        }
        value[c] = s * phase * h;
        abs[c] = sa * h;
        // tail of the Legendre expansion of the envelope bounds the panel error
        let ck = |k: usize| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..NODES {
                acc += r.leg[k][j] * vals[j][c];
            }
            acc.norm()
        };
        error[c] = 2.0 * h * (ck(NODES - 1) + ck(NODES - 2)) + 4.0 * f64::EPSILON * abs[c];
    }
    let nodes = (0..NODES).map(|j| (mid + h * r.t[j], vals[j].clone())).collect();
    Panel {
        a,
        b,
        level,
        value,
        error,
        abs,
        nodes,
    }
}

/// Adaptive integration of a vector-valued complex integrand times e^{iκx} over
/// the partition given by `edges` (sorted, at least two).
pub fn integrate_vec<F>(f: F, edges: &[f64], kappa: f64, dim: usize, spec: &QuadratureSpec) -> QuadResult
where
    F: Fn(f64) -> Vec<Complex64> + Sync,
{
    let span = edges.last().unwrap() - edges[0];
    let mut done: Vec<Panel> = Vec::new();
    let mut todo: Vec<(f64, f64, usize)> = edges.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1], 0)).collect();
    let mut evaluations = 0;
    let mut converged = false;
    loop {
        let mut fresh: Vec<Panel> = todo.par_iter().map(|&(a, b, level)| eval_panel(&f, a, b, level, kappa, dim)).collect();
        evaluations += fresh.len() * NODES;
        done.append(&mut fresh);
        done.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap());
        // totals in panel order
        let mut total = vec![Complex64::new(0.0, 0.0); dim];
        let mut err = vec![0.0; dim];
        let mut absv = vec![0.0; dim];
        for p in &done {
            for c in 0..dim {
                total[c] += p.value[c];
                err[c] += p.error[c];
                absv[c] += p.abs[c];
            }
        }
        let tol: Vec<f64> = (0..dim)
            .map(|c| (spec.rel_tol * total[c].norm()).max(spec.abs_floor).max(1e-15 * absv[c]))
            .collect();
        if (0..dim).all(|c| err[c] <= tol[c]) {
            converged = true;
        }
        todo.clear();
        if !converged && done.len() < spec.max_panels {
            let mut keep = Vec::with_capacity(done.len());
            for p in done.drain(..) {
                let share = (p.b - p.a) / span;
                let bad = (0..dim).any(|c| p.error[c] > 0.5 * tol[c] * share.max(1e-3) && p.error[c] > 0.0);
                let worst = (0..dim).any(|c| p.error[c] > 0.05 * err[c] && err[c] > tol[c]);
                if (bad || worst) && p.level < spec.max_level {
                    let m = 0.5 * (p.a + p.b);
                    todo.push((p.a, m, p.level + 1));
                    todo.push((m, p.b, p.level + 1));
                } else {
                    keep.push(p);
                }
            }
            done = keep;
        }
        if todo.is_empty() {
            let mut samples = Vec::with_capacity(done.len() * NODES);
            for p in &done {
                samples.extend(p.nodes.iter().cloned());
            }
            return QuadResult {
                value: total,
                error: err,
                converged,
                evaluations,
                samples,
            };
        }
    }
}

/// Scalar real integral ∫_a^b f.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> (f64, f64, bool)
where
    F: Fn(f64) -> f64 + Sync,
{
    let r = integrate_vec(|x| vec![Complex64::new(f(x), 0.0)], &[a, b], 0.0, 1, spec);
    (r.value[0].re, r.error[0], r.converged)
}

/// ∫_a^b g(x) e^{iκx} dx with Filon panels wherever κ·width > π/4.
pub fn integrate_oscillatory<F>(g: F, kappa: f64, a: f64, b: f64, spec: &QuadratureSpec) -> (Complex64, f64, bool)
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let r = integrate_vec(|x| vec![g(x)], &[a, b], kappa, 1, spec);
    (r.value[0], r.error[0], r.converged)
}

/// Sharp spectral feature (centre, width) in rad/s used to grade the initial
/// frequency partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub omega: f64,
    pub width: f64,
}

/// Result of a frequency integral.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub converged: bool,
    /// (ω, integrand per component), ordered in ω
    pub spectrum: Vec<(f64, Vec<f64>)>,
}

/// Frequency scale k_B T / ħ of the Bose substitution.
pub fn omega_scale(t: f64) -> f64 {
    K_B * t / HBAR
}

fn spectral_edges(t_ref: f64, features: &[Feature], spec: &QuadratureSpec) -> Vec<f64> {
    let s = omega_scale(t_ref);
    let mut xs: Vec<f64> = [0.1, 0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 8.0, 10.5, 14.0, 18.0, 23.0, 30.0, 37.0]
        .iter()
        .copied()
        .filter(|x| *x > spec.x_lo && *x < spec.x_hi)
        .collect();
    xs.push(spec.x_lo);
    xs.push(spec.x_hi);
    for f in features {
        let xc = f.omega / s;
        let xw = f.width / s;
        if !(xc > spec.x_lo && xc < spec.x_hi) || !(xw > 0.0) {
            continue;
        }
        xs.push(xc);
        let mut k = 0.5;
        while k * xw < xc {
            for x in [xc - k * xw, xc + k * xw] {
                if x > spec.x_lo && x < spec.x_hi {
                    xs.push(x);
                }
            }
            k *= 3.0;
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    xs
}

/// ∫_0^∞ dω f(ω) for integrands carrying Bose weights at temperatures up to
/// `t_ref`, integrated in x = ħω/k_B t_ref over the spec window. Vector valued.
pub fn integrate_spectrum_vec<F>(f: F, dim: usize, t_ref: f64, features: &[Feature], spec: &QuadratureSpec) -> SpectralResult
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    integrate_spectrum_oscillatory_vec(
        |w| f(w).into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        0.0,
        dim,
        t_ref,
        features,
        spec,
        false,
    )
}

/// ∫ dω g(ω) e^{iτω}; returns real parts when `keep_complex` is false.
pub fn integrate_spectrum_oscillatory_vec<F>(
    g: F,
    tau: f64,
    dim: usize,
    t_ref: f64,
    features: &[Feature],
    spec: &QuadratureSpec,
    keep_complex: bool,
) -> SpectralResult
where
    F: Fn(f64) -> Vec<Complex64> + Sync,
{
    let s = omega_scale(t_ref);
    let edges = spectral_edges(t_ref, features, spec);
    let r = integrate_vec(|x| g(x * s).into_iter().map(|v| v * s).collect(), &edges, tau * s, dim, spec);
    let value = if keep_complex {
        r.value.iter().flat_map(|v| [v.re, v.im]).collect()
    } else {
        r.value.iter().map(|v| v.re).collect()
    };
    let spectrum = r
        .samples
        .into_iter()
        .map(|(x, v)| {
            let ph = Complex64::new(0.0, tau * x * s).exp();
            (x * s, v.iter().map(|c| (c * ph / s).re).collect())
        })
        .collect();
    SpectralResult {
        value,
        error: r.error,
        converged: r.converged,
        spectrum,
    }
}

/// Scalar convenience wrapper of [`integrate_spectrum_vec`].
pub fn integrate_spectrum<F>(f: F, t_ref: f64, features: &[Feature], spec: &QuadratureSpec) -> (f64, f64, bool)
where
    F: Fn(f64) -> f64 + Sync,
{
    let r = integrate_spectrum_vec(|w| vec![f(w)], 1, t_ref, features, spec);
    (r.value[0], r.error[0], r.converged)
}

/// Propagating/evanescent split of ∫ d²k_⊥/(2π)² f(k_⊥).
#[derive(Debug, Clone, PartialEq)]
pub struct KperpResult {
    pub propagating: Vec<f64>,
    pub evanescent: Vec<f64>,
    pub error: f64,
    pub converged: bool,
}

/// Sector of a k_⊥ node: propagating nodes carry k_z real, evanescent ones |k_z|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSector {
    Propagating { k_perp: f64, k_z: f64 },
    Evanescent { k_perp: f64, kappa: f64 },
}

impl KSector {
    pub fn k_perp(&self) -> f64 {
        match *self {
            KSector::Propagating { k_perp, .. } | KSector::Evanescent { k_perp, .. } => k_perp,
        }
    }

    /// Vacuum k_z: real on the disc, iκ outside.
    pub fn k_z(&self) -> Complex64 {
        match *self {
            KSector::Propagating { k_z, .. } => Complex64::new(k_z, 0.0),
            KSector::Evanescent { kappa, .. } => Complex64::new(0.0, kappa),
        }
    }
}

/// ∫ d²k_⊥/(2π)² f over the propagating disc (in k_z) and, when `d` is given,
/// the evanescent exterior (in u = |k_z| d up to the spec cutoff). `f` is vector
/// valued with `dim` components.
pub fn integrate_kperp_vec<F>(f: F, dim: usize, omega: f64, d: Option<f64>, spec: &QuadratureSpec) -> KperpResult
where
    F: Fn(KSector) -> Vec<f64> + Sync,
{
    let k0 = omega / C;
    // k_⊥ dk_⊥ = k_z dk_z on the propagating disc
    let pr = integrate_vec(
        |kz| {
            let kp = (k0 * k0 - kz * kz).max(0.0).sqrt();
            f(KSector::Propagating { k_perp: kp, k_z: kz })
                .into_iter()
                .map(|v| Complex64::new(v * kz / (2.0 * PI), 0.0))
                .collect()
        },
        &[0.0, 0.5 * k0, k0],
        0.0,
        dim,
        spec,
    );
    let mut error = pr.error.iter().sum::<f64>();
    let mut converged = pr.converged;
    let evanescent = match d {
        Some(d) => {
            let edges: Vec<f64> = [0.0, 0.25, 1.0, 2.5, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0]
                .iter()
                .copied()
                .filter(|u| *u < spec.u_cutoff)
                .chain(std::iter::once(spec.u_cutoff))
                .collect();
            let ev = integrate_vec(
                |u| {
                    let kappa = u / d;
                    let kp = (k0 * k0 + kappa * kappa).sqrt();
                    f(KSector::Evanescent { k_perp: kp, kappa })
                        .into_iter()
                        .map(|v| Complex64::new(v * kappa / (2.0 * PI * d), 0.0))
                        .collect()
                },
                &edges,
                0.0,
                dim,
                spec,
            );
            error += ev.error.iter().sum::<f64>();
            converged &= ev.converged;
            ev.value.iter().map(|v| v.re).collect()
        }
        None => vec![0.0; dim],
    };
    KperpResult {
        propagating: pr.value.iter().map(|v| v.re).collect(),
        evanescent,
        error,
        converged,
    }
}

/// Scalar wrapper of [`integrate_kperp_vec`]: (propagating, evanescent, error).
pub fn integrate_kperp<F>(f: F, omega: f64, d: Option<f64>, spec: &QuadratureSpec) -> (f64, f64, f64)
where
    F: Fn(KSector) -> f64 + Sync,
{
    let r = integrate_kperp_vec(|k| vec![f(k)], 1, omega, d, spec);
    (r.propagating[0], r.evanescent[0], r.error)
}

/// Truncation-order policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LmaxPolicy {
    Fixed(usize),
    Auto { floor: usize, c_sep: f64, c_thermal: f64 },
}

impl Default for LmaxPolicy {
    fn default() -> Self {
        LmaxPolicy::Auto {
            floor: 8,
            c_sep: 5.0,
            c_thermal: 5.0,
        }
    }
}

/// Seed truncation order max(floor, ⌈c1 R/d_s⌉, ⌈c2 R/λ_T⌉); callers double it
/// until their observable converges.
pub fn auto_lmax(r: f64, d_s: f64, lambda_t: f64, policy: LmaxPolicy) -> usize {
    match policy {
        LmaxPolicy::Fixed(n) => n.max(1),
        LmaxPolicy::Auto { floor, c_sep, c_thermal } => {
            let a = if d_s > 0.0 { (c_sep * r / d_s).ceil() as usize } else { floor };
            let b = if lambda_t > 0.0 && lambda_t.is_finite() {
                (c_thermal * r / lambda_t).ceil() as usize
            } else {
                0
            };
            floor.max(a).max(b)
        }
    }
}
