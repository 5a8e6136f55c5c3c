//! T-matrices and reflection coefficients: Mie coefficients of homogeneous
//! spheres, the small-sphere expansion, Fresnel and slab coefficients, the plate
//! T-matrix, and caller-supplied cylinder T-matrices.

use crate::constants::C;
use crate::error::{Error, Result};
use crate::materials::Material;
use crate::special::{riccati_log_derivative_j, sph_hankel_h1_all};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Polarization: magnetic (M, TE) or electric (N, TM) multipoles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pol {
    M,
    N,
}

impl Pol {
    pub const BOTH: [Pol; 2] = [Pol::M, Pol::N];

    pub fn index(self) -> usize {
        match self {
            Pol::M => 0,
            Pol::N => 1,
        }
    }

    pub fn other(self) -> Pol {
        match self {
            Pol::M => Pol::N,
            Pol::N => Pol::M,
        }
    }
}

/// Root with non-negative imaginary part (outgoing / decaying branch).
pub fn sqrt_im_pos(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// Diagonal sphere T-matrix, T[l-1][P] for l = 1..=l_max.
#[derive(Debug, Clone, PartialEq)]
pub struct MieTMatrix {
    pub l_max: usize,
    pub omega: f64,
    pub radius: f64,
    t: Vec<[Complex64; 2]>,
    /// channels whose radial functions overflowed; their elements are set to 0
    pub saturated: Vec<(usize, Pol)>,
}

impl MieTMatrix {
    /// T_l^P; saturated channels report an error.
    pub fn get(&self, p: Pol, l: usize) -> Result<Complex64> {
        if self.saturated.contains(&(l, p)) {
            return Err(Error::Saturation {
                l,
                abs_z: self.radius * self.omega / C,
            });
        }
        Ok(self.t[l - 1][p.index()])
    }

    /// T_l^P with saturated channels read as zero (their true magnitude is below
    /// double precision).
    pub fn t(&self, p: Pol, l: usize) -> Complex64 {
        self.t[l - 1][p.index()]
    }

    /// −(Re T + |T|²), the absorptive part of a channel.
    pub fn absorption(&self, p: Pol, l: usize) -> f64 {
        let t = self.t(p, l);
        -(t.re + t.norm_sqr())
    }

    pub fn size_parameter(&self) -> f64 {
        self.radius * self.omega / C
    }
}

/// Mie coefficients in log-derivative form:
/// T^M = −[μ ψ'(x) − j(x) L(ñx)] / [μ ξ'(x) − h(x) L(ñx)], with ψ = x j_l, ξ = x h_l,
/// L = (z j_l)'/j_l and ñ = √(εμ); T^N swaps ε and μ.
pub fn mie_t_raw(eps: Complex64, mu: Complex64, omega: f64, radius: f64, l_max: usize) -> Result<MieTMatrix> {
    if !(omega > 0.0) || !(radius > 0.0) || l_max == 0 {
        return Err(Error::Config(format!(
            "mie_t needs omega > 0, R > 0, l_max ≥ 1 (got {omega}, {radius}, {l_max})"
        )));
    }
    let x = radius * omega / C;
    let n = sqrt_im_pos(eps * mu);
    let mut t = vec![[Complex64::new(0.0, 0.0); 2]; l_max];
    let mut saturated = Vec::new();
    if eps == Complex64::new(1.0, 0.0) && mu == Complex64::new(1.0, 0.0) {
        return Ok(MieTMatrix {
            l_max,
            omega,
            radius,
            t,
            saturated,
        });
    }
    let xc = Complex64::new(x, 0.0);
    let jx = crate::special::sph_bessel_j_all(l_max, xc)?;
    let h = sph_hankel_h1_all(l_max, x)?;
    let big_l = riccati_log_derivative_j(l_max, n * x);
    for l in 1..=l_max {
        let psi_d = x * jx[l - 1] - l as f64 * jx[l];
        let xi_d = x * h[l - 1] - l as f64 * h[l];
        for p in Pol::BOTH {
            let w = match p {
                Pol::M => mu,
                Pol::N => eps,
            };
            let num = w * psi_d - jx[l] * big_l[l];
            let den = w * xi_d - h[l] * big_l[l];
            let v = -num / den;
            if !den.is_finite() || !v.is_finite() {
                saturated.push((l, p));
            } else {
                t[l - 1][p.index()] = v;
            }
        }
    }
    Ok(MieTMatrix {
        l_max,
        omega,
        radius,
        t,
        saturated,
    })
}

/// Mie T-matrix of a homogeneous sphere of `material` (ε and μ) in vacuum.
pub fn mie_t(material: &Material, omega: f64, radius: f64, l_max: usize) -> Result<MieTMatrix> {
    let (eps, mu) = material.response(omega)?;
    mie_t_raw(eps, mu, omega, radius, l_max)
}

/// Dipole-order T-matrix elements from the small-sphere expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallSphereT {
    pub t1_n: Complex64,
    pub t1_m: Complex64,
    /// set when |√(εμ)| Rω/c ≥ 0.3
    pub validity_warning: Option<String>,
}

fn small_sphere_channel(eps: Complex64, mu: Complex64, x: f64) -> Complex64 {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let d = eps + 2.0;
    i * 2.0 * (eps - one) / (3.0 * d) * x.powi(3) + 2.0 * i * (2.0 - 3.0 * eps + 0.5 * eps * eps * (one + mu)) / (5.0 * d * d) * x.powi(5)
        - 4.0 * (eps - one) * (eps - one) / (9.0 * d * d) * x.powi(6)
}

/// Three-term small-sphere expansion of T_1^N (T_1^M by ε ↔ μ). The R*⁵ term
/// carries ε²(1+μ)/2, which makes the expansion vanish for ε = μ = 1 and matches
/// the full Mie coefficient to O(R*⁷).
pub fn small_sphere_t_raw(eps: Complex64, mu: Complex64, omega: f64, radius: f64) -> SmallSphereT {
    let x = radius * omega / C;
    let guard = (eps * mu).sqrt().norm() * x;
    let validity_warning = (guard >= 0.3).then(|| format!("small-sphere expansion used at |n|Rω/c = {guard:.3} (valid below 0.3)"));
    SmallSphereT {
        t1_n: small_sphere_channel(eps, mu, x),
        t1_m: small_sphere_channel(mu, eps, x),
        validity_warning,
    }
}

pub fn small_sphere_t(material: &Material, omega: f64, radius: f64) -> Result<SmallSphereT> {
    let (eps, mu) = material.response(omega)?;
    Ok(small_sphere_t_raw(eps, mu, omega, radius))
}

/// Static dipole polarizability ((ε−1)/(ε+2)) R³.
pub fn polarizability(eps: Complex64, radius: f64) -> Complex64 {
    (eps - 1.0) / (eps + 2.0) * radius.powi(3)
}

/// Fresnel reflection coefficients (r^M, r^N) of a half-space.
pub fn fresnel_raw(eps: Complex64, mu: Complex64, k_perp: f64, omega: f64) -> (Complex64, Complex64) {
    let k0 = omega / C;
    fresnel_kz(eps, mu, sqrt_im_pos(Complex64::new(k0 * k0 - k_perp * k_perp, 0.0)), omega)
}

/// Fresnel coefficients from the vacuum k_z (real, or iκ for evanescent waves),
/// which stays accurate close to grazing where k_⊥ alone loses κ.
pub fn fresnel_kz(eps: Complex64, mu: Complex64, kz: Complex64, omega: f64) -> (Complex64, Complex64) {
    let k0 = omega / C;
    let q = sqrt_im_pos((eps * mu - 1.0) * k0 * k0 + kz * kz);
    let r = |w: Complex64| (w * kz - q) / (w * kz + q);
    (r(mu), r(eps))
}

pub fn fresnel_r(material: &Material, k_perp: f64, omega: f64) -> Result<(Complex64, Complex64)> {
    let (eps, mu) = material.response(omega)?;
    Ok(fresnel_raw(eps, mu, k_perp, omega))
}

/// Reflection and transmission of a free-standing slab for one polarization.
/// r is referenced to the illuminated face; t is referenced to free propagation
/// across the slab, so a vacuum slab has t = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabCoefficients {
    pub r_r: [Complex64; 2],
    pub t_r: [Complex64; 2],
    pub r_l: [Complex64; 2],
    pub t_l: [Complex64; 2],
    pub thickness: f64,
}

impl SlabCoefficients {
    /// Opaque half-space: Fresnel reflection, no transmission.
    pub fn half_space(r: (Complex64, Complex64)) -> Self {
        let z = Complex64::new(0.0, 0.0);
        SlabCoefficients {
            r_r: [r.0, r.1],
            t_r: [z, z],
            r_l: [r.0, r.1],
            t_l: [z, z],
            thickness: f64::INFINITY,
        }
    }
}

/// Two-interface Airy summation for a homogeneous slab in vacuum.
pub fn slab_raw(eps: Complex64, mu: Complex64, thickness: f64, k_perp: f64, omega: f64) -> SlabCoefficients {
    if thickness.is_infinite() {
        return SlabCoefficients::half_space(fresnel_raw(eps, mu, k_perp, omega));
    }
    let k0 = omega / C;
    let kz = sqrt_im_pos(Complex64::new(k0 * k0 - k_perp * k_perp, 0.0));
    let q = sqrt_im_pos(eps * mu * k0 * k0 - k_perp * k_perp);
    let (r_m, r_n) = fresnel_raw(eps, mu, k_perp, omega);
    let i = Complex64::i();
    let e2 = (2.0 * i * q * thickness).exp();
    let shift = (i * (q - kz) * thickness).exp();
    let one = Complex64::new(1.0, 0.0);
    let mut r = [Complex64::new(0.0, 0.0); 2];
    let mut t = [Complex64::new(0.0, 0.0); 2];
    for (k, r01) in [r_m, r_n].into_iter().enumerate() {
        let den = one - r01 * r01 * e2;
        r[k] = r01 * (one - e2) / den;
        t[k] = (one - r01 * r01) * shift / den;
    }
    // symmetric slab: both faces see the same coefficients
    SlabCoefficients {
        r_r: r,
        t_r: t,
        r_l: r,
        t_l: t,
        thickness,
    }
}

pub fn slab_coefficients(material: &Material, thickness: f64, k_perp: f64, omega: f64) -> Result<SlabCoefficients> {
    if !(thickness > 0.0) {
        return Err(Error::Config(format!("slab thickness must be positive, got {thickness}")));
    }
    let (eps, mu) = material.response(omega)?;
    Ok(slab_raw(eps, mu, thickness, k_perp, omega))
}

/// Plate T-matrix elements in the plane-wave basis, per polarization:
/// T̃_RR = (t_R − 1)/2, T̃_RL = r_R/2, and mirrored for the left side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateT {
    pub rr: [Complex64; 2],
    pub rl: [Complex64; 2],
    pub ll: [Complex64; 2],
    pub lr: [Complex64; 2],
}

pub fn plate_t_elements(s: &SlabCoefficients) -> PlateT {
    let f = |a: [Complex64; 2], g: &dyn Fn(Complex64) -> Complex64| [g(a[0]), g(a[1])];
    PlateT {
        rr: f(s.t_r, &|t| (t - 1.0) / 2.0),
        rl: f(s.r_r, &|r| r / 2.0),
        ll: f(s.t_l, &|t| (t - 1.0) / 2.0),
        lr: f(s.r_l, &|r| r / 2.0),
    }
}

/// One record of a cylinder T-matrix: the 2×2 polarization block at (n, k_z),
/// indexed [P'][P] with M = 0, N = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderBlock {
    pub n: i64,
    pub k_z: f64,
    pub t: [[Complex64; 2]; 2],
    /// frequency of the record; `None` for frequency-independent data
    pub omega: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CylinderRecord {
    n: i64,
    k_z: f64,
    #[serde(default)]
    omega: Option<f64>,
    #[serde(rename = "T_MM")]
    t_mm: [f64; 2],
    #[serde(rename = "T_MN")]
    t_mn: [f64; 2],
    #[serde(rename = "T_NM")]
    t_nm: [f64; 2],
    #[serde(rename = "T_NN")]
    t_nn: [f64; 2],
}

/// Caller-supplied cylinder T-matrix (diagonal in n and k_z).
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderTMatrix {
    pub blocks: Vec<CylinderBlock>,
}

impl CylinderTMatrix {
    /// Parse the plug-in JSON format: an array of
    /// {n, k_z, T_MM, T_MN, T_NM, T_NN, omega?} with complex values as [re, im].
    /// Either every record carries `omega` (rad/s) or none does.
    pub fn from_json(text: &str) -> Result<Self> {
        let recs: Vec<CylinderRecord> = serde_json::from_str(text).map_err(|e| Error::Ingestion {
            row: e.line(),
            msg: e.to_string(),
        })?;
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let blocks: Vec<CylinderBlock> = recs
            .into_iter()
            .map(|r| CylinderBlock {
                n: r.n,
                k_z: r.k_z,
                t: [[c(r.t_mm), c(r.t_mn)], [c(r.t_nm), c(r.t_nn)]],
                omega: r.omega,
            })
            .collect();
        let out = CylinderTMatrix { blocks };
        let tagged = out.blocks.iter().filter(|b| b.omega.is_some()).count();
        if tagged != 0 && tagged != out.blocks.len() {
            let row = out.blocks.iter().position(|b| b.omega.is_none()).unwrap_or(0) + 1;
            return Err(Error::Ingestion {
                row,
                msg: "omega must be given on all records or none".into(),
            });
        }
        for (k, b) in out.blocks.iter().enumerate() {
            let a = block_absorption_min(&b.t);
            if a < -1e-9 {
                return Err(Error::Ingestion {
                    row: k + 1,
                    msg: format!("block (n={}, k_z={}) is not passive: min eigenvalue {a:e}", b.n, b.k_z),
                });
            }
        }
        Ok(out)
    }

    pub fn block(&self, n: i64, k_z: f64) -> Option<&CylinderBlock> {
        self.blocks.iter().find(|b| b.n == n && b.k_z == k_z)
    }

    /// Distinct tabulated frequencies, ascending (empty for frequency-independent data).
    pub fn frequencies(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.blocks.iter().filter_map(|b| b.omega).collect();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        w.dedup();
        w
    }

    /// Blocks at frequency ω, linearly interpolated between the bracketing
    /// tabulated frequencies. Both brackets must list the same (n, k_z) records.
    pub fn at_omega(&self, omega: f64) -> Result<CylinderTMatrix> {
        let ws = self.frequencies();
        if ws.is_empty() {
            return Ok(self.clone());
        }
        let (lo, hi) = (ws[0], *ws.last().unwrap());
        if !(omega >= lo && omega <= hi) {
            return Err(Error::Range { omega, lo, hi });
        }
        let k = ws.partition_point(|w| *w <= omega).clamp(1, ws.len().max(2) - 1);
        let (w0, w1) = if ws.len() == 1 { (ws[0], ws[0]) } else { (ws[k - 1], ws[k]) };
        let s = if w1 > w0 { (omega - w0) / (w1 - w0) } else { 0.0 };
        let mut blocks = Vec::new();
        for b in self.blocks.iter().filter(|b| b.omega == Some(w0)) {
            let other = self
                .blocks
                .iter()
                .find(|c| c.omega == Some(w1) && c.n == b.n && c.k_z == b.k_z)
                .ok_or(Error::Range { omega, lo: w0, hi: w1 })?;
            let mut t = b.t;
            for p in 0..2 {
                for q in 0..2 {
                    t[p][q] = b.t[p][q] * (1.0 - s) + other.t[p][q] * s;
                }
            }
            blocks.push(CylinderBlock {
                n: b.n,
                k_z: b.k_z,
                t,
                omega: Some(omega),
            });
        }
        Ok(CylinderTMatrix { blocks })
    }

    /// Largest violation of T^{P'P}(n, k_z) = T^{PP'}(−n, −k_z) over pairs present.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            if let Some(m) = self.block(-b.n, -b.k_z) {
                for p in 0..2 {
                    for q in 0..2 {
                        worst = worst.max((b.t[p][q] - m.t[q][p]).norm());
                    }
                }
            }
        }
        worst
    }
}

/// Smallest eigenvalue of −(T + T†)/2 − T†T for a 2×2 block.
pub fn block_absorption_min(t: &[[Complex64; 2]; 2]) -> f64 {
    let mut h = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut tt = Complex64::new(0.0, 0.0);
            for k in 0..2 {
                tt += t[k][i].conj() * t[k][j];
            }
            h[i][j] = -(t[i][j] + t[j][i].conj()) / 2.0 - tt;
        }
    }
    let a = h[0][0].re;
    let d = h[1][1].re;
    let b = h[0][1].norm();
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{sph_bessel_j, sph_hankel_h1};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Direct (unscaled) Mie formula, usable at moderate arguments.
    fn mie_direct(eps: Complex64, mu: Complex64, x: f64, l: usize, p: Pol) -> Complex64 {
        let n = (eps * mu).sqrt();
        let z = n * x;
        let j = |l: usize, z: Complex64| sph_bessel_j(l, z).unwrap();
        let dj = |l: usize, z: Complex64| z * j(l - 1, z) - l as f64 * j(l, z);
        let h = |l: usize| sph_hankel_h1(l, x).unwrap();
        let dh = x * h(l - 1) - l as f64 * h(l);
        let xr = c(x, 0.0);
        let w = if p == Pol::M { mu } else { eps };
        -(w * j(l, z) * dj(l, xr) - j(l, xr) * dj(l, z)) / (w * j(l, z) * dh - h(l) * dj(l, z))
    }

    #[test]
    fn vacuum_sphere_has_no_t() {
        let m = mie_t_raw(c(1.0, 0.0), c(1.0, 0.0), 1e14, 1e-6, 10).unwrap();
        for l in 1..=10 {
            for p in Pol::BOTH {
                assert_eq!(m.t(p, l), c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn log_derivative_form_matches_direct() {
        let eps = c(3.0, 0.7);
        let mu = c(1.2, 0.1);
        let x = 1.7;
        let m = mie_t_raw(eps, mu, x * C / 1e-6, 1e-6, 8).unwrap();
        for l in 1..=8 {
            for p in Pol::BOTH {
                let d = mie_direct(eps, mu, x, l, p);
                assert!((m.t(p, l) - d).norm() < 1e-12 * (1.0 + d.norm()), "l={l} {p:?}");
            }
        }
    }

    #[test]
    fn leading_order_small_sphere() {
        let eps = c(2.0, 0.3);
        let x = 1e-3;
        let m = mie_t_raw(eps, c(1.0, 0.0), x * C, 1.0, 2).unwrap();
        let lead = Complex64::i() * 2.0 / 3.0 * (eps - 1.0) / (eps + 2.0) * x.powi(3);
        assert!(((m.t(Pol::N, 1) - lead) / lead).norm() < 1e-5);
    }

    #[test]
    fn small_sphere_expansion_agrees() {
        let eps = c(2.0, 0.0);
        let x = 0.01;
        let m = mie_t_raw(eps, c(1.0, 0.0), x * C, 1.0, 1).unwrap();
        let s = small_sphere_t_raw(eps, c(1.0, 0.0), x * C, 1.0);
        assert!(((s.t1_n - m.t(Pol::N, 1)) / m.t(Pol::N, 1)).norm() < 1e-8);
        assert!(s.validity_warning.is_none());
        let w = small_sphere_t_raw(c(30.0, 0.0), c(1.0, 0.0), 0.1 * C, 1.0);
        assert!(w.validity_warning.is_some());
    }

    #[test]
    fn small_sphere_vacuum_zero() {
        let s = small_sphere_t_raw(c(1.0, 0.0), c(1.0, 0.0), 1e14, 1e-7);
        assert_eq!(s.t1_n, c(0.0, 0.0));
        assert_eq!(s.t1_m, c(0.0, 0.0));
    }

    #[test]
    fn near_mirror_is_lossless() {
        let m = mie_t_raw(c(-1e8, 0.0), c(1.0, 0.0), C, 1.0, 12).unwrap();
        for l in 1..=12 {
            for p in Pol::BOTH {
                let t = m.t(p, l);
                assert!((t.re + t.norm_sqr()).abs() < 1e-6, "l={l} {p:?} {t}");
            }
        }
    }

    #[test]
    fn strongly_absorbing_large_argument() {
        // |Im(nx)| far beyond the range where j_l itself is representable
        let m = mie_t_raw(c(1.0, 1e6), c(1.0, 0.0), 50.0 * C, 1.0, 60).unwrap();
        assert!(m.saturated.is_empty());
        for l in 1..=60 {
            for p in Pol::BOTH {
                assert!(m.absorption(p, l) >= -1e-12);
            }
        }
    }

    #[test]
    fn high_order_channels_vanish_quietly() {
        let m = mie_t_raw(c(4.0, 1.0), c(1.0, 0.0), 1e-3 * C, 1.0, 120).unwrap();
        assert!(m.t(Pol::N, 120).norm() < 1e-300);
        assert!(m.t(Pol::N, 1).norm() > 0.0);
    }

    #[test]
    fn fresnel_normal_incidence() {
        let (rm, rn) = fresnel_raw(c(2.0, 0.0), c(1.0, 0.0), 0.0, 1e14);
        let s = 2f64.sqrt();
        let want = (1.0 - s) / (1.0 + s);
        assert!((rm.re - want).abs() < 1e-14 && rm.im.abs() < 1e-15);
        // at normal incidence the two polarizations differ only by sign
        assert!((rn.re + want).abs() < 1e-14);
    }

    #[test]
    fn fresnel_vacuum_and_mirror() {
        let w = 2e14;
        let (a, b) = fresnel_raw(c(1.0, 0.0), c(1.0, 0.0), 0.3 * w / C, w);
        assert_eq!((a, b), (c(0.0, 0.0), c(0.0, 0.0)));
        for f in [0.0, 0.4, 0.9, 0.999] {
            let (rm, rn) = fresnel_raw(c(-1e8, 0.0), c(1.0, 0.0), f * w / C, w);
            assert!((rm.norm() - 1.0).abs() < 1e-4 && (rn.norm() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn fresnel_evanescent_sign() {
        let w = 1e14;
        for kf in [1.01, 2.0, 50.0, 1e4] {
            let (rm, rn) = fresnel_raw(c(-20.0, 3.0), c(1.0, 0.0), kf * w / C, w);
            assert!(rm.im >= 0.0 && rn.im >= 0.0, "{kf} {rm} {rn}");
        }
    }

    #[test]
    fn slab_limits() {
        let w = 1e14;
        let eps = c(2.0, 0.5);
        let kp = 0.4 * w / C;
        let thick = slab_raw(eps, c(1.0, 0.0), 1e-3, kp, w);
        let (rm, rn) = fresnel_raw(eps, c(1.0, 0.0), kp, w);
        assert!((thick.r_r[0] - rm).norm() < 1e-8 && (thick.r_r[1] - rn).norm() < 1e-8);
        assert!(thick.t_r[0].norm() < 1e-8);
        let vac = slab_raw(c(1.0, 0.0), c(1.0, 0.0), 1e-6, kp, w);
        assert_eq!(vac.r_r[0], c(0.0, 0.0));
        assert!((vac.t_r[1] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn slab_passive_on_grid() {
        let w = 1e14;
        for k in 0..50 {
            let kp = k as f64 / 50.0 * w / C;
            let s = slab_raw(c(2.0, 0.5), c(1.0, 0.0), 2e-6, kp, w);
            for p in 0..2 {
                assert!(1.0 - s.r_r[p].norm_sqr() - s.t_r[p].norm_sqr() >= -1e-14);
            }
        }
    }

    #[test]
    fn lossless_slab_conserves_flux() {
        let w = 1e14;
        let s = slab_raw(c(4.0, 0.0), c(1.0, 0.0), 3e-6, 0.5 * w / C, w);
        for p in 0..2 {
            assert!((s.r_r[p].norm_sqr() + s.t_r[p].norm_sqr() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn plate_t_limits() {
        let vac = plate_t_elements(&slab_raw(c(1.0, 0.0), c(1.0, 0.0), 1e-6, 0.0, 1e14));
        assert!(vac.rr.iter().chain(&vac.rl).all(|z| z.norm() < 1e-15));
        let mirror = plate_t_elements(&SlabCoefficients::half_space(fresnel_raw(c(-1e8, 0.0), c(1.0, 0.0), 0.0, 1e14)));
        assert_eq!(mirror.rr[0], c(-0.5, 0.0));
        assert!((mirror.rl[1].norm() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn cylinder_plugin_parse() {
        let text = r#"[
            {"n": 1, "k_z": 0.5, "T_MM": [-0.1, 0.0], "T_MN": [0.01, 0.0], "T_NM": [0.02, 0.0], "T_NN": [-0.2, 0.0]},
            {"n": -1, "k_z": -0.5, "T_MM": [-0.1, 0.0], "T_MN": [0.02, 0.0], "T_NM": [0.01, 0.0], "T_NN": [-0.2, 0.0]}
        ]"#;
        let t = CylinderTMatrix::from_json(text).unwrap();
        assert_eq!(t.blocks.len(), 2);
        assert!(t.symmetry_defect() < 1e-15);
        assert_eq!(t.block(1, 0.5).unwrap().t[0][1], c(0.01, 0.0));
    }

    #[test]
    fn cylinder_plugin_rejects_gain() {
        let text = r#"[{"n": 0, "k_z": 0.0, "T_MM": [0.3, 0.0], "T_MN": [0.0, 0.0], "T_NM": [0.0, 0.0], "T_NN": [0.0, 0.0]}]"#;
        assert!(matches!(CylinderTMatrix::from_json(text), Err(Error::Ingestion { row: 1, .. })));
        let bad_key = r#"[{"n": 0, "k_z": 0.0, "T_XX": [0.3, 0.0]}]"#;
        assert!(CylinderTMatrix::from_json(bad_key).is_err());
    }
}
