//! Partial-wave algebra: axial translation matrices U±/V, the infinitesimal
//! translation p_z, plane-to-spherical conversion D, vector wave functions and
//! the closed-form free Green's function used as an oracle.
//!
//! Spherical harmonics follow Jackson (Condon-Shortley phase). The factor
//! √((−1)^m) in the wave normalization is taken on the principal branch, i for
//! odd m of either sign.

use crate::constants::C;
use crate::error::{Error, Result};
use crate::quadrature::KSector;
use crate::scattering::{sqrt_im_pos, Pol};
use crate::special::{sph_bessel_j_all, sph_hankel_h1_all, wigner3j_jrange, LegendreTable, RadialKind};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

pub type Vec3 = [Complex64; 3];
pub type Dyad = [[Complex64; 3]; 3];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// i^n for any integer n.
pub fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// √((−1)^m), principal branch.
pub fn sqrt_sign(m: i64) -> Complex64 {
    if m.rem_euclid(2) == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        I
    }
}

/// a(l, m) = m / (l(l+1)).
pub fn coeff_a(l: usize, m: i64) -> f64 {
    m as f64 / (l * (l + 1)) as f64
}

/// b(l, m) = √(l(l+2)(l−m+1)(l+m+1)/((2l+1)(2l+3))) / (l+1).
pub fn coeff_b(l: usize, m: i64) -> f64 {
    let lf = l as f64;
    let mf = m as f64;
    let t = lf * (lf + 2.0) * (lf - mf + 1.0) * (lf + mf + 1.0) / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0));
    t.max(0.0).sqrt() / (lf + 1.0)
}

/// Direction of an axial translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationKind {
    U(Sign),
    V,
}

/// A fixed-m block over (P, l), l = max(1, |m|)..=l_max. Rows are the target
/// index (P', l'), columns the source (P, l); M channels come first.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationBlock {
    pub m: i64,
    pub d: f64,
    pub omega: f64,
    pub kind: TranslationKind,
    pub l_min: usize,
    pub l_max: usize,
    pub matrix: DMatrix<Complex64>,
}

/// Index layout shared by all fixed-m blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub m: i64,
    pub l_min: usize,
    pub l_max: usize,
}

impl BlockLayout {
    pub fn new(m: i64, l_max: usize) -> Self {
        BlockLayout {
            m,
            l_min: (m.unsigned_abs() as usize).max(1),
            l_max,
        }
    }

    /// Number of l values per polarization.
    pub fn n(&self) -> usize {
        if self.l_max < self.l_min {
            0
        } else {
            self.l_max - self.l_min + 1
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n()
    }

    pub fn idx(&self, p: Pol, l: usize) -> usize {
        p.index() * self.n() + (l - self.l_min)
    }

    /// (P, l) of a flat index.
    pub fn entry(&self, k: usize) -> (Pol, usize) {
        let n = self.n();
        if k < n {
            (Pol::M, self.l_min + k)
        } else {
            (Pol::N, self.l_min + k - n)
        }
    }
}

impl TranslationBlock {
    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            m: self.m,
            l_min: self.l_min,
            l_max: self.l_max,
        }
    }

    /// Element (P', l') ← (P, l).
    pub fn get(&self, p_to: Pol, l_to: usize, p_from: Pol, l_from: usize) -> Complex64 {
        let lay = self.layout();
        self.matrix[(lay.idx(p_to, l_to), lay.idx(p_from, l_from))]
    }
}

/// ρ^{ν+1} h_ν(x) for ν = 0..=n; finite where h_ν itself overflows.
fn scaled_hankel(n: usize, x: f64, rho: f64) -> Result<Vec<Complex64>> {
    if rho == 1.0 {
        return sph_hankel_h1_all(n, x);
    }
    let j = sph_bessel_j_all(n, Complex64::new(x, 0.0))?;
    let mut y = vec![0.0; n + 1];
    y[0] = -rho * x.cos() / x;
    if n >= 1 {
        y[1] = -rho * rho * (x.cos() / (x * x) + x.sin() / x);
    }
    for nu in 1..n {
        y[nu + 1] = (2 * nu + 1) as f64 * (rho / x) * y[nu] - rho * rho * y[nu - 1];
    }
    let mut pw = rho;
    Ok((0..=n)
        .map(|nu| {
            let v = Complex64::new(pw * j[nu].re, y[nu]);
            pw *= rho;
            v
        })
        .collect())
}

fn translation(kind: TranslationKind, m: i64, d: f64, omega: f64, l_max: usize) -> Result<TranslationBlock> {
    translation_scaled(kind, m, d, omega, l_max, 1.0)
}

fn translation_scaled(kind: TranslationKind, m: i64, d: f64, omega: f64, l_max: usize, rho: f64) -> Result<TranslationBlock> {
    let lay = BlockLayout::new(m, l_max);
    let kd = d * omega / C;
    let nmax = 2 * l_max;
    let z: Vec<Complex64> = match kind {
        TranslationKind::U(_) => {
            if !(d > 0.0) {
                return Err(Error::Singular("outgoing translation needs d > 0".into()));
            }
            scaled_hankel(nmax, kd, rho)?
        }
        TranslationKind::V => {
            if d < 0.0 {
                return Err(Error::Config("regular translation needs d ≥ 0".into()));
            }
            if kd == 0.0 {
                let mut v = vec![c0(); nmax + 1];
                v[0] = Complex64::new(1.0, 0.0);
                v
            } else {
                sph_bessel_j_all(nmax, Complex64::new(kd, 0.0))?
            }
        }
    };
    if let Some(nu) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::Saturation { l: nu, abs_z: kd });
    }
    let (nu_sign, cross_sign) = match kind {
        TranslationKind::U(Sign::Plus) | TranslationKind::V => (1i64, -1.0),
        TranslationKind::U(Sign::Minus) => (-1i64, 1.0),
    };
    let dim = lay.dim();
    let mut mat = DMatrix::from_element(dim, dim, c0());
    let sm = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    for l in lay.l_min..=l_max {
        for lp in lay.l_min..=l_max {
            let (n0, w0) = wigner3j_jrange(l as i64, lp as i64, 0, 0);
            let (nm, wm) = wigner3j_jrange(l as i64, lp as i64, m, -m);
            let (lf, lpf) = (l as f64, lp as f64);
            let pre = sm * ((2.0 * lf + 1.0) * (2.0 * lpf + 1.0) / (lf * (lf + 1.0) * lpf * (lpf + 1.0))).sqrt();
            let mut same = c0();
            let mut cross = c0();
            for nu in (l as i64 - lp as i64).abs()..=(l + lp) as i64 {
                if (l as i64 + lp as i64 + nu) % 2 == 1 {
                    continue;
                }
                let a0 = nu - n0;
                let am = nu - nm;
                if a0 < 0 || am < 0 || a0 as usize >= w0.len() || am as usize >= wm.len() {
                    continue;
                }
                let nuf = nu as f64;
                let a = pre
                    * i_pow(l as i64 - lp as i64 + nu_sign * nu)
                    * (2.0 * nuf + 1.0)
                    * w0[a0 as usize]
                    * wm[am as usize]
                    * z[nu as usize]
                    * rho.powi(l as i32 + lp as i32 - nu as i32);
                same += 0.5 * (lf * (lf + 1.0) + lpf * (lpf + 1.0) - nuf * (nuf + 1.0)) * a;
                cross += a;
            }
            cross *= cross_sign * I * m as f64 * kd;
            for p in Pol::BOTH {
                mat[(lay.idx(p, lp), lay.idx(p, l))] = same;
                mat[(lay.idx(p.other(), lp), lay.idx(p, l))] = cross;
            }
        }
    }
    Ok(TranslationBlock {
        m,
        d,
        omega,
        kind,
        l_min: lay.l_min,
        l_max,
        matrix: mat,
    })
}

/// Outgoing-to-regular translation: E^out_Plm(r) = Σ U±_{P'P,l'lm} E^reg_P'l'm(r ± d ẑ).
pub fn translation_u(sign: Sign, m: i64, d: f64, omega: f64, l_max: usize) -> Result<TranslationBlock> {
    translation(TranslationKind::U(sign), m, d, omega, l_max)
}

/// S U± S with S = diag(ρ^{l+1/2}), ρ = min(1, ωd/c). Stays finite in the
/// quasi-static regime where U± itself overflows; pair it with T_l / ρ^{2l+1}.
pub fn translation_u_scaled(sign: Sign, m: i64, d: f64, omega: f64, l_max: usize) -> Result<(TranslationBlock, f64)> {
    let rho = (d * omega / C).min(1.0);
    Ok((translation_scaled(TranslationKind::U(sign), m, d, omega, l_max, rho)?, rho))
}

/// Regular-to-regular translation: E^reg_Plm(r) = Σ V_{P'P,l'lm} E^reg_P'l'm(r + d ẑ).
pub fn translation_v(m: i64, d: f64, omega: f64, l_max: usize) -> Result<TranslationBlock> {
    translation(TranslationKind::V, m, d, omega, l_max)
}

/// Infinitesimal translation p_z = −∂_d V(d ẑ)|_{d=0} at fixed m, so that
/// ∂_z E^reg_μ = Σ_μ' (p_z)_{μ'μ} E^reg_μ'. Entries:
/// (ω/c){ i(1−δ_{P'P}) δ_{l'l} a(l,m) + δ_{P'P}[−b(l,m) δ_{l',l+1} + b(l',m) δ_{l'+1,l}] }.
pub fn pz_block(m: i64, omega: f64, l_max: usize) -> DMatrix<Complex64> {
    let lay = BlockLayout::new(m, l_max);
    let k = omega / C;
    let dim = lay.dim();
    let mut mp = DMatrix::from_element(dim, dim, c0());
    for l in lay.l_min..=l_max {
        for p in Pol::BOTH {
            let col = lay.idx(p, l);
            mp[(lay.idx(p.other(), l), col)] = I * coeff_a(l, m) * k;
            if l < l_max {
                mp[(lay.idx(p, l + 1), col)] = Complex64::new(-coeff_b(l, m) * k, 0.0);
            }
            if l > lay.l_min {
                mp[(lay.idx(p, l - 1), col)] = Complex64::new(coeff_b(l - 1, m) * k, 0.0);
            }
        }
    }
    mp
}

/// Conversion coefficients D_{lm P'P}(k_⊥) for 1 ≤ l ≤ l_max at azimuth 0.
/// P is the plane-wave polarization, P' the spherical one.
#[derive(Debug, Clone)]
pub struct ConversionD {
    pub k_perp: f64,
    pub omega: f64,
    pub l_max: usize,
    /// [l][m + l] -> (D_MM, D_NM)
    vals: Vec<Vec<(Complex64, Complex64)>>,
}

impl ConversionD {
    pub fn new(l_max: usize, k_perp: f64, omega: f64) -> Result<Self> {
        let k0 = omega / C;
        if (k_perp - k0).abs() <= 1e-14 * k0 {
            return Err(Error::Singular(format!("grazing plane wave k_perp = ω/c = {k0:e}")));
        }
        Self::with_kz(l_max, k_perp, sqrt_im_pos(Complex64::new(k0 * k0 - k_perp * k_perp, 0.0)), omega)
    }

    /// Same, from a quadrature node; k_z (or iκ) is taken from the node
    /// instead of being recomputed from k_⊥.
    pub fn for_sector(l_max: usize, sector: KSector, omega: f64) -> Result<Self> {
        Self::with_kz(l_max, sector.k_perp(), sector.k_z(), omega)
    }

    fn with_kz(l_max: usize, k_perp: f64, kz: Complex64, omega: f64) -> Result<Self> {
        let k0 = omega / C;
        if kz.norm() == 0.0 {
            return Err(Error::Singular(format!("grazing plane wave k_perp = ω/c = {k0:e}")));
        }
        let x = kz / k0;
        let s = Complex64::new(k_perp / k0, 0.0);
        let tab = LegendreTable::with_sin(l_max, x, s);
        let sq_kz = kz.sqrt();
        let mut vals = Vec::with_capacity(l_max + 1);
        vals.push(Vec::new());
        for l in 1..=l_max {
            let lf = l as f64;
            let root = (4.0 * PI * (2.0 * lf + 1.0) / (lf * (lf + 1.0))).sqrt();
            let mut row = Vec::with_capacity(2 * l + 1);
            for m in -(l as i64)..=(l as i64) {
                let ph = i_pow(l as i64 + 1) / sqrt_sign(m);
                // k_⊥ P'(x) = (ω/c) sinθ dP/dx
                let dmm = -ph * root * (1.0 / k0).sqrt() * k0 * tab.sin_dx(l, m) / sq_kz;
                let p_over_s = pbar_over_sin(&tab, l, m);
                let dnm = m as f64 * ph * root * p_over_s * (k0.sqrt() / sq_kz);
                row.push((dmm, dnm));
            }
            vals.push(row);
        }
        Ok(ConversionD { k_perp, omega, l_max, vals })
    }

    /// D_{lm P'P}.
    pub fn get(&self, l: usize, m: i64, p_sph: Pol, p_plane: Pol) -> Complex64 {
        let (dmm, dnm) = self.vals[l][(m + l as i64) as usize];
        if p_sph == p_plane {
            dmm
        } else {
            dnm
        }
    }
}

/// Single element of the plane-to-spherical conversion.
pub fn conversion_d(l: usize, m: i64, p_sph: Pol, p_plane: Pol, k_perp: f64, omega: f64) -> Result<Complex64> {
    Ok(ConversionD::new(l, k_perp, omega)?.get(l, m, p_sph, p_plane))
}

/// P̄_l^m / sin θ, with the axis limit for real x = ±1.
fn pbar_over_sin(tab: &LegendreTable, l: usize, m: i64) -> Complex64 {
    let s = tab.sin_theta();
    if s.norm() > 1e-12 {
        return tab.pbar(l, m) / s;
    }
    if m.abs() != 1 {
        return c0();
    }
    let lf = l as f64;
    let half = (lf * (lf + 1.0)).sqrt() / 2.0;
    // m = 1: −√(l(l+1))/2 at x = 1, (−1)^l √(l(l+1))/2 at x = −1
    let v = if tab.x().re > 0.0 {
        -half
    } else if l.is_multiple_of(2) {
        half
    } else {
        -half
    };
    Complex64::new(if m == -1 { -v } else { v }, 0.0)
}

/// Regular or outgoing radial function.
pub type WaveKind = RadialKind;

/// Spherical vector waves E_{Plm} at one point for all 1 ≤ l ≤ l_max, |m| ≤ l.
#[derive(Debug, Clone)]
pub struct SphericalWaves {
    pub l_max: usize,
    vals: Vec<[Vec3; 2]>,
}

impl SphericalWaves {
    fn slot(l: usize, m: i64) -> usize {
        l * l - 1 + (m + l as i64) as usize
    }

    pub fn get(&self, p: Pol, l: usize, m: i64) -> Vec3 {
        self.vals[Self::slot(l, m)][p.index()]
    }
}

/// Evaluate all spherical waves of the given kind at a Cartesian point.
pub fn spherical_waves(kind: WaveKind, l_max: usize, omega: f64, point: [f64; 3]) -> Result<SphericalWaves> {
    let r = (point[0].powi(2) + point[1].powi(2) + point[2].powi(2)).sqrt();
    let k = omega / C;
    let rho = k * r;
    let rad: Vec<Complex64> = match kind {
        RadialKind::H1 => {
            if r == 0.0 {
                return Err(Error::Singular("outgoing spherical wave at the origin".into()));
            }
            sph_hankel_h1_all(l_max, rho)?
        }
        RadialKind::J => sph_bessel_j_all(l_max, Complex64::new(rho, 0.0))?,
    };
    let rhat = if r > 0.0 {
        [point[0] / r, point[1] / r, point[2] / r]
    } else {
        [0.0, 0.0, 1.0]
    };
    let cos_t = rhat[2];
    let rxy = (point[0].powi(2) + point[1].powi(2)).sqrt();
    let phi = point[1].atan2(point[0]);
    let (sp, cp) = phi.sin_cos();
    let sin_t = if r > 0.0 { rxy / r } else { 0.0 };
    let that = [cos_t * cp, cos_t * sp, -sin_t];
    let phat = [-sp, cp, 0.0];
    let tab = LegendreTable::with_sin(l_max, Complex64::new(cos_t, 0.0), Complex64::new(sin_t, 0.0));
    let mut vals = vec![[[c0(); 3]; 2]; l_max * (l_max + 2)];
    for l in 1..=l_max {
        let lf = l as f64;
        let yn = ((2.0 * lf + 1.0) / (4.0 * PI)).sqrt();
        let f = rad[l];
        // (ρ f)'/ρ and f/ρ; at the origin only l = 1 regular waves survive
        let (f_over_rho, df_over_rho) = if rho > 0.0 {
            (f / rho, (rho * rad[l - 1] - lf * f) / rho)
        } else if l == 1 {
            (Complex64::new(1.0 / 3.0, 0.0), Complex64::new(2.0 / 3.0, 0.0))
        } else {
            (c0(), c0())
        };
        for m in -(l as i64)..=(l as i64) {
            let norm = sqrt_sign(m) * k.sqrt() / (lf * (lf + 1.0)).sqrt();
            let e = Complex64::from_polar(1.0, m as f64 * phi);
            let y = yn * tab.pbar(l, m) * e;
            let dy = yn * tab.dtheta(l, m) * e;
            let imy_s = I * m as f64 * yn * pbar_over_sin(&tab, l, m) * e;
            let mut em = [c0(); 3];
            let mut en = [c0(); 3];
            for c in 0..3 {
                em[c] = norm * f * (that[c] * imy_s - phat[c] * dy);
                en[c] = norm * (rhat[c] * lf * (lf + 1.0) * f_over_rho * y + df_over_rho * (that[c] * dy + phat[c] * imy_s));
            }
            vals[SphericalWaves::slot(l, m)] = [em, en];
        }
    }
    Ok(SphericalWaves { l_max, vals })
}

/// Single spherical wave E_{Plm}.
pub fn spherical_wave(kind: WaveKind, p: Pol, l: usize, m: i64, omega: f64, point: [f64; 3]) -> Result<Vec3> {
    if l == 0 || m.unsigned_abs() as usize > l {
        return Err(Error::Config(format!("invalid spherical index (l = {l}, m = {m})")));
    }
    Ok(spherical_waves(kind, l, omega, point)?.get(p, l, m))
}

/// Direction label of a plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    R,
    L,
}

/// Plane-wave eigenfunction E_{j,P,k_⊥} (regular, or outgoing = twice the
/// regular wave on its own half-space and zero elsewhere).
pub fn plane_wave(kind: WaveKind, side: Side, p: Pol, k_perp: [f64; 2], omega: f64, point: [f64; 3]) -> Result<Vec3> {
    let k0 = omega / C;
    let kp = (k_perp[0].powi(2) + k_perp[1].powi(2)).sqrt();
    if kp == 0.0 {
        return Err(Error::Singular("plane wave normalization needs k_perp > 0".into()));
    }
    let kz = sqrt_im_pos(Complex64::new(k0 * k0 - kp * kp, 0.0));
    let (z, sgn) = match side {
        Side::R => (point[2], -1.0),
        Side::L => (-point[2], 1.0),
    };
    let phase = (I * (k_perp[0] * point[0] + k_perp[1] * point[1]) + I * kz * z).exp();
    let pre = 1.0 / (2.0 * kz.sqrt() * kp);
    let v: Vec3 = match p {
        Pol::M => [I * pre * k_perp[1], -I * pre * k_perp[0], c0()],
        Pol::N => {
            let q = pre / k0;
            [q * sgn * k_perp[0] * kz, q * sgn * k_perp[1] * kz, q * Complex64::new(kp * kp, 0.0)]
        }
    };
    let scale = match kind {
        RadialKind::J => 1.0,
        RadialKind::H1 => {
            let inside = match side {
                Side::R => point[2] >= 0.0,
                Side::L => point[2] < 0.0,
            };
            if inside {
                2.0
            } else {
                0.0
            }
        }
    };
    Ok([v[0] * phase * scale, v[1] * phase * scale, v[2] * phase * scale])
}

/// Closed-form dyadic free Green's function (I + ∇∇ c²/ω²) e^{ikR}/(4πR).
pub fn green_oracle(r: [f64; 3], rp: [f64; 3], omega: f64) -> Result<Dyad> {
    let dv = [r[0] - rp[0], r[1] - rp[1], r[2] - rp[2]];
    let rr = (dv[0].powi(2) + dv[1].powi(2) + dv[2].powi(2)).sqrt();
    if rr == 0.0 {
        return Err(Error::Singular("Green's function at coincident points".into()));
    }
    let k = omega / C;
    let x = k * rr;
    let g = (I * x).exp() / (4.0 * PI * rr);
    let a = 1.0 + I / x - 1.0 / (x * x);
    let b = -1.0 - 3.0 * I / x + 3.0 / (x * x);
    let mut out = [[c0(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            out[i][j] = g * (a * delta + b * dv[i] * dv[j] / (rr * rr));
        }
    }
    Ok(out)
}

/// Partial-wave sum i Σ_μ E^out_μ(r_>) ⊗ E^reg_σ(μ)(r_<) truncated at l_max.
pub fn green_partial_wave(r: [f64; 3], rp: [f64; 3], omega: f64, l_max: usize) -> Result<Dyad> {
    let n = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let outer_first = n(r) > n(rp);
    let (ro, ri) = if outer_first { (r, rp) } else { (rp, r) };
    let wo = spherical_waves(RadialKind::H1, l_max, omega, ro)?;
    let wi = spherical_waves(RadialKind::J, l_max, omega, ri)?;
    let mut g = [[c0(); 3]; 3];
    for l in 1..=l_max {
        for m in -(l as i64)..=(l as i64) {
            for p in Pol::BOTH {
                let a = wo.get(p, l, m);
                let b = wi.get(p, l, -m);
                for i in 0..3 {
                    for j in 0..3 {
                        if outer_first {
                            g[i][j] += I * a[i] * b[j];
                        } else {
                            g[i][j] += I * b[i] * a[j];
                        }
                    }
                }
            }
        }
    }
    Ok(g)
}
