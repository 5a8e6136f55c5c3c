//! Property checks shared by the `properties` and `acceptance` targets. Each
//! runs a deterministic proptest runner and returns the first counterexample.

use nalgebra::DMatrix;
use neqcasimir::constants::C;
use neqcasimir::materials::OpticalModel;
use neqcasimir::radiation::{channel_absorption, channel_absorption_s};
use neqcasimir::scattering::{mie_t_raw, Pol};
use neqcasimir::special::{sph_bessel_j_all, sph_bessel_y_all, wigner3j, wigner3j_exact};
use neqcasimir::waves::{pz_block, translation_u, translation_v, BlockLayout, Sign};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// k = 1e6 m⁻¹, so distances in μm are dimensionless ωd/c.
pub const OMEGA: f64 = C * 1e6;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn passive_model() -> impl Strategy<Value = OpticalModel> {
    prop_oneof![
        (log_uniform(1e14, 3e16), log_uniform(1e11, 1e15)).prop_map(|(omega_p, omega_tau)| OpticalModel::Drude { omega_p, omega_tau }),
        (1.0..12.0f64, log_uniform(1e13, 1e15), 0.2..0.95f64, log_uniform(1e10, 1e13)).prop_map(|(eps_inf, omega_lo, f, gamma)| {
            OpticalModel::SiC {
                eps_inf,
                omega_lo,
                omega_to: f * omega_lo,
                gamma,
            }
        }),
        (
            0.0..10.0f64,
            log_uniform(1e13, 1e16),
            log_uniform(1e10, 1e14),
            0.0..10.0f64,
            log_uniform(1e13, 1e16),
            log_uniform(1e10, 1e14)
        )
            .prop_map(|(c, omega_a, gamma_a, d, omega_b, gamma_b)| OpticalModel::TwoOscillator {
                c,
                omega_a,
                gamma_a,
                d,
                omega_b,
                gamma_b
            }),
        Just(OpticalModel::gold()),
        Just(OpticalModel::aluminum()),
        Just(OpticalModel::silicon_carbide()),
        Just(OpticalModel::oscillator_plate()),
        Just(OpticalModel::oscillator_sphere()),
    ]
}

/// Im ε(ω) ≥ 0 on the real axis and ε(iξ) ≥ 1 on the imaginary axis.
pub fn materials_passivity(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(passive_model(), log_uniform(1e9, 1e17)), |(m, w)| {
            let e = m.epsilon(w).unwrap();
            prop_assert!(e.im >= 0.0, "Im ε = {} at ω = {w:e} for {m:?}", e.im);
            let ei = m.epsilon_imaginary_axis(w).unwrap();
            prop_assert!(ei >= 1.0 - 1e-12, "ε(iξ) = {ei} at ξ = {w:e} for {m:?}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn passive_eps() -> impl Strategy<Value = Complex64> {
    (-60.0..60.0f64, log_uniform(1e-6, 60.0)).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Every Mie channel of a passive sphere absorbs: −(Re T + |T|²) ≥ 0.
pub fn mie_channel_passivity(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(
            &(passive_eps(), 1.0..3.0f64, 0.0..1.0f64, log_uniform(1e-3, 30.0)),
            |(eps, mu_re, mu_im, x)| {
                let mu = Complex64::new(mu_re, mu_im);
                let tm = mie_t_raw(eps, mu, OMEGA, x / 1e6, 12).unwrap();
                for l in 1..=12 {
                    for p in Pol::BOTH {
                        let t = tm.t(p, l);
                        let a = channel_absorption(t);
                        prop_assert!(a >= -1e-14 * (1.0 + t.norm()), "{p:?} l={l}: T = {t}, absorption {a}");
                        prop_assert!(t.norm() <= 1.0 + 1e-12);
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

/// The S-matrix form (1 − |S|²)/4 with S = 1 + 2T equals −(Re T + |T|²).
pub fn s_matrix_identity(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(passive_eps(), log_uniform(1e-3, 30.0), 1usize..=8), |(eps, x, l)| {
            let tm = mie_t_raw(eps, Complex64::new(1.0, 0.0), OMEGA, x / 1e6, 8).unwrap();
            for p in Pol::BOTH {
                let t = tm.t(p, l);
                let (a, b) = (channel_absorption(t), channel_absorption_s(t));
                prop_assert!((a - b).abs() <= 1e-15 * (1.0 + t.norm()), "T = {t}: {a} vs {b}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// j_l y_{l−1} − j_{l−1} y_l = 1/x².
pub fn bessel_wronskian(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(log_uniform(0.05, 80.0), 1usize..40), |(x, l)| {
            let j = sph_bessel_j_all(l, Complex64::new(x, 0.0)).unwrap();
            let y = sph_bessel_y_all(l, x);
            let w = j[l].re * y[l - 1] - j[l - 1].re * y[l];
            let scale = (j[l].re * y[l - 1]).abs().max((j[l - 1].re * y[l]).abs()) * x * x;
            prop_assert!((w * x * x - 1.0).abs() < 1e-10 * scale.max(1.0), "x = {x}, l = {l}: x²W = {}", w * x * x);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Σ_{l3} (2l3+1) (l1 l2 l3; m1 m2 −M)(l1 l2 l3; m1' m2' −M) = δ_{m1 m1'}, and the
/// fast recurrence agrees with the exact Racah sum.
pub fn wigner_orthogonality(cases: u32) -> Result<(), String> {
    let strat = (0i64..14, 0i64..14).prop_flat_map(|(l1, l2)| (Just(l1), Just(l2), -l1..=l1, -l2..=l2, -l1..=l1));
    runner(cases)
        .run(&strat, |(l1, l2, m1, m2, m1p)| {
            let big_m = m1 + m2;
            let m2p = big_m - m1p;
            if m2p.abs() > l2 {
                return Ok(());
            }
            let mut s = 0.0;
            for l3 in (l1 - l2).abs()..=l1 + l2 {
                if big_m.abs() > l3 {
                    continue;
                }
                let a = wigner3j(l1, l2, l3, m1, m2, -big_m);
                let b = wigner3j(l1, l2, l3, m1p, m2p, -big_m);
                let ex = wigner3j_exact(l1, l2, l3, m1, m2, -big_m);
                prop_assert!((a - ex).abs() < 1e-12, "({l1} {l2} {l3}; {m1} {m2} {}): {a} vs {ex}", -big_m);
                s += (2 * l3 + 1) as f64 * a * b;
            }
            let want = if m1 == m1p { 1.0 } else { 0.0 };
            prop_assert!((s - want).abs() < 1e-12, "l1={l1} l2={l2} m1={m1} m2={m2} m1'={m1p}: {s}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn max_rel_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, lay: BlockLayout, l_hi: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..lay.dim() {
        for j in 0..lay.dim() {
            if lay.entry(k).1 < l_hi && lay.entry(j).1 < l_hi {
                let (x, y) = (a[(k, j)], b[(k, j)]);
                worst = worst.max((x - y).norm() / (1.0 + y.norm()));
            }
        }
    }
    worst
}

/// p_z generates translations: ∂_d U = −p_z U and V(h) = I − h p_z + O(h²),
/// checked by finite differences on entries far from the truncation edge.
pub fn pz_finite_differences(cases: u32) -> Result<(), String> {
    let l_max = 24;
    runner(cases)
        .run(&(-4i64..=4, 0.5..10.0f64), |(m, kd)| {
            let d = kd * 1e-6;
            let h = 1e-4 * 1e-6;
            let lay = BlockLayout::new(m, l_max);
            let up = translation_u(Sign::Plus, m, d + h, OMEGA, l_max).unwrap().matrix;
            let um = translation_u(Sign::Plus, m, d - h, OMEGA, l_max).unwrap().matrix;
            let u = translation_u(Sign::Plus, m, d, OMEGA, l_max).unwrap().matrix;
            let pz = pz_block(m, OMEGA, l_max);
            // derivatives in units of k = ω/c
            let k = Complex64::new(OMEGA / C, 0.0);
            let fd = (up - um) / (Complex64::new(2.0 * h, 0.0) * k);
            let pred = -(&pz * &u) / k;
            let e = max_rel_diff(&fd, &pred, lay, 7);
            prop_assert!(e < 1e-5, "∂U vs −p_z U, m = {m}, kd = {kd}: {e}");
            let v = translation_v(m, h, OMEGA, l_max).unwrap().matrix;
            let gen = (DMatrix::identity(lay.dim(), lay.dim()) - v) / (Complex64::new(h, 0.0) * k);
            let e = max_rel_diff(&gen, &(pz / k), lay, l_max);
            prop_assert!(e < 1e-3, "(I − V(h))/h vs p_z, m = {m}: {e}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Name, check and case count of the whole suite.
pub type Property = (&'static str, fn(u32) -> Result<(), String>, u32);

pub const SUITE: [Property; 6] = [
    ("materials passivity", materials_passivity, 400),
    ("Mie channel passivity", mie_channel_passivity, 300),
    ("S-matrix emission identity", s_matrix_identity, 300),
    ("Bessel Wronskian", bessel_wronskian, 400),
    ("Wigner-3j orthogonality", wigner_orthogonality, 200),
    ("p_z finite differences", pz_finite_differences, 40),
];
