#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;

mod common;
use common::*;
use rotshock::background::normal_shock;
use rotshock::elliptic::SolveOptions;
use rotshock::error::Error;
use rotshock::lagrangian::Hatted;
use rotshock::numerics::{trap_weights, Func};
use rotshock::shockfit::*;
use rotshock::supersonic::{linear_dkappa, solve_linear};
use rotshock::thermo::{from_char, to_char, CharState, GasModel};

fn rotating() -> Hatted {
    hat(0.1, Func::Poly(vec![2.0, 0.2, -0.1]))
}

#[test]
fn u1_factor_at_mach_two() {
    let h = hat(0.0, Func::Poly(vec![2.0]));
    let c = coefficients(&h, 17).unwrap();
    let mp = c.plus[0].mach2;
    assert!((mp - 1.0 / 3.0).abs() < 1e-12);
    for a in &c.a1 {
        assert!((a + 0.375).abs() < 1e-12, "{a}");
    }
    assert_eq!(shock_u1_factor(0.49, 0.49), 1.0);
}

#[test]
fn b_coefficients_trivial_on_constant_background() {
    let h = hat(0.0, Func::Poly(vec![2.0]));
    let c = coefficients(&h, 33).unwrap();
    for side in [&c.b_minus, &c.b_plus] {
        for j in 0..33 {
            assert!((side[1][j] - 1.0).abs() < 1e-12);
            assert!((side[3][j] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn b_coefficients_match_closed_forms() {
    let h = rotating();
    let c = coefficients(&h, 65).unwrap();
    for (side, pts) in [(&c.b_minus, &c.minus), (&c.b_plus, &c.plus)] {
        let q0 = pts[0].rho * pts[0].u;
        for (j, p) in pts.iter().enumerate() {
            let b2 = pts[0].u / p.u;
            let b1 = (1.0 - p.mach2) * b2 / (p.rho * p.u);
            let b3 = 1.0 / q0;
            let b4 = p.rho * p.u * b3;
            for (k, want) in [b1, b2, b3, b4].into_iter().enumerate() {
                let got = side[k][j];
                assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "b{} at {j}: {got} vs {want}", k + 1);
            }
        }
    }
}

/// Upstream (u, S, B) -> downstream (u, S) through the exact normal-shock relations.
fn shocked(u: f64, s: f64, b: f64, gas: &GasModel) -> (f64, f64) {
    let up = from_char(&CharState { u1: u, u2: 0.0, s, b }, gas).unwrap();
    let dn = normal_shock(&up, gas);
    (dn.u1, to_char(&dn, gas).unwrap().s)
}

#[test]
fn shock_coefficients_match_normal_shock_differences() {
    let h = rotating();
    let gas = h.bg.gas;
    let c = coefficients(&h, 9).unwrap();
    let e = 1e-6;
    for j in 0..9 {
        let m = c.minus[j];
        let diff = |du: f64, ds: f64, db: f64| {
            let p = shocked(m.u + du, m.s + ds, m.b + db, &gas);
            let q = shocked(m.u - du, m.s - ds, m.b - db, &gas);
            ((p.0 - q.0) / (2.0 * e), (p.1 - q.1) / (2.0 * e))
        };
        let (du_u, ds_u) = diff(e, 0.0, 0.0);
        let (du_s, ds_s) = diff(0.0, e, 0.0);
        let (du_b, ds_b) = diff(0.0, 0.0, e);
        let tol = 1e-7;
        assert!((du_u - c.a1[j]).abs() < tol, "a1 {du_u} vs {}", c.a1[j]);
        assert!((ds_u - c.a2[j]).abs() < tol, "a2 {ds_u} vs {}", c.a2[j]);
        assert!(du_s.abs() < tol);
        assert!((ds_s - 1.0).abs() < tol);
        assert!((du_b - c.bern_u1[j]).abs() < tol, "b-part of u1 {du_b} vs {}", c.bern_u1[j]);
        assert!((ds_b - c.bern_s[j]).abs() < tol, "b-part of S {ds_b} vs {}", c.bern_s[j]);
    }
}

#[test]
fn pressure_linearization_matches_differences() {
    let gas = GasModel::new(1.4, 0.0).unwrap();
    let (u, s, b) = (0.8, 0.3, 7.0);
    let p = |u: f64, s: f64, b: f64| from_char(&CharState { u1: u, u2: 0.0, s, b }, &gas).unwrap().p;
    let st = from_char(&CharState { u1: u, u2: 0.0, s, b }, &gas).unwrap();
    let e = 1e-6;
    let d = |a: f64, b2: f64, c2: f64| (p(u + a, s + b2, b + c2) - p(u - a, s - b2, b - c2)) / (2.0 * e);
    assert!((d(e, 0.0, 0.0) + st.rho * u).abs() < 1e-7);
    assert!((d(0.0, e, 0.0) + st.p / 0.4).abs() < 1e-7);
    assert!((d(0.0, 0.0, e) - st.rho).abs() < 1e-7);
}

#[test]
fn exit_condition_reproduces_exit_pressure() {
    let h = rotating();
    let p = pert(1e-3);
    let c = coefficients(&h, 33).unwrap();
    let v = solve_linear(&h, &p, 129, 33).unwrap();
    let grid = rotshock::lagrangian::Grid::new(17, 33, 0.4, 1.0, h.m_bar, h.m_bar).unwrap();
    let u1m = v.v.column_at("u1", 0.4);
    let sd = subsonic_data(&c, &grid, &u1m, &p, linear_dkappa(&h, &p));
    let pe = exit_pressure(&c, &sd.data.h2, &sd.s_plus, &sd.b_plus);
    for (j, pt) in c.plus.iter().enumerate() {
        let want = p.sigma * p.p_ex.eval(pt.x2);
        assert!((pe[j] - want).abs() < 1e-15, "{} vs {want}", pe[j]);
    }
}

#[test]
fn zero_data_gives_zero_functionals() {
    let h = rotating();
    let p = zero_pert();
    let c = coefficients(&h, 33).unwrap();
    let v = solve_linear(&h, &p, 65, 33).unwrap();
    let f = j_functionals(&c, &v, &p, 65);
    assert_eq!(f.j2, 0.0);
    for k in 0..=10 {
        assert_eq!(f.j1(k as f64 / 10.0), 0.0);
    }
    assert!(matches!(guaranteed_bracket(&c, &f, &v, &p), Err(Error::DegenerateSelection { .. })));
}

#[test]
fn flat_nozzle_without_rotation_is_degenerate() {
    let h = hat(0.0, Func::Poly(vec![2.0]));
    let mut p = pert(1e-3);
    p.geometry.g = Func::zero();
    let c = coefficients(&h, 33).unwrap();
    let v = solve_linear(&h, &p, 129, 33).unwrap();
    let f = j_functionals(&c, &v, &p, 65);
    let j0 = f.j1(0.0);
    for k in 1..=20 {
        let d = (f.j1(k as f64 / 20.0) - j0).abs();
        assert!(d < 1e-10, "J1 drifts by {d}");
    }
    let j1 = |t: f64| f.j1(t);
    assert!(matches!(find_shock_position(&j1, f.j2, 0.05, 0.95), Err(Error::DegenerateSelection { .. })));
    assert!(matches!(guaranteed_bracket(&c, &f, &v, &p), Err(Error::DegenerateSelection { .. })));
}

#[test]
fn j1_at_inlet_matches_closed_form() {
    let h = rotating();
    let p = pert(1e-3);
    let n2 = 65;
    let c = coefficients(&h, n2).unwrap();
    let v = solve_linear(&h, &p, 257, n2).unwrap();
    let f = j_functionals(&c, &v, &p, 257);
    let w = trap_weights(n2, c.y2[1]);
    let lead: f64 = (0..n2).map(|j| w[j] * (c.a3[j] - c.a1[j]) * c.b_plus[0][j] * p.u1_en.eval(c.plus[j].x2)).sum();
    let got = f.j1(0.0);
    assert!((got - lead - f.wall * f.wall_integral(0.0)).abs() < 1e-12 * got.abs());
    // trapezoid error of the wall integral: h^2/12 * |g''(L) - g''(0)|
    let h1 = 1.0 / 256.0;
    assert!((f.wall_integral(0.0) - p.geometry.g.eval(1.0)).abs() <= h1 * h1 / 12.0 * 1.2 * 1.001);
}

#[test]
fn synthetic_linear_root() {
    let r = find_shock_position(&|t| 2.0 * t + 1.0, 2.0, 0.0, 1.0).unwrap();
    assert!((r.psi_bar - 0.5).abs() < 1e-12);
    assert!(matches!(find_shock_position(&|t| 2.0 * t + 1.0, 5.0, 0.0, 1.0), Err(Error::NoShockPosition { .. })));
    assert!(matches!(find_shock_position(&|t| (t - 0.5).powi(2), 0.1, 0.0, 1.0), Err(Error::NotMonotone { .. })));
    assert!(matches!(find_shock_position(&|_| 1.0, 1.0, 0.0, 1.0), Err(Error::DegenerateSelection { .. })));
}

proptest! {
    #[test]
    fn root_finder_converges_on_monotone_cubics(a in 0.1f64..5.0, b in -2.0f64..2.0, c3 in 0.0f64..3.0, t in 0.01f64..0.99, flip in any::<bool>()) {
        let s = if flip { -1.0 } else { 1.0 };
        let f = move |x: f64| s * (a * x + c3 * x.powi(3) + b);
        let r = find_shock_position(&f, f(t), 0.0, 1.0).unwrap();
        prop_assert!(r.iterations <= 60);
        prop_assert!((f(r.psi_bar) - f(t)).abs() <= 1e-10 * (1.0 + f(t).abs().max(f(0.0).abs()).max(f(1.0).abs())));
        prop_assert!((r.psi_bar - t).abs() < 1e-8);
    }
}

#[test]
fn subsonic_zero_data_is_zero() {
    let h = rotating();
    let p = zero_pert();
    let c = coefficients(&h, 33).unwrap();
    let v = solve_linear(&h, &p, 65, 33).unwrap();
    let s = solve_linear_subsonic(&c, 0.5, &v, &p, 0.0, 33, SolveOptions::default()).unwrap();
    assert_eq!(s.v.max_abs(), 0.0);
}

#[test]
fn shock_slope_zero_and_linear() {
    let h = rotating();
    let c = coefficients(&h, 17).unwrap();
    let a: Vec<f64> = (0..17).map(|j| (j as f64).sin()).collect();
    let z = shock_slope(&a, &a, &c, 1.0, 1.0).unwrap();
    assert!(z.iter().all(|v| *v == 0.0));
    let b: Vec<f64> = (0..17).map(|j| (j as f64).cos()).collect();
    let s1 = shock_slope(&a, &b, &c, 1.0, 1.0).unwrap();
    let a2: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
    let b2: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
    let s2 = shock_slope(&a2, &b2, &c, 1.0, 1.0).unwrap();
    for j in 0..17 {
        assert!((s2[j] - 2.0 * s1[j]).abs() < 1e-14);
        assert!(c.jump_p[j] > 0.0 && c.plus[j].mach2 < 1.0 && c.minus[j].mach2 > 1.0);
    }
}

#[test]
fn initial_approximation_on_admissible_data() {
    let h = hat(0.3, Func::Poly(vec![2.0]));
    let mut base = pert(1e-3);
    base.geometry.g = Func::zero();
    let p = calibrated(&h, &base, 0.5);
    let opts = InitialOptions { n1_minus: 257, n1_plus: 129, n2: 65, ..Default::default() };
    let ia = initial_approximation(&h, &p, &opts).unwrap();
    assert_eq!(ia.bracket.source, BracketSource::Increasing);
    let psi = ia.front.psi_bar;
    assert!(psi > ia.bracket.lo && psi < ia.bracket.hi, "{psi} outside {:?}", (ia.bracket.lo, ia.bracket.hi));
    assert!((ia.j1_at_psi - ia.functionals.j2).abs() <= 1e-10);
    assert!(ia.elliptic.defect.abs() <= 1e-10, "defect {}", ia.elliptic.defect);
    assert!(ia.front.psi_prime[0].abs() < 1e-14);
    for i in 1..ia.v_plus.grid.n1 {
        assert_eq!(ia.v_plus.data[2].row(i), ia.v_plus.data[2].row(0));
    }
}

#[test]
fn j2_outside_bracket_range_is_rejected() {
    let h = hat(0.3, Func::Poly(vec![2.0]));
    let mut base = pert(1e-3);
    base.geometry.g = Func::zero();
    let p = calibrated(&h, &base, 4.0);
    let r = initial_approximation(&h, &p, &InitialOptions { n1_minus: 129, n1_plus: 65, n2: 33, ..Default::default() });
    assert!(matches!(r, Err(Error::NoShockPosition { .. })), "{:?}", r.err());
}

#[test]
fn linear_estimate_scales_with_sigma() {
    let h = hat(0.3, Func::Poly(vec![2.0]));
    let mut base = pert(1e-3);
    base.geometry.g = Func::zero();
    let p = calibrated(&h, &base, 0.5);
    let opts = InitialOptions { n1_minus: 129, n1_plus: 65, n2: 33, ..Default::default() };
    let ratio: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&s| {
            let ia = initial_approximation(&h, &p.with_sigma(s), &opts).unwrap();
            let slope = ia.front.psi_prime.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (ia.v_plus.max_abs() + slope) / s
        })
        .collect();
    for r in &ratio[1..] {
        assert!((r / ratio[0] - 1.0).abs() < 0.2, "{ratio:?}");
    }
}
