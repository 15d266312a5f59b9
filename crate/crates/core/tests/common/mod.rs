#![allow(dead_code, clippy::needless_range_loop)]

pub mod mms;

use rotshock::background::{build, UpstreamSpec};
use rotshock::lagrangian::{Geometry, Hatted, Perturbation};
use rotshock::numerics::Func;
use rotshock::shockfit::{coefficients, j_functionals, guaranteed_bracket};
use rotshock::supersonic::{linear_dkappa, solve_linear};
use rotshock::thermo::{rho_p_from_entropy_enthalpy, GasModel};

pub fn hat(beta: f64, u: Func) -> Hatted {
    let gas = GasModel::new(1.4, beta).unwrap();
    let bg = build(&UpstreamSpec { u_minus: u, m_top: 2.0, p_top: 1.0 }, &gas, 1025).unwrap();
    Hatted::new(&bg).unwrap()
}

pub fn pert(sigma: f64) -> Perturbation {
    Perturbation {
        sigma,
        u1_en: Func::Poly(vec![0.3, -0.2]),
        u2_en: Func::Poly(vec![0.0, 1.0, -1.0]),
        s_en: Func::Poly(vec![0.1, 0.2]),
        b_en: Func::Poly(vec![0.05, -0.1]),
        p_ex: Func::Poly(vec![0.2, 0.1]),
        geometry: Geometry { length: 1.0, g: Func::Poly(vec![0.0, 0.0, 0.0, 0.0, 0.1]), sigma },
    }
}

pub fn zero_pert() -> Perturbation {
    Perturbation {
        sigma: 0.0,
        u1_en: Func::zero(),
        u2_en: Func::zero(),
        s_en: Func::zero(),
        b_en: Func::zero(),
        p_ex: Func::zero(),
        geometry: Geometry { length: 1.0, g: Func::zero(), sigma: 0.0 },
    }
}

/// Shift the constant exit-pressure term so that J2 sits at `frac` of the guaranteed J1 range.
pub fn calibrated(h: &Hatted, base: &Perturbation, frac: f64) -> Perturbation {
    let c = coefficients(h, 65).unwrap();
    let v = solve_linear(h, base, 257, 65).unwrap();
    let f0 = j_functionals(&c, &v, base, 129);
    let br = guaranteed_bracket(&c, &f0, &v, base).unwrap();
    let target = br.range.0 + frac * (br.range.1 - br.range.0);
    shift_exit_pressure(h, base, target - f0.j2)
}

/// Shift the constant exit-pressure term so that J1(psi) = J2.
pub fn calibrated_at(h: &Hatted, base: &Perturbation, psi: f64) -> Perturbation {
    let c = coefficients(h, 65).unwrap();
    let v = solve_linear(h, base, 257, 65).unwrap();
    let f0 = j_functionals(&c, &v, base, 129);
    shift_exit_pressure(h, base, f0.j1(psi) - f0.j2)
}

/// Add a constant to P_ex that moves J2 by `dj2`.
fn shift_exit_pressure(h: &Hatted, base: &Perturbation, dj2: f64) -> Perturbation {
    let c = coefficients(h, 65).unwrap();
    let v = solve_linear(h, base, 257, 65).unwrap();
    let mut unit = base.clone();
    unit.p_ex = Func::Poly(vec![1.0]);
    let mut none = base.clone();
    none.p_ex = Func::zero();
    let dj = j_functionals(&c, &v, &unit, 129).j2 - j_functionals(&c, &v, &none, 129).j2;
    let mut out = base.clone();
    out.p_ex = add_poly(&base.p_ex, &[dj2 / dj]);
    out
}

fn add_poly(f: &Func, extra: &[f64]) -> Func {
    let mut cf = match f {
        Func::Poly(c) => c.clone(),
        _ => unreachable!(),
    };
    if cf.len() < extra.len() {
        cf.resize(extra.len(), 0.0);
    }
    for (c, e) in cf.iter_mut().zip(extra) {
        *c += e;
    }
    Func::Poly(cf)
}

/// Hermite shapes with unit slope at one wall and zero value at both.
const H0: [f64; 4] = [0.0, 1.0, -2.0, 1.0];
const H1: [f64; 4] = [0.0, 0.0, -1.0, 1.0];

fn scaled(h: &[f64; 4], k: f64) -> Vec<f64> {
    h.iter().map(|v| v * k).collect()
}

/// x2-derivative of the linear inflow pressure perturbation at a wall.
fn inlet_pressure_slope(h: &Hatted, p: &Perturbation, x: f64) -> f64 {
    let bg = &h.bg;
    let g = bg.gas.gamma;
    let pressure = |t: f64, e: f64| {
        let u = bg.u_m.eval(t) + e * p.u1_en.eval(t);
        let s = bg.s_m.eval(t) + e * p.s_en.eval(t);
        let b = bg.b_m.eval(t) + e * p.b_en.eval(t);
        rho_p_from_entropy_enthalpy(s, b - 0.5 * u * u, b, g).unwrap().1
    };
    let e = 1e-4;
    let pen = |t: f64| (pressure(t, e) - pressure(t, -e)) / (2.0 * e);
    let d = if x == 0.0 { 1e-3 } else { -1e-3 };
    (-3.0 * pen(x) + 4.0 * pen(x + d) - pen(x + 2.0 * d)) / (2.0 * d)
}

/// Corner-compatible data for the Lagrangian inflow V_hat(y2) + sigma V_en: the linear mass
/// flux change vanishes (bump added to u1_en) and S_en gets wall slopes so the linear inflow
/// pressure is flat at both walls. P_ex must already be flat at the walls.
pub fn lagrangian_compatible(h: &Hatted, base: &Perturbation, psi: f64) -> Perturbation {
    let mut p = base.clone();
    let bump = [0.0, 0.0, 0.0, 0.0, 70.0, -280.0, 420.0, -280.0, 70.0];
    let d0 = linear_dkappa(h, &p);
    let mut q = p.clone();
    q.u1_en = add_poly(&q.u1_en, &bump);
    let d1 = linear_dkappa(h, &q);
    let k = -d0 / (d1 - d0);
    p.u1_en = add_poly(&p.u1_en, &bump.iter().map(|v| v * k).collect::<Vec<_>>());
    for (x, shape) in [(0.0, H0), (1.0, H1)] {
        let a = inlet_pressure_slope(h, &p, x);
        let mut q = p.clone();
        q.s_en = add_poly(&q.s_en, &shape);
        let a1 = inlet_pressure_slope(h, &q, x);
        p.s_en = add_poly(&p.s_en, &scaled(&shape, -a / (a1 - a)));
    }
    calibrated_at(h, &p, psi)
}

/// a + b (3x^2 - 2x^3): flat at both walls.
pub fn smoothstep(a: f64, b: f64) -> Func {
    Func::Poly(vec![a, 0.0, 3.0 * b, -2.0 * b])
}

pub const ITERATION_PSI: f64 = 0.4;
pub const ITERATION_BRACKET: (f64, f64) = (0.2, 0.55);

/// Rotating case for the nonlinear iteration: constant upstream speed, beta = 0.1, smooth
/// corner-compatible data and a wall bump that vanishes to third order at the inlet.
pub fn iteration_case(sigma: f64, amplitude: f64, wall: f64) -> (Hatted, Perturbation) {
    let h = hat(0.1, Func::constant(2.0));
    let k = amplitude;
    let mut base = pert(sigma);
    base.u1_en = smoothstep(0.2 * k, -0.4 * k);
    base.u2_en = Func::Poly(vec![0.0, 0.0, 0.5 * k, -k, 0.5 * k]);
    base.s_en = smoothstep(0.1 * k, 0.1 * k);
    base.b_en = smoothstep(0.05 * k, -0.05 * k);
    base.geometry.g = Func::Poly(vec![0.0, 0.0, 0.0, 0.0, wall, -2.0 * wall, wall]);
    base.p_ex = smoothstep(0.0, 0.1 * k);
    let p = lagrangian_compatible(&h, &base, ITERATION_PSI);
    (h, p)
}

/// Three independent smooth data sets for the supersonic flux identity.
pub fn flux_data(set: usize, sigma: f64) -> Perturbation {
    let (u1, u2, s, b, g) = match set {
        0 => (
            Func::Poly(vec![0.5, -0.3, 0.2]),
            Func::Poly(vec![0.0, 0.4, -0.4]),
            Func::Poly(vec![0.1, 0.2]),
            Func::Poly(vec![0.0, 0.3, -0.1]),
            Func::Poly(vec![0.0, 0.0, 0.0, 0.0, 0.2]),
        ),
        1 => (
            Func::Poly(vec![-0.2, 0.0, 0.6, -0.3]),
            Func::Poly(vec![0.0, -0.5, 0.2, 0.3]),
            Func::zero(),
            Func::Poly(vec![0.2]),
            Func::Poly(vec![0.0, 0.0, 0.0, 0.0, -0.1, 0.05]),
        ),
        _ => (
            Func::Poly(vec![1.0]),
            Func::Poly(vec![0.0, 1.0, -2.0, 1.0]),
            Func::Poly(vec![0.0, 0.0, -0.5]),
            Func::zero(),
            Func::Poly(vec![0.0, 0.0, 0.0, 0.0, 0.3, -0.3]),
        ),
    };
    Perturbation { sigma, u1_en: u1, u2_en: u2, s_en: s, b_en: b, p_ex: Func::zero(), geometry: Geometry { length: 1.0, g, sigma } }
}
