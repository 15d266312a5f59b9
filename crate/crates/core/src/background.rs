//! Special normal transonic shock states depending only on x2.

use std::path::Path;

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::numerics::{cum_simpson_to_end, linspace, CubicSpline, Func};
use crate::thermo::{bernoulli, entropy, GasModel, GasState};

pub const DEFAULT_NODES: usize = 1025;

#[derive(Debug, Clone)]
pub struct UpstreamSpec {
    pub u_minus: Func,
    pub m_top: f64,
    pub p_top: f64,
}

impl UpstreamSpec {
    pub fn check(&self, n: usize) -> Result<()> {
        if !(self.m_top > 1.0) {
            return Err(Error::Precondition(format!("top Mach number {} must exceed 1", self.m_top)));
        }
        if !(self.p_top > 0.0) {
            return Err(Error::Precondition(format!("top pressure {} must be positive", self.p_top)));
        }
        let umin = linspace(0.0, 1.0, n).into_iter().map(|x| self.u_minus.eval(x)).fold(f64::INFINITY, f64::min);
        if !(umin > 0.0) {
            return Err(Error::Precondition(format!("upstream velocity must stay positive (min {umin})")));
        }
        Ok(())
    }
}

/// A sampled profile on the background grid with a spline evaluator.
#[derive(Debug, Clone)]
pub struct Profile {
    pub values: Vec<f64>,
    spline: CubicSpline,
}

impl Profile {
    pub fn new(x: &[f64], values: Vec<f64>) -> Result<Self> {
        let spline = CubicSpline::new(x.to_vec(), values.clone())?;
        Ok(Profile { values, spline })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.spline.eval(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.spline.deriv(t)
    }
}

#[derive(Debug, Clone)]
pub struct Extended {
    pub grid: Vec<f64>,
    pub rho_m: Vec<f64>,
    pub u_m: Vec<f64>,
    pub p_m: Vec<f64>,
    pub rho_p: Vec<f64>,
    pub u_p: Vec<f64>,
    pub p_p: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BackgroundSolution {
    pub gas: GasModel,
    pub grid_x2: Vec<f64>,
    pub d: Profile,
    pub rho_m: Profile,
    pub u_m: Profile,
    pub p_m: Profile,
    pub rho_p: Profile,
    pub u_p: Profile,
    pub p_p: Profile,
    pub s_m: Profile,
    pub b_m: Profile,
    pub s_p: Profile,
    pub b_p: Profile,
    pub extended: Extended,
}

impl BackgroundSolution {
    pub fn state_minus(&self, x2: f64) -> GasState {
        GasState { rho: self.rho_m.eval(x2), u1: self.u_m.eval(x2), u2: 0.0, p: self.p_m.eval(x2) }
    }

    pub fn state_plus(&self, x2: f64) -> GasState {
        GasState { rho: self.rho_p.eval(x2), u1: self.u_p.eval(x2), u2: 0.0, p: self.p_p.eval(x2) }
    }

    /// Upstream mass flux density at x2.
    pub fn flux(&self, x2: f64) -> f64 {
        self.rho_m.eval(x2) * self.u_m.eval(x2)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let cols: Vec<(&str, &[f64])> = vec![
            ("x2", &self.grid_x2),
            ("d", &self.d.values),
            ("rho_m", &self.rho_m.values),
            ("u_m", &self.u_m.values),
            ("P_m", &self.p_m.values),
            ("rho_p", &self.rho_p.values),
            ("u_p", &self.u_p.values),
            ("P_p", &self.p_p.values),
        ];
        crate::io::write_columns(path, &cols)
    }
}

/// d = 1/M^2 of the upstream flow on a uniform grid of n nodes in [0,1].
pub fn solve_mach_profile(spec: &UpstreamSpec, gas: &GasModel, n: usize) -> Result<Vec<f64>> {
    spec.check(n)?;
    let x = linspace(0.0, 1.0, n);
    let d_top = 1.0 / (spec.m_top * spec.m_top);
    let bg = gas.beta * gas.gamma;
    let expo = cum_simpson_to_end(&|t| bg / spec.u_minus.eval(t), &x);
    Ok(expo.iter().map(|&e| 1.0 + (d_top - 1.0) * (-e).exp()).collect())
}

/// Upstream (rho, u, P) on the grid of `d`.
pub fn upstream_state(spec: &UpstreamSpec, d: &[f64], gas: &GasModel) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let x = linspace(0.0, 1.0, n);
    let d_top = 1.0 / (spec.m_top * spec.m_top);
    let bg = gas.beta * gas.gamma;
    // d evaluated off-grid by integrating from the next node up
    let inner = cum_simpson_to_end(&|t| bg / spec.u_minus.eval(t), &x);
    let h = 1.0 / (n - 1) as f64;
    let d_at = |t: f64| {
        let i = ((t / h).floor() as usize).min(n - 2);
        let e = inner[i + 1] + crate::numerics::simpson(&|s| bg / spec.u_minus.eval(s), t, x[i + 1]);
        1.0 + (d_top - 1.0) * (-e).exp()
    };
    let expo = cum_simpson_to_end(&|t| bg / (d_at(t) * spec.u_minus.eval(t)), &x);
    let u: Vec<f64> = x.iter().map(|&t| spec.u_minus.eval(t)).collect();
    let p: Vec<f64> = expo.iter().map(|&e| spec.p_top * e.exp()).collect();
    let rho: Vec<f64> = (0..n).map(|i| gas.gamma * p[i] / (d[i] * u[i] * u[i])).collect();
    Ok((rho, u, p))
}

/// Normal-shock downstream state of a single upstream state.
pub fn normal_shock(up: &GasState, gas: &GasModel) -> GasState {
    let g = gas.gamma;
    let b = bernoulli(up.rho, up.u1 * up.u1, up.p, g);
    let u = 2.0 * (g - 1.0) * b / ((g + 1.0) * up.u1);
    let p = 2.0 * up.rho * up.u1 * up.u1 / (g + 1.0) - (g - 1.0) * up.p / (g + 1.0);
    let rho = up.rho * up.u1 / u;
    GasState { rho, u1: u, u2: 0.0, p }
}

pub fn downstream_state(
    rho_m: &[f64],
    u_m: &[f64],
    p_m: &[f64],
    gas: &GasModel,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = rho_m.len();
    let (mut rho, mut u, mut p) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let up = GasState { rho: rho_m[i], u1: u_m[i], u2: 0.0, p: p_m[i] };
        up.check()?;
        let mach = u_m[i] / (gas.gamma * p_m[i] / rho_m[i]).sqrt();
        if !(mach > 1.0) {
            let x2 = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            return Err(Error::NotSupersonic { x2, mach });
        }
        let dn = normal_shock(&up, gas);
        rho[i] = dn.rho;
        u[i] = dn.u1;
        p[i] = dn.p;
    }
    Ok((rho, u, p))
}

/// Signed jumps (right - left) of mass flux, normal momentum flux and Bernoulli.
pub fn rh_residual(left: &GasState, right: &GasState, gas: &GasModel) -> (f64, f64, f64) {
    let mass = right.rho * right.u1 - left.rho * left.u1;
    let mom = (right.rho * right.u1 * right.u1 + right.p) - (left.rho * left.u1 * left.u1 + left.p);
    let bern = bernoulli(right.rho, right.speed2(), right.p, gas.gamma) - bernoulli(left.rho, left.speed2(), left.p, gas.gamma);
    (mass, mom, bern)
}

/// Coefficients c_k with sum_k c_k (-1/k)^p = 1 for p = 0..3.
pub fn extension_coefficients() -> [f64; 4] {
    let a = Matrix4::from_fn(|p, k| (-1.0 / (k + 1) as f64).powi(p as i32));
    let c = a.lu().solve(&Vector4::repeat(1.0)).expect("Vandermonde matrix with distinct nodes");
    [c[0], c[1], c[2], c[3]]
}

/// Reflection extension of a profile on [0,1] to [0,2].
pub fn extend_profile(f: &impl Fn(f64) -> f64, c: &[f64; 4], y: f64) -> f64 {
    if y <= 1.0 {
        return f(y);
    }
    (0..4).map(|k| c[k] * f(1.0 + (1.0 - y) / (k + 1) as f64)).sum()
}

pub fn build(spec: &UpstreamSpec, gas: &GasModel, n: usize) -> Result<BackgroundSolution> {
    let x = linspace(0.0, 1.0, n);
    let d = solve_mach_profile(spec, gas, n)?;
    let (rho_m, u_m, p_m) = upstream_state(spec, &d, gas)?;
    let (rho_p, u_p, p_p) = downstream_state(&rho_m, &u_m, &p_m, gas)?;
    let g = gas.gamma;
    let s_m: Vec<f64> = (0..n).map(|i| entropy(rho_m[i], p_m[i], g)).collect();
    let b_m: Vec<f64> = (0..n).map(|i| bernoulli(rho_m[i], u_m[i] * u_m[i], p_m[i], g)).collect();
    let s_p: Vec<f64> = (0..n).map(|i| entropy(rho_p[i], p_p[i], g)).collect();
    let b_p: Vec<f64> = (0..n).map(|i| bernoulli(rho_p[i], u_p[i] * u_p[i], p_p[i], g)).collect();

    let c = extension_coefficients();
    let ext_grid = linspace(0.0, 2.0, 2 * n - 1);
    let mk = |vals: &Vec<f64>| -> Result<(Profile, Vec<f64>)> {
        let prof = Profile::new(&x, vals.clone())?;
        let ext = ext_grid.iter().map(|&t| extend_profile(&|s| prof.eval(s), &c, t)).collect();
        Ok((prof, ext))
    };
    let (rho_m, e_rho_m) = mk(&rho_m)?;
    let (u_m, e_u_m) = mk(&u_m)?;
    let (p_m, e_p_m) = mk(&p_m)?;
    let (rho_p, e_rho_p) = mk(&rho_p)?;
    let (u_p, e_u_p) = mk(&u_p)?;
    let (p_p, e_p_p) = mk(&p_p)?;
    Ok(BackgroundSolution {
        gas: *gas,
        d: Profile::new(&x, d)?,
        rho_m,
        u_m,
        p_m,
        rho_p,
        u_p,
        p_p,
        s_m: Profile::new(&x, s_m)?,
        b_m: Profile::new(&x, b_m)?,
        s_p: Profile::new(&x, s_p)?,
        b_p: Profile::new(&x, b_p)?,
        extended: Extended {
            grid: ext_grid,
            rho_m: e_rho_m,
            u_m: e_u_m,
            p_m: e_p_m,
            rho_p: e_rho_p,
            u_p: e_u_p,
            p_p: e_p_p,
        },
        grid_x2: x,
    })
}

/// Pointwise R-H residuals of the constructed background, max over the grid.
pub fn max_rh_residual(bg: &BackgroundSolution) -> f64 {
    let n = bg.grid_x2.len();
    (0..n)
        .map(|i| {
            let l = GasState { rho: bg.rho_m.values[i], u1: bg.u_m.values[i], u2: 0.0, p: bg.p_m.values[i] };
            let r = GasState { rho: bg.rho_p.values[i], u1: bg.u_p.values[i], u2: 0.0, p: bg.p_p.values[i] };
            let (a, b, c) = rh_residual(&l, &r, &bg.gas);
            a.abs().max(b.abs()).max(c.abs())
        })
        .fold(0.0, f64::max)
}
