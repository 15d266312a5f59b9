//! Mass-flux coordinates, hatted background profiles and characteristic speeds.

use std::path::Path;

use ndarray::Array2;

use crate::background::BackgroundSolution;
use crate::error::{Error, Result};
use crate::numerics::{cum_simpson_from_start, cumtrapz, linspace, simpson_samples, CubicSpline, Func};
use crate::thermo::{from_char, CharState, GasModel};

#[derive(Debug, Clone)]
pub struct Geometry {
    pub length: f64,
    pub g: Func,
    pub sigma: f64,
}

impl Geometry {
    /// Wall offset function and its derivatives at the inlet must vanish.
    pub fn check(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::Precondition(format!("nozzle length {} must be positive", self.length)));
        }
        let d = self.g.eval_d(0.0);
        let scale = 1.0 + crate::numerics::max_abs((0..=16).map(|k| self.g.eval(self.length * k as f64 / 16.0)));
        if d.iter().any(|v| v.abs() > 1e-12 * scale) {
            return Err(Error::Precondition(format!("wall perturbation must vanish to third order at the inlet, got {d:?}")));
        }
        Ok(())
    }
}

/// Inflow and exit perturbation data, functions of the Eulerian x2 in [0,1].
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub sigma: f64,
    pub u1_en: Func,
    pub u2_en: Func,
    pub s_en: Func,
    pub b_en: Func,
    pub p_ex: Func,
    pub geometry: Geometry,
}

impl Perturbation {
    pub fn check(&self) -> Result<()> {
        self.geometry.check()?;
        let (a, b) = (self.u2_en.eval(0.0), self.u2_en.eval(1.0));
        if a.abs() > 1e-12 || b.abs() > 1e-12 {
            return Err(Error::Precondition(format!("u2_en must vanish at both walls, got {a} and {b}")));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Precondition(format!("sigma {} must be non-negative", self.sigma)));
        }
        Ok(())
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut p = self.clone();
        p.sigma = sigma;
        p.geometry.sigma = sigma;
        p
    }
}

/// Rectangle [y1a, y1b] x [0, m_bar] with n1 x n2 nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub y1a: f64,
    pub y1b: f64,
    pub m: f64,
    pub m_bar: f64,
}

impl Grid {
    pub fn new(n1: usize, n2: usize, y1a: f64, y1b: f64, m: f64, m_bar: f64) -> Result<Self> {
        if n1 < 4 || n2 < 4 || !(y1b > y1a) || !(m > 0.0) || !(m_bar > 0.0) {
            return Err(Error::Precondition(format!("bad grid {n1}x{n2} on [{y1a},{y1b}] with m={m}, m_bar={m_bar}")));
        }
        Ok(Grid { n1, n2, y1a, y1b, m, m_bar })
    }

    pub fn h1(&self) -> f64 {
        (self.y1b - self.y1a) / (self.n1 - 1) as f64
    }

    pub fn h2(&self) -> f64 {
        self.m_bar / (self.n2 - 1) as f64
    }

    pub fn y1(&self, i: usize) -> f64 {
        if i == self.n1 - 1 {
            self.y1b
        } else {
            self.y1a + self.h1() * i as f64
        }
    }

    pub fn y2(&self, j: usize) -> f64 {
        if j == self.n2 - 1 {
            self.m_bar
        } else {
            self.h2() * j as f64
        }
    }

    pub fn y2s(&self) -> Vec<f64> {
        (0..self.n2).map(|j| self.y2(j)).collect()
    }

    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros((self.n1, self.n2))
    }
}

/// Named nodal components on a grid, indexed [i1, i2].
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Grid,
    pub names: Vec<String>,
    pub data: Vec<Array2<f64>>,
}

impl Field {
    pub fn new(grid: Grid, names: &[&str]) -> Self {
        Field { grid, names: names.iter().map(|s| s.to_string()).collect(), data: names.iter().map(|_| grid.zeros()).collect() }
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        let k = self.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no component {name}"));
        &self.data[k]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        let k = self.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no component {name}"));
        &mut self.data[k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flat_map(|a| a.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Column of one component at an arbitrary y1, by four-point interpolation along y1.
    pub fn column_at(&self, name: &str, y1: f64) -> Vec<f64> {
        let a = self.get(name);
        let g = self.grid;
        (0..g.n2).map(|j| crate::numerics::cubic_uniform(&a.column(j).to_vec(), g.y1a, g.h1(), y1)).collect()
    }

    /// Dump with columns y1,y2,<components>[,x2].
    pub fn write_csv(&self, path: &Path, x2: Option<&Array2<f64>>) -> Result<()> {
        let g = self.grid;
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["y1".to_string(), "y2".to_string()];
        header.extend(self.names.iter().cloned());
        if x2.is_some() {
            header.push("x2".into());
        }
        w.write_record(&header)?;
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                let mut rec = vec![crate::io::fmt17(g.y1(i)), crate::io::fmt17(g.y2(j))];
                rec.extend(self.data.iter().map(|a| crate::io::fmt17(a[[i, j]])));
                if let Some(x) = x2 {
                    rec.push(crate::io::fmt17(x[[i, j]]));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Inflow state at Eulerian height x2 with perturbation amplitude sigma.
pub fn inflow_state(bg: &BackgroundSolution, pert: &Perturbation, x2: f64) -> Result<(CharState, f64)> {
    let s = pert.sigma;
    let c = CharState {
        u1: bg.u_m.eval(x2) + s * pert.u1_en.eval(x2),
        u2: s * pert.u2_en.eval(x2),
        s: bg.s_m.eval(x2) + s * pert.s_en.eval(x2),
        b: bg.b_m.eval(x2) + s * pert.b_en.eval(x2),
    };
    let rho = from_char(&c, &bg.gas)?.rho;
    Ok((c, rho))
}

/// Flux density used to define the perturbed mass-flux coordinate at the inlet.
pub fn inflow_flux_density(bg: &BackgroundSolution, pert: &Perturbation, x2: f64) -> Result<f64> {
    let (_, rho_en) = inflow_state(bg, pert, x2)?;
    Ok(bg.flux(x2) + pert.sigma * rho_en * pert.u1_en.eval(x2))
}

/// Total mass fluxes (m, m_bar).
pub fn mass_fluxes(bg: &BackgroundSolution, pert: &Perturbation) -> Result<(f64, f64)> {
    let x = &bg.grid_x2;
    let h = x[1] - x[0];
    let mut base = Vec::with_capacity(x.len());
    let mut pert_flux = Vec::with_capacity(x.len());
    for &t in x {
        let q = bg.flux(t);
        let f = inflow_flux_density(bg, pert, t)?;
        if !(q > 0.0) {
            return Err(Error::FlowReversal { x2: t, value: q });
        }
        if !(f > 0.0) {
            return Err(Error::FlowReversal { x2: t, value: f });
        }
        base.push(q);
        pert_flux.push(f);
    }
    let m_bar = simpson_samples(&base, h);
    let m = if pert.sigma == 0.0 { m_bar } else { simpson_samples(&pert_flux, h) };
    Ok((m, m_bar))
}

/// Increasing map x2 -> y2 at the inlet, (m_bar/m) int_0^{x2} of the perturbed flux density.
/// Its inverse places the inflow perturbation data on the mass-flux grid.
pub fn inflow_map(bg: &BackgroundSolution, pert: &Perturbation, m: f64, m_bar: f64) -> Result<CubicSpline> {
    for &t in &bg.grid_x2 {
        let f = inflow_flux_density(bg, pert, t)?;
        if !(f > 0.0) {
            return Err(Error::FlowReversal { x2: t, value: f });
        }
    }
    let x = bg.grid_x2.clone();
    let y = cum_simpson_from_start(&|t| inflow_flux_density(bg, pert, t).unwrap_or(f64::NAN), &x);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("inflow state leaves the admissible range between grid nodes".into()));
    }
    CubicSpline::new(x, y.into_iter().map(|v| v * m_bar / m).collect())
}

/// x2 along a column: (m/m_bar) * int_0^{y2} 1/(rho u1).
pub fn x2_of_y(rho_u1: &[f64], h2: f64, m: f64, m_bar: f64) -> Result<Vec<f64>> {
    let mut inv = Vec::with_capacity(rho_u1.len());
    for (j, &q) in rho_u1.iter().enumerate() {
        if !(q > 0.0) {
            return Err(Error::FlowReversal { x2: j as f64 * h2, value: q });
        }
        inv.push(1.0 / q);
    }
    let scale = m / m_bar;
    Ok(cumtrapz(&inv, h2).into_iter().map(|v| v * scale).collect())
}

/// Pointwise background state in mass-flux coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct HatPoint {
    pub x2: f64,
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub s: f64,
    pub b: f64,
    pub c2: f64,
    pub mach2: f64,
    /// d/dy2 of u and S
    pub du: f64,
    pub ds: f64,
}

/// Background profiles reparametrized by the mass-flux coordinate.
#[derive(Debug, Clone)]
pub struct Hatted {
    pub bg: BackgroundSolution,
    pub m_bar: f64,
    ybar: CubicSpline,
}

impl Hatted {
    pub fn new(bg: &BackgroundSolution) -> Result<Self> {
        let x = bg.grid_x2.clone();
        let y = cum_simpson_from_start(&|t| bg.flux(t), &x);
        let m_bar = *y.last().unwrap();
        Ok(Hatted { bg: bg.clone(), m_bar, ybar: CubicSpline::new(x, y)? })
    }

    /// Inverse of the background mass-flux map.
    pub fn x2_of(&self, y2: f64) -> f64 {
        self.ybar.invert(y2)
    }

    pub fn y2_of(&self, x2: f64) -> f64 {
        self.ybar.eval(x2)
    }

    pub fn minus(&self, y2: f64) -> HatPoint {
        let bg = &self.bg;
        let x = self.x2_of(y2);
        self.point(x, bg.rho_m.eval(x), bg.u_m.eval(x), bg.p_m.eval(x), bg.u_m.deriv(x), bg.s_m.deriv(x))
    }

    pub fn plus(&self, y2: f64) -> HatPoint {
        let bg = &self.bg;
        let x = self.x2_of(y2);
        self.point(x, bg.rho_p.eval(x), bg.u_p.eval(x), bg.p_p.eval(x), bg.u_p.deriv(x), bg.s_p.deriv(x))
    }

    fn point(&self, x: f64, rho: f64, u: f64, p: f64, du_dx: f64, ds_dx: f64) -> HatPoint {
        let g = self.bg.gas.gamma;
        let c2 = g * p / rho;
        let q = self.bg.flux(x);
        HatPoint {
            x2: x,
            rho,
            u,
            p,
            s: crate::thermo::entropy(rho, p, g),
            b: crate::thermo::bernoulli(rho, u * u, p, g),
            c2,
            mach2: u * u / c2,
            du: du_dx / q,
            ds: ds_dx / q,
        }
    }

    pub fn sample_minus(&self, n2: usize) -> Vec<HatPoint> {
        linspace(0.0, self.m_bar, n2).into_iter().map(|y| self.minus(y)).collect()
    }

    pub fn sample_plus(&self, n2: usize) -> Vec<HatPoint> {
        linspace(0.0, self.m_bar, n2).into_iter().map(|y| self.plus(y)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speeds {
    Real { plus: f64, minus: f64 },
    ComplexPair,
}

/// Characteristic roots of the Lagrangian system; y2-slopes of characteristics are 1/lambda.
pub fn characteristic_speeds(state: &CharState, rho: f64, m: f64, m_bar: f64, gas: &GasModel) -> Result<Speeds> {
    let q2 = state.speed2();
    if !(q2 > 0.0) {
        return Err(Error::ZeroSpeed);
    }
    let c2 = (gas.gamma - 1.0) * state.enthalpy();
    let disc = q2 / c2 - 1.0;
    if disc < 0.0 {
        return Ok(Speeds::ComplexPair);
    }
    let root = state.u1 * disc.sqrt();
    let k = m / m_bar / (rho * q2);
    Ok(Speeds::Real { plus: k * (-state.u2 + root), minus: k * (-state.u2 - root) })
}
