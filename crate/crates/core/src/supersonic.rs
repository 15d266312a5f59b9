//! Supersonic region ahead of the shock.
//!
//! Both the linearized and the nonlinear problem are discretized the same way: a
//! summation-by-parts first derivative in y2 (trapezoid norm, so wall fluxes telescope)
//! and Crank-Nicolson in y1. The linear scheme is then exactly the linearization of the
//! nonlinear one, which keeps the nonlinear-minus-linear difference quadratic in sigma
//! at the discrete level. The nonlinear problem is solved by Picard sweeps that reuse
//! the background step matrix.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::lagrangian::{characteristic_speeds, inflow_map, mass_fluxes, Field, Grid, HatPoint, Hatted, Perturbation, Speeds};
use crate::numerics::{simpson_samples, trap_weights};
use crate::thermo::{rho_p_from_entropy_enthalpy, CharState};

pub const NAMES: [&str; 4] = ["u1", "u2", "S", "B"];

/// Residual of the step from row i to i + 1.
type RowResidual<'a> = dyn Fn(usize, &Row, &Row) -> Result<Vec<f64>> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// fields hold the perturbation of the background
    Linear,
    /// fields hold the full state
    Nonlinear,
}

#[derive(Debug, Clone, Copy)]
pub struct SupersonicOptions {
    pub n1: usize,
    pub n2: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// largest admissible sigma for the nonlinear solve
    pub sigma_max: f64,
}

impl Default for SupersonicOptions {
    fn default() -> Self {
        SupersonicOptions { n1: 257, n2: 65, tol: 1e-12, max_iter: 50, sigma_max: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct SupersonicSolution {
    pub v: Field,
    pub kind: Kind,
    pub picard_iters: usize,
    pub final_update: f64,
    pub history: Vec<f64>,
    pub m: f64,
    pub m_bar: f64,
}

impl SupersonicSolution {
    /// Ratio of successive Picard updates, the observed contraction rate.
    pub fn contraction_rate(&self) -> Option<f64> {
        let h = &self.history;
        (h.len() >= 3).then(|| h[h.len() - 2] / h[h.len() - 3])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FluxReport {
    pub max_violation: f64,
    pub worst_y1: f64,
}

/// Entropy and Bernoulli rows carried unchanged along y1.
pub fn transport_sb(grid: &Grid, s_in: &[f64], b_in: &[f64]) -> (Array2<f64>, Array2<f64>) {
    let mut s = grid.zeros();
    let mut b = grid.zeros();
    for i in 0..grid.n1 {
        s.row_mut(i).assign(&ndarray::ArrayView1::from(s_in));
        b.row_mut(i).assign(&ndarray::ArrayView1::from(b_in));
    }
    (s, b)
}

/// SBP first derivative with the trapezoid norm.
pub fn sbp_d(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    d[0] = (f[1] - f[0]) / h;
    d[n - 1] = (f[n - 1] - f[n - 2]) / h;
    for j in 1..n - 1 {
        d[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
    }
    d
}

fn sbp_matrix(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    d[(0, 0)] = -1.0 / h;
    d[(0, 1)] = 1.0 / h;
    d[(n - 1, n - 2)] = -1.0 / h;
    d[(n - 1, n - 1)] = 1.0 / h;
    for j in 1..n - 1 {
        d[(j, j - 1)] = -0.5 / h;
        d[(j, j + 1)] = 0.5 / h;
    }
    d
}

#[derive(Clone)]
struct Row {
    u1: Vec<f64>,
    u2: Vec<f64>,
}

/// Background coefficients and the factored step matrix.
struct Marcher {
    grid: Grid,
    hat: Vec<HatPoint>,
    /// d(1/(rho u1))/du1 at the background
    dq: Vec<f64>,
    kappa: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Marcher {
    fn new(grid: Grid, hat: Vec<HatPoint>, kappa: f64) -> Result<Self> {
        let n2 = grid.n2;
        let (h1, h2) = (grid.h1(), grid.h2());
        let dq: Vec<f64> = hat.iter().map(|p| -(1.0 - p.mach2) / (p.rho * p.u * p.u)).collect();
        let d = sbp_matrix(n2, h2);
        let nu = 2 * n2 - 2;
        let mut a = DMatrix::zeros(nu, nu);
        let c = 0.5 * h1 * kappa;
        for j in 0..n2 {
            a[(j, j)] = dq[j];
            for k in 1..n2 - 1 {
                a[(j, n2 + k - 1)] -= c * d[(j, k)] / hat[k].u;
            }
        }
        for j in 1..n2 - 1 {
            let r = n2 + j - 1;
            a[(r, r)] = 1.0;
            for k in 0..n2 {
                a[(r, k)] -= c * d[(j, k)] * hat[k].rho * hat[k].u;
            }
        }
        let lu = a.lu();
        if lu.determinant().abs() < f64::MIN_POSITIVE {
            return Err(Error::LinearSolver { iterations: 0, residual: f64::NAN });
        }
        Ok(Marcher { grid, hat, dq, kappa, lu })
    }

    /// B applied to the previous-step correction.
    fn old_part(&self, d1: &[f64], d2: &[f64]) -> Vec<f64> {
        let n2 = self.grid.n2;
        let (h1, h2) = (self.grid.h1(), self.grid.h2());
        let c = 0.5 * h1 * self.kappa;
        let w: Vec<f64> = (0..n2).map(|k| d2[k] / self.hat[k].u).collect();
        let p: Vec<f64> = (0..n2).map(|k| -self.hat[k].rho * self.hat[k].u * d1[k]).collect();
        let dw = sbp_d(&w, h2);
        let dp = sbp_d(&p, h2);
        let mut out = vec![0.0; 2 * n2 - 2];
        for j in 0..n2 {
            out[j] = -self.dq[j] * d1[j] - c * dw[j];
        }
        for j in 1..n2 - 1 {
            out[n2 + j - 1] = -d2[j] + c * dp[j];
        }
        out
    }

    /// One sweep: corrections solving A d^{n+1} = -(R^{n+1} + B d^n) with R from the current iterate.
    fn sweep(&self, rows: &[Row], res: &RowResidual) -> Result<Vec<Row>> {
        let (n1, n2) = (self.grid.n1, self.grid.n2);
        let mut out = vec![Row { u1: vec![0.0; n2], u2: vec![0.0; n2] }; n1];
        for i in 0..n1 - 1 {
            let r = res(i, &rows[i], &rows[i + 1])?;
            let b = self.old_part(&out[i].u1, &out[i].u2);
            let rhs = DVector::from_iterator(r.len(), r.iter().zip(&b).map(|(x, y)| -(x + y)));
            let x = self.lu.solve(&rhs).ok_or(Error::LinearSolver { iterations: 0, residual: f64::NAN })?;
            let next = &mut out[i + 1];
            next.u1.copy_from_slice(&x.as_slice()[..n2]);
            next.u2[1..n2 - 1].copy_from_slice(&x.as_slice()[n2..]);
        }
        Ok(out)
    }
}

fn check_cfl(grid: &Grid, states: &[(CharState, f64)], m: f64, m_bar: f64, gas: &crate::thermo::GasModel) -> Result<()> {
    let mut worst: f64 = 0.0;
    for (c, rho) in states {
        match characteristic_speeds(c, *rho, m, m_bar, gas)? {
            Speeds::Real { plus, minus } => {
                let lam = plus.abs().min(minus.abs());
                worst = worst.max(1.0 / lam);
            }
            Speeds::ComplexPair => {
                return Err(Error::LostSupersonic { min_mach2: c.speed2() / ((gas.gamma - 1.0) * c.enthalpy()) })
            }
        }
    }
    let ratio = grid.h1() * worst / grid.h2();
    if ratio > 1.0 {
        return Err(Error::Cfl { ratio });
    }
    Ok(())
}

fn assemble(grid: Grid, rows: &[Row], s: &[f64], b: &[f64]) -> Field {
    let mut v = Field::new(grid, &NAMES);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..grid.n2 {
            v.data[0][[i, j]] = r.u1[j];
            v.data[1][[i, j]] = r.u2[j];
        }
    }
    let (sf, bf) = transport_sb(&grid, s, b);
    v.data[2] = sf;
    v.data[3] = bf;
    v
}

/// First-order change of m_bar/m under the inflow perturbation.
pub fn linear_dkappa(hat: &Hatted, pert: &Perturbation) -> f64 {
    let bg = &hat.bg;
    let x = &bg.grid_x2;
    let dens: Vec<f64> = x.iter().map(|&t| bg.rho_m.eval(t) * pert.u1_en.eval(t)).collect();
    -pert.sigma * simpson_samples(&dens, x[1] - x[0]) / hat.m_bar
}

/// Linearized supersonic problem on [0,L] x [0,m_bar]; fields are the perturbation.
pub fn solve_linear(hat: &Hatted, pert: &Perturbation, n1: usize, n2: usize) -> Result<SupersonicSolution> {
    pert.check()?;
    let bg = &hat.bg;
    let gas = bg.gas;
    let sigma = pert.sigma;
    let m_bar = hat.m_bar;
    let grid = Grid::new(n1, n2, 0.0, pert.geometry.length, m_bar, m_bar)?;
    let h1 = grid.h1();
    let pts = hat.sample_minus(n2);
    let states: Vec<(CharState, f64)> =
        pts.iter().map(|p| (CharState { u1: p.u, u2: 0.0, s: p.s, b: p.b }, p.rho)).collect();
    check_cfl(&grid, &states, m_bar, m_bar, &gas)?;

    let dkappa = linear_dkappa(hat, pert);

    let s_in: Vec<f64> = pts.iter().map(|p| sigma * pert.s_en.eval(p.x2)).collect();
    let b_in: Vec<f64> = pts.iter().map(|p| sigma * pert.b_en.eval(p.x2)).collect();
    let gm1 = gas.gamma - 1.0;
    let fixed: Vec<f64> = (0..n2).map(|j| pts[j].rho * b_in[j] - pts[j].p * s_in[j] / gm1).collect();
    let dfixed = sbp_d(&fixed, grid.h2());

    let marcher = Marcher::new(grid, pts.clone(), 1.0)?;
    let top_u = pts[n2 - 1].u;
    let mut rows = vec![Row { u1: vec![0.0; n2], u2: vec![0.0; n2] }; n1];
    for j in 0..n2 {
        rows[0].u1[j] = sigma * pert.u1_en.eval(pts[j].x2);
        rows[0].u2[j] = sigma * pert.u2_en.eval(pts[j].x2);
    }
    rows[0].u2[0] = 0.0;
    rows[0].u2[n2 - 1] = 0.0;
    for (i, r) in rows.iter_mut().enumerate() {
        r.u2[n2 - 1] = sigma * top_u * pert.geometry.g.deriv(grid.y1(i));
    }

    let h2 = grid.h2();
    let res = |_: usize, a: &Row, b: &Row| -> Result<Vec<f64>> {
        let w = |r: &Row| sbp_d(&(0..n2).map(|k| r.u2[k] / pts[k].u).collect::<Vec<_>>(), h2);
        let p = |r: &Row| sbp_d(&(0..n2).map(|k| -pts[k].rho * pts[k].u * r.u1[k]).collect::<Vec<_>>(), h2);
        let (wa, wb, pa, pb) = (w(a), w(b), p(a), p(b));
        let mut out = vec![0.0; 2 * n2 - 2];
        for j in 0..n2 {
            out[j] = marcher.dq[j] * (b.u1[j] - a.u1[j]) - 0.5 * h1 * (wa[j] + wb[j]);
        }
        for j in 1..n2 - 1 {
            out[n2 + j - 1] = b.u2[j] - a.u2[j] + 0.5 * h1 * (pa[j] + pb[j]) + h1 * dfixed[j] - h1 * gas.beta * dkappa;
        }
        Ok(out)
    };
    let corr = marcher.sweep(&rows, &res)?;
    let mut update: f64 = 0.0;
    for (r, c) in rows.iter_mut().zip(&corr) {
        for j in 0..n2 {
            r.u1[j] += c.u1[j];
            r.u2[j] += c.u2[j];
            update = update.max(c.u1[j].abs()).max(c.u2[j].abs());
        }
    }
    Ok(SupersonicSolution {
        v: assemble(grid, &rows, &s_in, &b_in),
        kind: Kind::Linear,
        picard_iters: 1,
        final_update: update,
        history: vec![update],
        m: m_bar,
        m_bar,
    })
}

/// Check of int b1 du1 dy2 = sigma int b1 u1_en - sigma b2(m_bar) u(m_bar) g(y1) on a linear solution.
/// b1, b2 are the closed forms of the exponential-integral weights.
pub fn flux_identity(hat: &Hatted, pert: &Perturbation, sol: &SupersonicSolution) -> FluxReport {
    let bg = &hat.bg;
    let g = sol.v.grid;
    let pts = hat.sample_minus(g.n2);
    let u0 = pts[0].u;
    let b1: Vec<f64> = pts.iter().map(|p| (1.0 - p.mach2) * (u0 / p.u) / (p.rho * p.u)).collect();
    let top = &pts[g.n2 - 1];
    let b2_top = u0 / top.u;
    // inflow integral in x2, where b1 dy2 = u(0)(1-M^2)/u dx2
    let x = &bg.grid_x2;
    let f: Vec<f64> = x
        .iter()
        .map(|&t| {
            let (r, u, p) = (bg.rho_m.eval(t), bg.u_m.eval(t), bg.p_m.eval(t));
            let mach2 = u * u * r / (bg.gas.gamma * p);
            u0 * (1.0 - mach2) / u * pert.u1_en.eval(t)
        })
        .collect();
    let inflow = simpson_samples(&f, x[1] - x[0]);
    let w = trap_weights(g.n2, g.h2());
    let u1 = sol.v.get("u1");
    let mut rep = FluxReport { max_violation: 0.0, worst_y1: 0.0 };
    for i in 0..g.n1 {
        let lhs: f64 = (0..g.n2).map(|j| w[j] * b1[j] * u1[[i, j]]).sum();
        let y1 = g.y1(i);
        let rhs = pert.sigma * (inflow - b2_top * top.u * pert.geometry.g.eval(y1));
        let e = (lhs - rhs).abs();
        if e > rep.max_violation {
            rep = FluxReport { max_violation: e, worst_y1: y1 };
        }
    }
    rep
}

/// Nonlinear supersonic problem; fields are the full state.
pub fn solve_nonlinear(hat: &Hatted, pert: &Perturbation, opts: &SupersonicOptions) -> Result<SupersonicSolution> {
    pert.check()?;
    let sigma = pert.sigma;
    if sigma > opts.sigma_max {
        return Err(Error::Precondition(format!("sigma {sigma} exceeds the supersonic threshold {}", opts.sigma_max)));
    }
    let bg = &hat.bg;
    let gas = bg.gas;
    let (n1, n2) = (opts.n1, opts.n2);
    let (m, m_bar) = mass_fluxes(bg, pert)?;
    let kappa = m_bar / m;
    let grid = Grid::new(n1, n2, 0.0, pert.geometry.length, m, m_bar)?;
    let (h1, h2) = (grid.h1(), grid.h2());
    let pts = hat.sample_minus(n2);
    let map = inflow_map(bg, pert, m, m_bar)?;

    let mut inflow = Vec::with_capacity(n2);
    for (j, p) in pts.iter().enumerate() {
        let x = map.invert(grid.y2(j));
        let c = CharState {
            u1: p.u + sigma * pert.u1_en.eval(x),
            u2: if j == 0 || j == n2 - 1 { 0.0 } else { sigma * pert.u2_en.eval(x) },
            s: p.s + sigma * pert.s_en.eval(x),
            b: p.b + sigma * pert.b_en.eval(x),
        };
        let (rho, _) = rho_p_from_entropy_enthalpy(c.s, c.enthalpy(), c.b, gas.gamma)?;
        inflow.push((c, rho));
    }
    check_cfl(&grid, &inflow, m, m_bar, &gas)?;
    let s_row: Vec<f64> = inflow.iter().map(|(c, _)| c.s).collect();
    let b_row: Vec<f64> = inflow.iter().map(|(c, _)| c.b).collect();
    let gp: Vec<f64> = (0..n1).map(|i| pert.geometry.g.deriv(grid.y1(i))).collect();

    let marcher = Marcher::new(grid, pts.clone(), kappa)?;
    let mut rows: Vec<Row> = (0..n1)
        .map(|_| Row { u1: inflow.iter().map(|(c, _)| c.u1).collect(), u2: inflow.iter().map(|(c, _)| c.u2).collect() })
        .collect();
    let set_walls = |rows: &mut Vec<Row>| {
        for (i, r) in rows.iter_mut().enumerate().skip(1) {
            r.u2[0] = 0.0;
            r.u2[n2 - 1] = sigma * gp[i] * r.u1[n2 - 1];
        }
    };
    set_walls(&mut rows);

    let thermo_row = |r: &Row| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut q = vec![0.0; n2];
        let mut p = vec![0.0; n2];
        for j in 0..n2 {
            if !(r.u1[j] > 0.0) {
                return Err(Error::FlowReversal { x2: grid.y2(j), value: r.u1[j] });
            }
            let h = b_row[j] - 0.5 * (r.u1[j] * r.u1[j] + r.u2[j] * r.u2[j]);
            let (rho, pr) = rho_p_from_entropy_enthalpy(s_row[j], h, b_row[j], gas.gamma)?;
            q[j] = 1.0 / (rho * r.u1[j]);
            p[j] = pr - pts[j].p;
        }
        Ok((q, p))
    };
    let res = |_: usize, a: &Row, b: &Row| -> Result<Vec<f64>> {
        let (qa, pa) = thermo_row(a)?;
        let (qb, pb) = thermo_row(b)?;
        let wa = sbp_d(&(0..n2).map(|k| a.u2[k] / a.u1[k]).collect::<Vec<_>>(), h2);
        let wb = sbp_d(&(0..n2).map(|k| b.u2[k] / b.u1[k]).collect::<Vec<_>>(), h2);
        let (dpa, dpb) = (sbp_d(&pa, h2), sbp_d(&pb, h2));
        let c = 0.5 * h1 * kappa;
        let mut out = vec![0.0; 2 * n2 - 2];
        for j in 0..n2 {
            out[j] = qb[j] - qa[j] - c * (wa[j] + wb[j]);
        }
        for j in 1..n2 - 1 {
            out[n2 + j - 1] = b.u2[j] - a.u2[j] + c * (dpa[j] + dpb[j]) + h1 * gas.beta * (1.0 - kappa);
        }
        Ok(out)
    };

    let mut history = Vec::new();
    let mut theta = 1.0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let corr = marcher.sweep(&rows, &res)?;
        let upd = corr.iter().flat_map(|c| c.u1.iter().chain(&c.u2)).fold(0.0f64, |a, v| a.max(v.abs()));
        if let Some(&prev) = history.last() {
            if upd > prev {
                theta = 0.8;
            }
        }
        history.push(upd);
        for (r, c) in rows.iter_mut().zip(&corr) {
            for j in 0..n2 {
                r.u1[j] += theta * c.u1[j];
                r.u2[j] += theta * c.u2[j];
            }
        }
        set_walls(&mut rows);
        if !upd.is_finite() {
            break;
        }
        if upd <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Picard { history });
    }

    let v = assemble(grid, &rows, &s_row, &b_row);
    let mut min_m2 = f64::INFINITY;
    for r in &rows {
        for j in 0..n2 {
            let c = CharState { u1: r.u1[j], u2: r.u2[j], s: s_row[j], b: b_row[j] };
            min_m2 = min_m2.min(c.speed2() / ((gas.gamma - 1.0) * c.enthalpy()));
        }
    }
    if !(min_m2 > 1.0) {
        return Err(Error::LostSupersonic { min_mach2: min_m2 });
    }
    let final_update = *history.last().unwrap();
    Ok(SupersonicSolution { v, kind: Kind::Nonlinear, picard_iters: history.len(), final_update, history, m, m_bar })
}

/// Background state on the same grid layout as a nonlinear solution.
pub fn background_field(hat: &Hatted, grid: Grid) -> Field {
    let pts = hat.sample_minus(grid.n2);
    let mut v = Field::new(grid, &NAMES);
    for i in 0..grid.n1 {
        for (j, p) in pts.iter().enumerate() {
            v.data[0][[i, j]] = p.u;
            v.data[2][[i, j]] = p.s;
            v.data[3][[i, j]] = p.b;
        }
    }
    v
}

/// Max residual of the nonlinear scheme (conservative form, per unit y1) on a full-state field.
pub fn nonlinear_residual(hat: &Hatted, v: &Field, kappa: f64) -> Result<f64> {
    let g = v.grid;
    let gas = hat.bg.gas;
    let pts = hat.sample_minus(g.n2);
    let (h1, h2) = (g.h1(), g.h2());
    let mut q = g.zeros();
    let mut p = g.zeros();
    for i in 0..g.n1 {
        for j in 0..g.n2 {
            let (u1, u2, s, b) = (v.data[0][[i, j]], v.data[1][[i, j]], v.data[2][[i, j]], v.data[3][[i, j]]);
            let (rho, pr) = rho_p_from_entropy_enthalpy(s, b - 0.5 * (u1 * u1 + u2 * u2), b, gas.gamma)?;
            q[[i, j]] = 1.0 / (rho * u1);
            p[[i, j]] = pr - pts[j].p;
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..g.n1 - 1 {
        let w = |k: usize| sbp_d(&(0..g.n2).map(|j| v.data[1][[k, j]] / v.data[0][[k, j]]).collect::<Vec<_>>(), h2);
        let (wa, wb) = (w(i), w(i + 1));
        let dpa = sbp_d(&p.row(i).to_vec(), h2);
        let dpb = sbp_d(&p.row(i + 1).to_vec(), h2);
        for j in 0..g.n2 {
            let r1 = (q[[i + 1, j]] - q[[i, j]]) / h1 - 0.5 * kappa * (wa[j] + wb[j]);
            worst = worst.max(r1.abs());
            if j > 0 && j < g.n2 - 1 {
                let r3 = (v.data[1][[i + 1, j]] - v.data[1][[i, j]]) / h1
                    + 0.5 * kappa * (dpa[j] + dpb[j])
                    + gas.beta * (1.0 - kappa);
                worst = worst.max(r3.abs());
            }
        }
    }
    Ok(worst)
}
