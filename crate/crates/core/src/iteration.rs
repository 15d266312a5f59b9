//! Nonlinear transonic iteration: the subsonic region is mapped onto the fixed rectangle
//! [psi_bar, L] x [0, m_bar], and the map T (V_+, psi') -> (V_*, psi_*') is iterated to a fixed point.
//!
//! Each application of T assembles the right-hand sides as (linear operator applied to the
//! current iterate) minus (full nonlinear residual of the current iterate). The linear operator is
//! the b-weighted background linearization, so the quadratic remainders of the transformed system
//! and of the shock, exit and wall conditions enter exactly, and a fixed point solves the
//! discrete nonlinear problem.

use ndarray::Array2;

use crate::elliptic::{compatibility_defect, node_zone, EllipticData, EllipticSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::lagrangian::{x2_of_y, Field, Grid, HatPoint, Hatted, Perturbation};
use crate::numerics::{cubic_uniform, cumtrapz, trap_weights};
use crate::shockfit::{coefficients, initial_approximation, InitialApproximation, InitialOptions, ShockCoefficients};
use crate::supersonic::{nonlinear_residual, solve_nonlinear, SupersonicOptions, SupersonicSolution, NAMES};
use crate::thermo::rho_p_from_entropy_enthalpy;

/// Front-fixing change of variables z1 = (L - psi_bar)/(L - psi(y2)) (y1 - psi(y2)) + psi_bar.
#[derive(Debug, Clone)]
pub struct FixedCoordinates {
    pub psi_bar: f64,
    pub length: f64,
    /// front position per y2 node
    pub psi: Vec<f64>,
}

pub fn fix_coordinates(psi: &[f64], psi_bar: f64, length: f64) -> Result<FixedCoordinates> {
    for &p in psi {
        if !(p < length) || !(p > 0.0) {
            return Err(Error::FrontOutOfRange { psi: p });
        }
    }
    Ok(FixedCoordinates { psi_bar, length, psi: psi.to_vec() })
}

impl FixedCoordinates {
    pub fn z1(&self, y1: f64, j: usize) -> f64 {
        (self.length - self.psi_bar) / (self.length - self.psi[j]) * (y1 - self.psi[j]) + self.psi_bar
    }

    pub fn y1(&self, z1: f64, j: usize) -> f64 {
        z1 + (self.length - z1) / (self.length - self.psi_bar) * (self.psi[j] - self.psi_bar)
    }

    /// d z1 / d y1 along a row
    pub fn stretch(&self, j: usize) -> f64 {
        (self.length - self.psi_bar) / (self.length - self.psi[j])
    }
}

/// psi(y2) = psi_bar + sharp - int_{y2}^{m_bar} psi'.
pub fn front_positions(psi_bar: f64, sharp: f64, psi_prime: &[f64], h2: f64) -> Vec<f64> {
    let cum = cumtrapz(psi_prime, h2);
    let total = *cum.last().unwrap();
    cum.iter().map(|c| psi_bar + sharp - (total - c)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct IterationOptions {
    pub n1_minus: usize,
    pub n1_plus: usize,
    pub n2: usize,
    pub tol_fp: f64,
    pub max_iter: usize,
    /// trust radius is this factor times sigma^{3/2}
    pub trust_factor: f64,
    pub psi_bracket: Option<(f64, f64)>,
    /// fixed base shock position, skipping the J1 = J2 selection
    pub psi_bar: Option<f64>,
    pub elliptic: SolveOptions,
    pub supersonic_sigma_max: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            n1_minus: 129,
            n1_plus: 129,
            n2: 65,
            tol_fp: 1e-10,
            max_iter: 50,
            trust_factor: 1.0,
            psi_bracket: None,
            psi_bar: None,
            elliptic: SolveOptions { lift: true, ..Default::default() },
            supersonic_sigma_max: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationState {
    /// perturbation (u1, u2, S, B) of the subsonic state on the fixed rectangle
    pub w: Field,
    pub psi_prime: Vec<f64>,
    /// psi(m_bar) - psi_bar
    pub psi_sharp: f64,
    pub iter: usize,
    pub update_norm: f64,
}

impl IterationState {
    /// Max-norm distance over the fields, psi' and psi_sharp.
    pub fn distance(&self, other: &IterationState) -> f64 {
        self.field_distance(other).max((self.psi_sharp - other.psi_sharp).abs())
    }

    /// Distance over the fields and psi' only. psi_sharp is an O(sigma) free parameter fixed
    /// by solvability, so the trust region does not constrain it.
    pub fn field_distance(&self, other: &IterationState) -> f64 {
        let mut d: f64 = 0.0;
        for k in 0..3 {
            for (a, b) in self.w.data[k].iter().zip(other.w.data[k].iter()) {
                d = d.max((a - b).abs());
            }
        }
        for (a, b) in self.psi_prime.iter().zip(&other.psi_prime) {
            d = d.max((a - b).abs());
        }
        d
    }
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct ResidualReport {
    /// transformed Euler system, interior nodes
    pub pde_residual: f64,
    /// first layer next to a side, where exact boundary data meet second-order interior values
    pub pde_boundary: f64,
    pub pde_corner: f64,
    /// nonlinear supersonic scheme
    pub upstream_residual: f64,
    pub rh_residual: f64,
    pub exit_residual: f64,
    pub wall_residual: f64,
    pub defect: f64,
}

/// Boundary and source data of one linear subsonic solve.
#[derive(Debug, Clone)]
pub struct StepData {
    pub elliptic: EllipticData,
    /// new downstream entropy perturbation per y2 node
    pub entropy: Vec<f64>,
    /// G0 at the current iterate
    pub g0: Vec<f64>,
    pub front: Vec<f64>,
}

struct Nodal {
    rho: Array2<f64>,
    p: Array2<f64>,
}

/// Everything that stays fixed during the iteration.
pub struct Transonic {
    pub hat: Hatted,
    pub pert: Perturbation,
    pub coeffs: ShockCoefficients,
    pub upstream: SupersonicSolution,
    pub initial: InitialApproximation,
    pub grid: Grid,
    pub kappa: f64,
    pub psi_bar: f64,
    solver: EllipticSolver,
    plus: Vec<HatPoint>,
    /// downstream Bernoulli perturbation (equal to the upstream one on each streamline)
    bern: Vec<f64>,
    pub opts: IterationOptions,
}

pub struct RunResult {
    pub state: IterationState,
    pub front: Vec<f64>,
    pub report: ResidualReport,
    pub log: Vec<LogEntry>,
    /// |psi_sharp| / sigma over the run
    pub c1: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LogEntry {
    pub iter: usize,
    pub update_norm: f64,
    pub psi_sharp: f64,
    pub defect: f64,
    pub kappa_estimate: f64,
}

impl Transonic {
    pub fn new(hat: &Hatted, pert: &Perturbation, opts: IterationOptions) -> Result<Self> {
        pert.check()?;
        let n2 = opts.n2;
        let init_opts =
            InitialOptions { n1_minus: opts.n1_minus, n1_plus: opts.n1_plus, n2, bracket: opts.psi_bracket, psi_bar: opts.psi_bar, elliptic: opts.elliptic };
        let initial = initial_approximation(hat, pert, &init_opts)?;
        let sup = SupersonicOptions {
            n1: opts.n1_minus,
            n2,
            sigma_max: opts.supersonic_sigma_max,
            ..Default::default()
        };
        let upstream = solve_nonlinear(hat, pert, &sup)?;
        let coeffs = coefficients(hat, n2)?;
        let psi_bar = initial.front.psi_bar;
        let (m, m_bar) = (upstream.m, upstream.m_bar);
        let grid = Grid::new(opts.n1_plus, n2, psi_bar, pert.geometry.length, m, m_bar)?;
        let solver = EllipticSolver::new(grid, coeffs.b_plus.clone(), opts.elliptic)?;
        let plus = coeffs.plus.clone();
        let bern = (0..n2).map(|j| upstream.v.data[3][[0, j]] - plus[j].b).collect();
        Ok(Transonic {
            hat: hat.clone(),
            pert: pert.clone(),
            coeffs,
            kappa: m_bar / m,
            upstream,
            initial,
            grid,
            psi_bar,
            solver,
            plus,
            bern,
            opts,
        })
    }

    /// The linear approximation as the starting iterate.
    pub fn initial_state(&self) -> IterationState {
        let mut w = self.initial.v_plus.clone();
        w.grid = self.grid;
        for i in 0..self.grid.n1 {
            for j in 0..self.grid.n2 {
                w.data[3][[i, j]] = self.bern[j];
            }
        }
        IterationState { w, psi_prime: self.initial.front.psi_prime.clone(), psi_sharp: 0.0, iter: 0, update_norm: f64::INFINITY }
    }

    fn front(&self, st: &IterationState, sharp: f64) -> Vec<f64> {
        front_positions(self.psi_bar, sharp, &st.psi_prime, self.grid.h2())
    }

    /// Full upstream state (u1, u2, S, B) at (psi(y2), y2).
    fn upstream_at(&self, front: &[f64]) -> Vec<[f64; 4]> {
        let g = self.upstream.v.grid;
        (0..self.grid.n2)
            .map(|j| {
                let mut out = [0.0; 4];
                for (k, o) in out.iter_mut().enumerate() {
                    let col = self.upstream.v.data[k].column(j).to_vec();
                    *o = cubic_uniform(&col, g.y1a, g.h1(), front[j]);
                }
                out
            })
            .collect()
    }

    fn full(&self, w: &Field, k: usize, i: usize, j: usize) -> f64 {
        let p = &self.plus[j];
        let base = match k {
            0 => p.u,
            1 => 0.0,
            2 => p.s,
            _ => p.b,
        };
        base + w.data[k][[i, j]]
    }

    fn nodal(&self, w: &Field) -> Result<Nodal> {
        let g = self.grid;
        let gamma = self.hat.bg.gas.gamma;
        let mut rho = g.zeros();
        let mut p = g.zeros();
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                let (u1, u2, s, b) = (self.full(w, 0, i, j), self.full(w, 1, i, j), self.full(w, 2, i, j), self.full(w, 3, i, j));
                if !(u1 > 0.0) {
                    return Err(Error::FlowReversal { x2: g.y2(j), value: u1 });
                }
                let (r, pr) = rho_p_from_entropy_enthalpy(s, b - 0.5 * (u1 * u1 + u2 * u2), b, gamma)?;
                rho[[i, j]] = r;
                p[[i, j]] = pr;
            }
        }
        Ok(Nodal { rho, p })
    }

    /// Transformed mass and y2-momentum residuals (C1, C3) at every node.
    fn pde(&self, w: &Field, nodal: &Nodal, coords: &FixedCoordinates, psi_prime: &[f64]) -> (Array2<f64>, Array2<f64>) {
        let g = self.grid;
        let (n1, n2) = (g.n1, g.n2);
        let (h1, h2) = (g.h1(), g.h2());
        let beta = self.hat.bg.gas.beta;
        let mut q = g.zeros();
        let mut wr = g.zeros();
        let mut dp = g.zeros();
        let mut u2 = g.zeros();
        for i in 0..n1 {
            for j in 0..n2 {
                let u1 = self.full(w, 0, i, j);
                u2[[i, j]] = w.data[1][[i, j]];
                q[[i, j]] = 1.0 / (nodal.rho[[i, j]] * u1);
                wr[[i, j]] = u2[[i, j]] / u1;
                dp[[i, j]] = nodal.p[[i, j]] - self.plus[j].p;
            }
        }
        let d1 = |a: &Array2<f64>| crate::elliptic::d1(a, h1);
        let d2 = |a: &Array2<f64>| crate::elliptic::d2(a, h2);
        let (q1, w1, w2, p1, p2, u21) = (d1(&q), d1(&wr), d2(&wr), d1(&dp), d2(&dp), d1(&u2));
        let mut c1 = g.zeros();
        let mut c3 = g.zeros();
        let k = self.kappa;
        for i in 0..n1 {
            let z1 = g.y1(i);
            for j in 0..n2 {
                let s = coords.stretch(j);
                let t = (coords.length - z1) / (coords.length - coords.psi[j]) * psi_prime[j];
                c1[[i, j]] = s * q1[[i, j]] - k * (w2[[i, j]] - t * w1[[i, j]]);
                c3[[i, j]] = s * u21[[i, j]] + k * (p2[[i, j]] - t * p1[[i, j]]) + beta * (1.0 - k);
            }
        }
        (c1, c3)
    }

    /// G0, G1, G2 between an upstream and a downstream full state.
    fn rh(&self, up: &[f64; 4], dn: &[f64; 4], psi_prime: f64) -> Result<[f64; 3]> {
        let gamma = self.hat.bg.gas.gamma;
        let st = |v: &[f64; 4]| rho_p_from_entropy_enthalpy(v[2], v[3] - 0.5 * (v[0] * v[0] + v[1] * v[1]), v[3], gamma);
        let (rm, pm) = st(up)?;
        let (rp, pp) = st(dn)?;
        let jump_u2 = dn[1] - up[1];
        let jump_p = pp - pm;
        let r = jump_u2 / jump_p;
        let g1 = (1.0 / (rp * dn[0]) - 1.0 / (rm * up[0])) + r * (dn[1] / dn[0] - up[1] / up[0]);
        let g2 = (dn[0] + pp / (rp * dn[0]) - up[0] - pm / (rm * up[0])) + r * (pp * dn[1] / dn[0] - pm * up[1] / up[0]);
        let g0 = jump_u2 - self.kappa * psi_prime * jump_p;
        Ok([g0, g1, g2])
    }

    fn exit_x2(&self, w: &Field, nodal: &Nodal) -> Result<Vec<f64>> {
        let g = self.grid;
        let i = g.n1 - 1;
        let q: Vec<f64> = (0..g.n2).map(|j| nodal.rho[[i, j]] * self.full(w, 0, i, j)).collect();
        x2_of_y(&q, g.h2(), g.m, g.m_bar)
    }

    /// Data of the linear subsonic problem for the iterate `st` and a trial psi_sharp.
    pub fn assemble(&self, st: &IterationState, sharp: f64) -> Result<StepData> {
        let g = self.grid;
        let (n1, n2) = (g.n1, g.n2);
        let (h1, h2) = (g.h1(), g.h2());
        let gm1 = self.hat.bg.gas.gamma - 1.0;
        let sigma = self.pert.sigma;
        let front = self.front(st, sharp);
        let coords = fix_coordinates(&front, self.psi_bar, g.y1b)?;
        let w = &st.w;
        let nodal = self.nodal(w)?;
        let (c1, c3) = self.pde(w, &nodal, &coords, &st.psi_prime);
        let c = &self.coeffs;
        let (b1, b2, b3, b4) = (&c.b_plus[0], &c.b_plus[1], &c.b_plus[2], &c.b_plus[3]);

        // shock side: chord step on (G1, G2) in (u1, S)
        let up = self.upstream_at(&front);
        let mut data = EllipticData::zeros(&g);
        let mut entropy = vec![0.0; n2];
        let mut g0 = vec![0.0; n2];
        for j in 0..n2 {
            let dn = [self.full(w, 0, 0, j), self.full(w, 1, 0, j), self.full(w, 2, 0, j), self.full(w, 3, 0, j)];
            let [r0, r1, r2] = self.rh(&up[j], &dn, st.psi_prime[j])?;
            let (j1, j2) = (c.g1_plus[j], c.g2_plus[j]);
            let du = -r2 / j2[0];
            let ds = (-r1 - j1[0] * du) / j1[2];
            data.h1[j] = w.data[0][[0, j]] + du;
            entropy[j] = w.data[2][[0, j]] + ds;
            g0[j] = r0;
        }

        // exit: chord step on the pressure condition
        let xe = self.exit_x2(w, &nodal)?;
        for j in 0..n2 {
            let p = &self.plus[j];
            let r = nodal.p[[n1 - 1, j]] - p.p - sigma * self.pert.p_ex.eval(xe[j]);
            let ds = entropy[j] - w.data[2][[n1 - 1, j]];
            data.h2[j] = w.data[0][[n1 - 1, j]] + (r - p.p * ds / gm1) / (p.rho * p.u);
        }

        // upper wall: u2 = sigma u1 g'(Y1)
        for i in 0..n1 {
            let y1 = coords.y1(g.y1(i), n2 - 1);
            data.h3[i] = sigma * self.full(w, 0, i, n2 - 1) * self.pert.geometry.g.deriv(y1);
        }

        // interior: linear operator of the iterate minus the nonlinear residual
        let mut b1u = g.zeros();
        let mut b2u = g.zeros();
        let mut b3u = g.zeros();
        let mut b4u = g.zeros();
        let mut sfix = g.zeros();
        for i in 0..n1 {
            for j in 0..n2 {
                b1u[[i, j]] = b1[j] * w.data[0][[i, j]];
                b2u[[i, j]] = b2[j] * w.data[1][[i, j]];
                b3u[[i, j]] = b3[j] * w.data[1][[i, j]];
                b4u[[i, j]] = b4[j] * w.data[0][[i, j]];
                sfix[[i, j]] = self.plus[j].p * (entropy[j] - w.data[2][[i, j]]) / gm1;
            }
        }
        let d1 = |a: &Array2<f64>| crate::elliptic::d1(a, h1);
        let d2 = |a: &Array2<f64>| crate::elliptic::d2(a, h2);
        let (l1a, l1b, l2a, l2b, ds2) = (d1(&b1u), d2(&b2u), d1(&b3u), d2(&b4u), d2(&sfix));
        for i in 0..n1 {
            for j in 0..n2 {
                let p = &self.plus[j];
                data.rhs1[[i, j]] = l1a[[i, j]] + l1b[[i, j]] + b2[j] * p.u * c1[[i, j]];
                data.rhs2[[i, j]] = l2a[[i, j]] - l2b[[i, j]] - b3[j] * c3[[i, j]] + b3[j] * ds2[[i, j]];
            }
        }
        Ok(StepData { elliptic: data, entropy, g0, front })
    }

    pub fn defect(&self, data: &StepData) -> f64 {
        compatibility_defect(&self.solver.problem(data.elliptic.clone()))
    }

    /// Scale of the defect terms, for relative tolerances.
    fn defect_scale(&self, st: &IterationState, data: &StepData) -> f64 {
        let g = self.grid;
        let w1 = trap_weights(g.n1, g.h1());
        let w2 = trap_weights(g.n2, g.h2());
        let l1 = &self.coeffs.b_plus[0];
        let top = self.coeffs.b_plus[1][g.n2 - 1];
        let e = &data.elliptic;
        let (u1, u2) = (&st.w.data[0], &st.w.data[1]);
        let mut s: f64 = (0..g.n2)
            .map(|j| w2[j] * l1[j] * (e.h2[j].abs() + e.h1[j].abs() + u1[[0, j]].abs() + u1[[g.n1 - 1, j]].abs()))
            .sum();
        s += (0..g.n1).map(|i| w1[i] * top * (e.h3[i].abs() + u2[[i, g.n2 - 1]].abs())).sum::<f64>();
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                s += w1[i] * w2[j] * e.rhs1[[i, j]].abs();
            }
        }
        s
    }

    /// Size of the boundary coefficients weighting the defect.
    fn coefficient_scale(&self) -> f64 {
        let g = self.grid;
        let w2 = trap_weights(g.n2, g.h2());
        let top = self.coeffs.b_plus[1][g.n2 - 1].abs();
        (0..g.n2).map(|j| w2[j] * self.coeffs.b_plus[0][j].abs()).sum::<f64>() + top * (g.y1b - g.y1a).abs()
    }

    /// psi_sharp from the solvability condition, by secant iteration on the discrete defect.
    pub fn solve_psi_sharp(&self, st: &IterationState) -> Result<(f64, StepData)> {
        let l = self.grid.y1b;
        let lo = -self.psi_bar;
        let hi = l - self.psi_bar;
        let mut x0 = st.psi_sharp;
        let mut d0 = self.assemble(st, x0)?;
        let mut f0 = self.defect(&d0);
        let scale = self.defect_scale(st, &d0).max(f64::MIN_POSITIVE);
        // with vanishing data the defect is pure roundoff of the boundary weights
        let tol = 1e-12 * scale + 64.0 * f64::EPSILON * self.coefficient_scale();
        if f0.abs() <= tol {
            return Ok((x0, d0));
        }
        let mut x1 = x0 + 1e-4 * (hi - lo);
        let mut d1 = self.assemble(st, x1)?;
        let mut f1 = self.defect(&d1);
        for _ in 0..50 {
            let slope = (f1 - f0) / (x1 - x0);
            if !(slope.abs() > 1e-14 * scale) {
                return Err(Error::DegenerateSelection { spread: slope });
            }
            let x2 = x1 - f1 / slope;
            if !(x2 > lo && x2 < hi) {
                return Err(Error::FrontOutOfRange { psi: self.psi_bar + x2 });
            }
            let d2 = self.assemble(st, x2)?;
            let f2 = self.defect(&d2);
            (x0, f0, d0) = (x1, f1, d1);
            (x1, f1, d1) = (x2, f2, d2);
            if f1.abs() <= tol {
                return Ok((x1, d1));
            }
        }
        let _ = (f0, d0);
        Err(Error::InconsistentPosition { defect: f1 })
    }

    /// One application of T.
    pub fn apply_t(&self, st: &IterationState) -> Result<IterationState> {
        let g = self.grid;
        let (sharp, data) = self.solve_psi_sharp(st)?;
        let sol = self.solver.solve(&data.elliptic).map_err(|e| match e {
            Error::IncompatibleData { defect } => Error::InconsistentPosition { defect },
            other => other,
        })?;
        let mut w = Field::new(g, &NAMES);
        w.data[0] = sol.v.data[0].clone();
        w.data[1] = sol.v.data[1].clone();
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                w.data[2][[i, j]] = data.entropy[j];
                w.data[3][[i, j]] = self.bern[j];
            }
        }
        let c = &self.coeffs;
        let psi_prime = (0..g.n2)
            .map(|j| {
                let jump = c.jump_p[j];
                if jump.abs() < 1e-12 {
                    return Err(Error::DegenerateShock { jump, y2: c.y2[j] });
                }
                Ok(st.psi_prime[j] + (w.data[1][[0, j]] - st.w.data[1][[0, j]] + data.g0[j]) / (self.kappa * jump))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut next = IterationState { w, psi_prime, psi_sharp: sharp, iter: st.iter + 1, update_norm: 0.0 };
        next.update_norm = next.distance(st);
        Ok(next)
    }

    pub fn trust_radius(&self) -> f64 {
        self.opts.trust_factor * self.pert.sigma.powf(1.5)
    }

    pub fn run(&self) -> Result<RunResult> {
        let start = self.initial_state();
        let mut st = start.clone();
        let mut log = Vec::new();
        let mut history = Vec::new();
        let radius = self.trust_radius();
        let mut c1: f64 = 0.0;
        for _ in 0..self.opts.max_iter {
            let next = self.apply_t(&st)?;
            let dist = next.field_distance(&start);
            let upd = next.update_norm;
            let kappa_estimate = history.last().map(|p: &f64| if *p > 0.0 { upd / p } else { 0.0 }).unwrap_or(f64::NAN);
            history.push(upd);
            if self.pert.sigma > 0.0 {
                c1 = c1.max(next.psi_sharp.abs() / self.pert.sigma);
            }
            let data = self.assemble(&next, next.psi_sharp)?;
            log.push(LogEntry { iter: next.iter, update_norm: upd, psi_sharp: next.psi_sharp, defect: self.defect(&data), kappa_estimate });
            if dist > radius && dist > self.opts.tol_fp {
                return Err(Error::TrustRegion { distance: dist, radius });
            }
            st = next;
            if upd <= self.opts.tol_fp {
                let front = self.front(&st, st.psi_sharp);
                let report = self.residuals(&st)?;
                return Ok(RunResult { state: st, front, report, log, c1 });
            }
        }
        Err(Error::NonConvergence { history })
    }

    /// Pairwise contraction ratio |T s1 - T s2| / |s1 - s2| over fields and psi'. The map acts
    /// on (w, psi'); psi_sharp is an output of the solvability condition.
    pub fn contraction(&self, s1: &IterationState, s2: &IterationState) -> Result<f64> {
        let t1 = self.apply_t(s1)?;
        let t2 = self.apply_t(s2)?;
        Ok(t1.field_distance(&t2) / s1.field_distance(s2))
    }

    pub fn residuals(&self, st: &IterationState) -> Result<ResidualReport> {
        let g = self.grid;
        let (n1, n2) = (g.n1, g.n2);
        let sigma = self.pert.sigma;
        let front = self.front(st, st.psi_sharp);
        let coords = fix_coordinates(&front, self.psi_bar, g.y1b)?;
        let w = &st.w;
        let nodal = self.nodal(w)?;
        let (c1, c3) = self.pde(w, &nodal, &coords, &st.psi_prime);
        let mut r = ResidualReport::default();
        for i in 1..n1 - 1 {
            for j in 1..n2 - 1 {
                let v = c1[[i, j]].abs().max(c3[[i, j]].abs());
                match node_zone(i, j, n1, n2) {
                    0 => r.pde_residual = r.pde_residual.max(v),
                    1 => r.pde_boundary = r.pde_boundary.max(v),
                    _ => r.pde_corner = r.pde_corner.max(v),
                }
            }
        }
        r.upstream_residual = nonlinear_residual(&self.hat, &self.upstream.v, self.kappa)?;
        let up = self.upstream_at(&front);
        for j in 0..n2 {
            let dn = [self.full(w, 0, 0, j), self.full(w, 1, 0, j), self.full(w, 2, 0, j), self.full(w, 3, 0, j)];
            let [a, b, c] = self.rh(&up[j], &dn, st.psi_prime[j])?;
            r.rh_residual = r.rh_residual.max(a.abs()).max(b.abs()).max(c.abs()).max((dn[3] - up[j][3]).abs());
        }
        let xe = self.exit_x2(w, &nodal)?;
        for j in 0..n2 {
            let e = nodal.p[[n1 - 1, j]] - self.plus[j].p - sigma * self.pert.p_ex.eval(xe[j]);
            r.exit_residual = r.exit_residual.max(e.abs());
        }
        for i in 0..n1 {
            let y1 = coords.y1(g.y1(i), n2 - 1);
            let top = w.data[1][[i, n2 - 1]] / self.full(w, 0, i, n2 - 1) - sigma * self.pert.geometry.g.deriv(y1);
            r.wall_residual = r.wall_residual.max(top.abs()).max(w.data[1][[i, 0]].abs());
        }
        let data = self.assemble(st, st.psi_sharp)?;
        r.defect = self.defect(&data);
        Ok(r)
    }

    /// Full downstream state on the fixed rectangle.
    pub fn downstream_field(&self, st: &IterationState) -> Field {
        let mut f = Field::new(self.grid, &NAMES);
        for k in 0..4 {
            for i in 0..self.grid.n1 {
                for j in 0..self.grid.n2 {
                    f.data[k][[i, j]] = self.full(&st.w, k, i, j);
                }
            }
        }
        f
    }
}
