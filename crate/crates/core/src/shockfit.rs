//! Linearized shock relations, the solvability functionals J1 and J2, the choice of the base
//! shock position and the initial (linear) approximation of the transonic solution.

use crate::elliptic::{EllipticData, EllipticSolution, EllipticSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::thermo::GasModel;
use crate::lagrangian::{Field, Grid, HatPoint, Hatted, Perturbation};
use crate::numerics::{bisect_secant, cum_simpson_from_start, diff, linspace, trap_weights, trapz};
use crate::supersonic::{linear_dkappa, solve_linear, SupersonicSolution, NAMES};

#[derive(Debug, Clone)]
pub struct ShockCoefficients {
    pub gas: GasModel,
    pub y2: Vec<f64>,
    pub plus: Vec<HatPoint>,
    pub minus: Vec<HatPoint>,
    /// b1..b4 behind and ahead of the shock
    pub b_plus: [Vec<f64>; 4],
    pub b_minus: [Vec<f64>; 4],
    /// u1_+ = a1 u1_- at the shock
    pub a1: Vec<f64>,
    /// S_+ = a2 u1_- + S_- at the shock
    pub a2: Vec<f64>,
    /// exit u1_+ carries a3 u1_-(shock)
    pub a3: Vec<f64>,
    /// Bernoulli-perturbation parts of the same three relations
    pub bern_u1: Vec<f64>,
    pub bern_s: Vec<f64>,
    pub bern_exit: Vec<f64>,
    pub jump_p: Vec<f64>,
    pub a0p: [f64; 4],
    pub a0m: [f64; 4],
    /// linearized G1 and G2 coefficient vectors on (u1, u2, S, B)
    pub g1_plus: Vec<[f64; 4]>,
    pub g1_minus: Vec<[f64; 4]>,
    pub g2_plus: Vec<[f64; 4]>,
    pub g2_minus: Vec<[f64; 4]>,
}

/// exp of the running integral of f on the nodes y (uniform, starting at 0), refined 8x.
fn exp_integral(f: &impl Fn(f64) -> f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let fine = linspace(y[0], y[n - 1], 8 * (n - 1) + 1);
    let cum = cum_simpson_from_start(f, &fine);
    (0..n).map(|j| cum[8 * j].exp()).collect()
}

fn b_coefficients(hat: &Hatted, y: &[f64], plus: bool) -> [Vec<f64>; 4] {
    let pt = |t: f64| if plus { hat.plus(t) } else { hat.minus(t) };
    let gas = hat.bg.gas;
    let b2 = exp_integral(&|t| {
        let p = pt(t);
        -p.du / p.u
    }, y);
    let b4 = exp_integral(&|t| {
        let p = pt(t);
        p.du / p.u - gas.beta / (p.rho * p.c2) - p.ds / gas.gamma
    }, y);
    let pts: Vec<HatPoint> = y.iter().map(|&t| pt(t)).collect();
    let b1 = pts.iter().zip(&b2).map(|(p, b)| (1.0 - p.mach2) / (p.rho * p.u) * b).collect();
    let b3 = pts.iter().zip(&b4).map(|(p, b)| b / (p.rho * p.u)).collect();
    [b1, b2, b3, b4]
}

/// u1_+ / u1_- sensitivity across the shock from the two squared Mach numbers.
pub fn shock_u1_factor(mach2_plus: f64, mach2_minus: f64) -> f64 {
    mach2_plus / mach2_minus * (mach2_minus - 1.0) / (mach2_plus - 1.0)
}

pub fn coefficients(hat: &Hatted, n2: usize) -> Result<ShockCoefficients> {
    let gas = hat.bg.gas;
    let g = gas.gamma;
    let y2 = linspace(0.0, hat.m_bar, n2);
    let plus: Vec<HatPoint> = y2.iter().map(|&t| hat.plus(t)).collect();
    let minus: Vec<HatPoint> = y2.iter().map(|&t| hat.minus(t)).collect();
    let mut c = ShockCoefficients {
        b_plus: b_coefficients(hat, &y2, true),
        b_minus: b_coefficients(hat, &y2, false),
        a1: vec![],
        a2: vec![],
        a3: vec![],
        bern_u1: vec![],
        bern_s: vec![],
        bern_exit: vec![],
        jump_p: vec![],
        a0p: [0.0, 1.0, 0.0, 0.0],
        a0m: [0.0, -1.0, 0.0, 0.0],
        g1_plus: vec![],
        g1_minus: vec![],
        g2_plus: vec![],
        g2_minus: vec![],
        gas,
        y2: y2.clone(),
        plus: plus.clone(),
        minus: minus.clone(),
    };
    for (p, m) in plus.iter().zip(&minus) {
        if (p.mach2 - 1.0).abs() < 1e-12 {
            return Err(Error::DegenerateBackground(format!("sonic downstream state at x2 = {}", p.x2)));
        }
        let jump = p.p - m.p;
        let (mp, mm) = (p.mach2, m.mach2);
        c.a1.push(shock_u1_factor(mp, mm));
        c.a2.push((g - 1.0) * (mm - 1.0) * jump / (p.p * m.u));
        c.a3.push(-(mm - 1.0) * jump / (p.rho * p.u * m.u));
        let b1 = (g - 1.0) * (1.0 / m.u - 1.0 / p.u) * mp / (mp - 1.0);
        let bs = (g - 1.0) * ((1.0 / p.c2 - 1.0 / m.c2) - (mp - 1.0) / p.u * b1);
        c.bern_u1.push(b1);
        c.bern_s.push(bs);
        c.bern_exit.push(-p.p * bs / ((g - 1.0) * p.rho * p.u));
        c.jump_p.push(jump);
        let g1 = |s: &HatPoint, sign: f64| {
            let k = sign / (s.rho * s.u);
            [k * (s.mach2 - 1.0) / s.u, 0.0, k / (g - 1.0), -k / s.c2]
        };
        let g2 = |s: &HatPoint, sign: f64| [sign * (s.mach2 - 1.0) / (g * s.mach2), 0.0, 0.0, sign * (g - 1.0) / (g * s.u)];
        c.g1_plus.push(g1(p, 1.0));
        c.g1_minus.push(g1(m, -1.0));
        c.g2_plus.push(g2(p, 1.0));
        c.g2_minus.push(g2(m, -1.0));
    }
    Ok(c)
}

/// Inflow and exit data on the y2 nodes through the background map.
#[derive(Debug, Clone)]
pub struct SideData {
    pub u1_en: Vec<f64>,
    pub u2_en: Vec<f64>,
    pub s_en: Vec<f64>,
    pub b_en: Vec<f64>,
    pub p_ex: Vec<f64>,
}

pub fn side_data(c: &ShockCoefficients, pert: &Perturbation) -> SideData {
    let at = |f: &crate::numerics::Func| c.plus.iter().map(|p| f.eval(p.x2)).collect::<Vec<_>>();
    SideData { u1_en: at(&pert.u1_en), u2_en: at(&pert.u2_en), s_en: at(&pert.s_en), b_en: at(&pert.b_en), p_ex: at(&pert.p_ex) }
}

/// J1 is sampled from the linear supersonic solution; J2 is fixed by the data.
#[derive(Debug, Clone)]
pub struct Functionals {
    pub sigma: f64,
    /// trapezoid weight times (a3 - a1) b1_+
    pub weights: Vec<f64>,
    /// b2_+ u_+ at the upper wall
    pub wall: f64,
    pub j2: f64,
    length: f64,
    n1_plus: usize,
    g: crate::numerics::Func,
    u1_minus: Field,
}

impl Functionals {
    /// Wall term integral of g' over [psi, L] with the trapezoid rule of the subsonic grid.
    pub fn wall_integral(&self, psi: f64) -> f64 {
        let y = linspace(psi, self.length, self.n1_plus);
        let gp: Vec<f64> = y.iter().map(|&t| self.g.deriv(t)).collect();
        trapz(&gp, (self.length - psi) / (self.n1_plus - 1) as f64)
    }

    pub fn j1(&self, psi: f64) -> f64 {
        let lead = if self.sigma == 0.0 {
            0.0
        } else {
            let col = self.u1_minus.column_at("u1", psi);
            self.weights.iter().zip(&col).map(|(w, u)| w * u).sum::<f64>() / self.sigma
        };
        lead + self.wall * self.wall_integral(psi)
    }
}

pub fn j_functionals(c: &ShockCoefficients, v_minus: &SupersonicSolution, pert: &Perturbation, n1_plus: usize) -> Functionals {
    let n2 = c.y2.len();
    let h2 = c.y2[1] - c.y2[0];
    let w = trap_weights(n2, h2);
    let gm1 = c.gas.gamma - 1.0;
    let d = side_data(c, pert);
    let bp = &c.b_plus;
    let weights = (0..n2).map(|j| w[j] * (c.a3[j] - c.a1[j]) * bp[0][j]).collect();
    let j2 = (0..n2)
        .map(|j| {
            let p = &c.plus[j];
            let q = p.rho * p.u;
            w[j] * bp[0][j]
                * (d.p_ex[j] / q + p.p * (d.s_en[j] + c.bern_s[j] * d.b_en[j]) / (gm1 * q) - d.b_en[j] / p.u + c.bern_u1[j] * d.b_en[j])
        })
        .sum();
    let mut u1 = Field::new(v_minus.v.grid, &["u1"]);
    u1.data[0] = v_minus.v.get("u1").clone();
    Functionals {
        sigma: pert.sigma,
        weights,
        wall: bp[1][n2 - 1] * c.plus[n2 - 1].u,
        j2,
        length: pert.geometry.length,
        n1_plus,
        g: pert.geometry.g.clone(),
        u1_minus: u1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketSource {
    /// J1 increasing on (0, L+)
    Increasing,
    /// J1 decreasing on (0, L-)
    Decreasing,
    Configured,
}

#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub source: BracketSource,
    /// initial slope J1'(0) from the inflow u2 data
    pub slope0: f64,
    /// bound on |J1''|
    pub curvature: f64,
    /// measured amplification of the linear supersonic solve
    pub c_minus: f64,
    pub j1_0: f64,
    /// guaranteed range of J1 over the bracket
    pub range: (f64, f64),
}

/// Measured amplification max|(u1, u2)| / sigma of the linear supersonic solve.
pub fn measured_c_minus(v: &SupersonicSolution, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let m = v.v.data[..2].iter().flat_map(|a| a.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    m / sigma
}

/// Bracket on which J1 is provably monotone, following the slope/curvature argument.
pub fn guaranteed_bracket(c: &ShockCoefficients, f: &Functionals, v_minus: &SupersonicSolution, pert: &Perturbation) -> Result<Bracket> {
    let n2 = c.y2.len();
    let h2 = c.y2[1] - c.y2[0];
    let w = trap_weights(n2, h2);
    let d = side_data(c, pert);
    let ratio: Vec<f64> = (0..n2).map(|j| c.b_plus[0][j] * (c.a3[j] - c.a1[j]) / c.b_minus[0][j]).collect();
    let dr = diff(&ratio, h2);
    let slope0: f64 = (0..n2).map(|j| w[j] * dr[j] * c.b_minus[1][j] * d.u2_en[j]).sum();
    let c_minus = measured_c_minus(v_minus, pert.sigma);
    let l = pert.geometry.length;
    let g2max = (0..=1024).map(|k| pert.geometry.g.eval_d(l * k as f64 / 1024.0)[2].abs()).fold(0.0, f64::max);
    let weight_abs: f64 = (0..n2).map(|j| w[j] * ((c.a3[j] - c.a1[j]) * c.b_plus[0][j]).abs()).sum();
    let curvature = c_minus * weight_abs + f.wall * g2max;
    let j1_0 = f.j1(0.0);
    let scale = 1.0 + weight_abs * c_minus;
    if slope0.abs() <= 1e-12 * scale {
        return Err(Error::DegenerateSelection { spread: slope0 });
    }
    let reach = if curvature > 0.0 { (slope0.abs() / curvature).min(l) } else { l };
    let end = reach * (1.0 - 1e-3);
    let (source, jstar) = if slope0 > 0.0 {
        (BracketSource::Increasing, end * (slope0 - 0.5 * end * curvature))
    } else {
        (BracketSource::Decreasing, end * (slope0 + 0.5 * end * curvature))
    };
    let range = if jstar > 0.0 { (j1_0, j1_0 + jstar) } else { (j1_0 + jstar, j1_0) };
    Ok(Bracket { lo: 0.0, hi: end, source, slope0, curvature, c_minus, j1_0, range })
}

#[derive(Debug, Clone, Copy)]
pub struct ShockPosition {
    pub psi_bar: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Root of J1 = J2 inside the bracket; J1 must be strictly monotone there.
pub fn find_shock_position(j1: &dyn Fn(f64) -> f64, j2: f64, lo: f64, hi: f64) -> Result<ShockPosition> {
    let n = 33;
    let samples: Vec<f64> = linspace(lo, hi, n).iter().map(|&t| j1(t)).collect();
    let (mn, mx) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = 1.0 + j2.abs().max(mn.abs()).max(mx.abs());
    if mx - mn <= 1e-10 * scale {
        return Err(Error::DegenerateSelection { spread: mx - mn });
    }
    let up = samples.windows(2).all(|w| w[1] > w[0]);
    let down = samples.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::NotMonotone { bracket: (lo, hi) });
    }
    if j2 < mn || j2 > mx {
        return Err(Error::NoShockPosition { j2, lo: mn, hi: mx, bracket: (lo, hi) });
    }
    let r = bisect_secant(&|t| j1(t) - j2, lo, hi, 1e-10 * scale, 60)?;
    Ok(ShockPosition { psi_bar: r.root, residual: r.residual, iterations: r.iterations })
}

/// Slope of the front from the jump of u2: (m / (m_bar [P])) (u2_+ - u2_-).
pub fn shock_slope(u2_plus: &[f64], u2_minus: &[f64], c: &ShockCoefficients, m: f64, m_bar: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(u2_plus.len());
    for j in 0..u2_plus.len() {
        let jump = c.jump_p[j];
        if jump.abs() < 1e-12 {
            return Err(Error::DegenerateShock { jump, y2: c.y2[j] });
        }
        out.push(m / (m_bar * jump) * (u2_plus[j] - u2_minus[j]));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ShockFront {
    pub psi_bar: f64,
    /// value at the upper wall
    pub psi_sharp: f64,
    pub psi_prime: Vec<f64>,
    pub psi: Vec<f64>,
}

impl ShockFront {
    /// psi(y2) = psi_sharp - int_{y2}^{m_bar} psi'.
    pub fn new(psi_bar: f64, psi_sharp: f64, psi_prime: Vec<f64>, h2: f64, length: f64) -> Result<Self> {
        let n = psi_prime.len();
        let cum = crate::numerics::cumtrapz(&psi_prime, h2);
        let total = cum[n - 1];
        let psi: Vec<f64> = cum.iter().map(|c| psi_sharp - (total - c)).collect();
        let (lo, hi) = psi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(lo > 0.0 && hi < length) {
            return Err(Error::FrontOutOfRange { psi: if lo <= 0.0 { lo } else { hi } });
        }
        Ok(ShockFront { psi_bar, psi_sharp, psi_prime, psi })
    }
}

/// Boundary and source data of the linear subsonic problem for a given upstream column.
pub struct SubsonicData {
    pub data: EllipticData,
    pub s_plus: Vec<f64>,
    pub b_plus: Vec<f64>,
}

pub fn subsonic_data(c: &ShockCoefficients, grid: &Grid, u1_minus: &[f64], pert: &Perturbation, dkappa: f64) -> SubsonicData {
    let n2 = grid.n2;
    let sigma = pert.sigma;
    let gm1 = c.gas.gamma - 1.0;
    let d = side_data(c, pert);
    let b_plus: Vec<f64> = d.b_en.iter().map(|b| sigma * b).collect();
    let s_plus: Vec<f64> = (0..n2).map(|j| c.a2[j] * u1_minus[j] + sigma * d.s_en[j] + c.bern_s[j] * b_plus[j]).collect();
    let mut data = EllipticData::zeros(grid);
    for j in 0..n2 {
        let p = &c.plus[j];
        data.h1[j] = c.a1[j] * u1_minus[j] + c.bern_u1[j] * b_plus[j];
        data.h2[j] = (-sigma * d.p_ex[j] - p.p * s_plus[j] / gm1 + p.rho * b_plus[j]) / (p.rho * p.u);
    }
    let top = c.plus[n2 - 1].u;
    for i in 0..grid.n1 {
        data.h3[i] = sigma * top * pert.geometry.g.deriv(grid.y1(i));
    }
    let fixed: Vec<f64> = (0..n2).map(|j| c.plus[j].rho * b_plus[j] - c.plus[j].p * s_plus[j] / gm1).collect();
    let dfixed = diff(&fixed, grid.h2());
    let b3 = &c.b_plus[2];
    for i in 0..grid.n1 {
        for j in 0..n2 {
            data.rhs2[[i, j]] = b3[j] * (-dfixed[j] + c.gas.beta * dkappa);
        }
    }
    SubsonicData { data, s_plus, b_plus }
}

pub struct SubsonicLinear {
    pub v: Field,
    pub elliptic: EllipticSolution,
}

pub fn solve_linear_subsonic(
    c: &ShockCoefficients,
    psi_bar: f64,
    v_minus: &SupersonicSolution,
    pert: &Perturbation,
    dkappa: f64,
    n1: usize,
    opts: SolveOptions,
) -> Result<SubsonicLinear> {
    let n2 = c.y2.len();
    let grid = Grid::new(n1, n2, psi_bar, pert.geometry.length, c.y2[n2 - 1], c.y2[n2 - 1])?;
    let u1m = v_minus.v.column_at("u1", psi_bar);
    let sd = subsonic_data(c, &grid, &u1m, pert, dkappa);
    let solver = EllipticSolver::new(grid, c.b_plus.clone(), opts)?;
    let sol = solver.solve(&sd.data).map_err(|e| match e {
        Error::IncompatibleData { defect } => Error::InconsistentPosition { defect },
        other => other,
    })?;
    let mut v = Field::new(grid, &NAMES);
    v.data[0] = sol.v.data[0].clone();
    v.data[1] = sol.v.data[1].clone();
    for i in 0..n1 {
        for j in 0..n2 {
            v.data[2][[i, j]] = sd.s_plus[j];
            v.data[3][[i, j]] = sd.b_plus[j];
        }
    }
    Ok(SubsonicLinear { v, elliptic: sol })
}

#[derive(Debug, Clone, Copy)]
pub struct InitialOptions {
    pub n1_minus: usize,
    pub n1_plus: usize,
    pub n2: usize,
    pub bracket: Option<(f64, f64)>,
    /// use this shock position instead of solving J1 = J2 (the sigma = 0 or flat beta = 0 regimes)
    pub psi_bar: Option<f64>,
    pub elliptic: SolveOptions,
}

impl Default for InitialOptions {
    fn default() -> Self {
        InitialOptions { n1_minus: 257, n1_plus: 129, n2: 65, bracket: None, psi_bar: None, elliptic: SolveOptions::default() }
    }
}

pub struct InitialApproximation {
    pub coeffs: ShockCoefficients,
    pub functionals: Functionals,
    pub v_minus: SupersonicSolution,
    pub v_plus: Field,
    pub elliptic: EllipticSolution,
    pub front: ShockFront,
    pub bracket: Bracket,
    pub j1_at_psi: f64,
    pub dkappa: f64,
}

pub fn initial_approximation(hat: &Hatted, pert: &Perturbation, opts: &InitialOptions) -> Result<InitialApproximation> {
    let coeffs = coefficients(hat, opts.n2)?;
    let v_minus = solve_linear(hat, pert, opts.n1_minus, opts.n2)?;
    let functionals = j_functionals(&coeffs, &v_minus, pert, opts.n1_plus);
    let configured = |lo: f64, hi: f64| {
        let mut b = guaranteed_bracket(&coeffs, &functionals, &v_minus, pert).unwrap_or(Bracket {
            lo,
            hi,
            source: BracketSource::Configured,
            slope0: 0.0,
            curvature: 0.0,
            c_minus: measured_c_minus(&v_minus, pert.sigma),
            j1_0: functionals.j1(0.0),
            range: (f64::NAN, f64::NAN),
        });
        b.lo = lo;
        b.hi = hi;
        b.source = BracketSource::Configured;
        b
    };
    let (bracket, psi_bar) = match (opts.psi_bar, opts.bracket) {
        (Some(psi), _) => (configured(psi, psi), psi),
        (None, Some((lo, hi))) => {
            let b = configured(lo, hi);
            let pos = find_shock_position(&|t| functionals.j1(t), functionals.j2, b.lo, b.hi)?;
            (b, pos.psi_bar)
        }
        (None, None) => {
            let b = guaranteed_bracket(&coeffs, &functionals, &v_minus, pert)?;
            let pos = find_shock_position(&|t| functionals.j1(t), functionals.j2, b.lo, b.hi)?;
            (b, pos.psi_bar)
        }
    };
    let dkappa = linear_dkappa(hat, pert);
    let sub = solve_linear_subsonic(&coeffs, psi_bar, &v_minus, pert, dkappa, opts.n1_plus, opts.elliptic)?;
    let u2m = v_minus.v.column_at("u2", psi_bar);
    let u2p: Vec<f64> = sub.v.data[1].row(0).to_vec();
    let m_bar = hat.m_bar;
    let slope = shock_slope(&u2p, &u2m, &coeffs, m_bar, m_bar)?;
    let h2 = coeffs.y2[1] - coeffs.y2[0];
    let front = ShockFront::new(psi_bar, psi_bar, slope, h2, pert.geometry.length)?;
    Ok(InitialApproximation {
        j1_at_psi: functionals.j1(psi_bar),
        coeffs,
        functionals,
        v_minus,
        v_plus: sub.v,
        elliptic: sub.elliptic,
        front,
        bracket,
        dkappa,
    })
}

/// Linear exit-pressure perturbation of a downstream field column (used by reports).
pub fn exit_pressure(c: &ShockCoefficients, u1: &[f64], s: &[f64], b: &[f64]) -> Vec<f64> {
    let gm1 = c.gas.gamma - 1.0;
    (0..u1.len())
        .map(|j| {
            let p = &c.plus[j];
            -p.rho * p.u * u1[j] - p.p * s[j] / gm1 + p.rho * b[j]
        })
        .collect()
}
