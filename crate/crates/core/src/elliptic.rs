//! First-order elliptic system on a rectangle, solved through two scalar potentials.
//!
//! System: d1(l1 v1) + d2(l2 v2) = H1 and d1(l3 v2) - d2(l4 v1) = H2, with v1 given on the
//! left/right sides, v2 = 0 at the bottom and v2 given at the top. The solution splits as
//! v = v_hat + v_check where v_hat = (d1 phi_hat / l4, d2 phi_hat / l3) solves a Neumann
//! problem carrying H1 and the boundary data, and v_check = (-d2 phi_check / l1, d1 phi_check / l2)
//! solves a homogeneous Dirichlet problem carrying H2.

use std::path::Path;

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::lagrangian::{Field, Grid};
use crate::numerics::trap_weights;

#[derive(Debug, Clone)]
pub struct EllipticData {
    /// v1 on the left side, per y2 node
    pub h1: Vec<f64>,
    /// v1 on the right side, per y2 node
    pub h2: Vec<f64>,
    /// v2 on the top side, per y1 node
    pub h3: Vec<f64>,
    pub rhs1: Array2<f64>,
    pub rhs2: Array2<f64>,
}

impl EllipticData {
    pub fn zeros(grid: &Grid) -> Self {
        EllipticData {
            h1: vec![0.0; grid.n2],
            h2: vec![0.0; grid.n2],
            h3: vec![0.0; grid.n1],
            rhs1: grid.zeros(),
            rhs2: grid.zeros(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub grid: Grid,
    /// l1..l4 sampled at the y2 nodes
    pub lam: [Vec<f64>; 4],
    pub data: EllipticData,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub defect_tol: f64,
    pub project: bool,
    /// above this many unknowns the conjugate-gradient path is used
    pub direct_limit: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// absorb H2 into an explicit particular field before the potential split
    pub lift: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { defect_tol: 1e-10, project: false, direct_limit: 400_000, cg_tol: 1e-13, cg_max_iter: 20_000, lift: false }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub v: Field,
    pub phi_hat: Array2<f64>,
    pub phi_check: Array2<f64>,
    pub defect: f64,
    /// constant removed from h2 when projecting
    pub shift: f64,
    pub residual_div: f64,
    pub residual_curl: f64,
    /// residuals on the first interior layer next to a side (first order: exact nodal data meet O(h^2) interior values)
    pub boundary_residual: f64,
    /// residuals within two nodes of a corner
    pub corner_residual: f64,
}

/// Left-hand side minus right-hand side of the solvability condition, trapezoid quadrature.
pub fn compatibility_defect(p: &EllipticProblem) -> f64 {
    let g = p.grid;
    let w1 = trap_weights(g.n1, g.h1());
    let w2 = trap_weights(g.n2, g.h2());
    let l1 = &p.lam[0];
    let top = p.lam[1][g.n2 - 1];
    let side: f64 = (0..g.n2).map(|j| w2[j] * l1[j] * (p.data.h2[j] - p.data.h1[j])).sum();
    let wall: f64 = (0..g.n1).map(|i| w1[i] * top * p.data.h3[i]).sum();
    let mut src = 0.0;
    for i in 0..g.n1 {
        let mut row = 0.0;
        for j in 0..g.n2 {
            row += w2[j] * p.data.rhs1[[i, j]];
        }
        src += w1[i] * row;
    }
    side + wall - src
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Neumann,
    Dirichlet,
}

/// Boundary data of a scalar problem: fluxes (a d1 phi, b d2 phi) for Neumann, values for Dirichlet.
#[derive(Debug, Clone)]
pub struct ScalarBoundary {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl ScalarBoundary {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarBoundary { left: vec![0.0; grid.n2], right: vec![0.0; grid.n2], bottom: vec![0.0; grid.n1], top: vec![0.0; grid.n1] }
    }
}

enum Factor {
    Direct(CscCholesky<f64>),
    Cg { k: CsrMatrix<f64>, diag: Vec<f64> },
}

/// Factored 5-point divergence-form operator d1(a d1 .) + d2(b d2 .) with a, b functions of y2.
pub struct ScalarOperator {
    pub grid: Grid,
    pub kind: BoundaryKind,
    a: Vec<f64>,
    b_face: Vec<f64>,
    map: Vec<Option<usize>>,
    unknowns: usize,
    factor: Factor,
    opts: SolveOptions,
}

impl ScalarOperator {
    pub fn new(grid: Grid, kind: BoundaryKind, a: &[f64], b: &[f64], opts: SolveOptions) -> Result<Self> {
        for (name, c) in [("a", a), ("b", b)] {
            if let Some(v) = c.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::NonPositiveCoefficient { which: name.into(), value: *v });
            }
        }
        let (n1, n2) = (grid.n1, grid.n2);
        let b_face: Vec<f64> = (0..n2 - 1).map(|j| 0.5 * (b[j] + b[j + 1])).collect();
        // number along the shorter direction to keep the band narrow
        let order = |i: usize, j: usize| if n2 <= n1 { i * n2 + j } else { j * n1 + i };
        let mut map = vec![None; n1 * n2];
        let direct = (n1 * n2) <= opts.direct_limit;
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for i in 0..n1 {
            for j in 0..n2 {
                let boundary = i == 0 || j == 0 || i == n1 - 1 || j == n2 - 1;
                let pinned = direct && kind == BoundaryKind::Neumann && i == 0 && j == 0;
                let skip = (kind == BoundaryKind::Dirichlet && boundary) || pinned;
                if !skip {
                    slots.push((order(i, j), i * n2 + j));
                }
            }
        }
        slots.sort();
        for (k, &(_, node)) in slots.iter().enumerate() {
            map[node] = Some(k);
        }
        let unknowns = slots.len();
        let mut op = ScalarOperator {
            grid,
            kind,
            a: a.to_vec(),
            b_face,
            map,
            unknowns,
            factor: Factor::Cg { k: CsrMatrix::zeros(0, 0), diag: vec![] },
            opts,
        };
        let coo = op.assemble();
        op.factor = if direct {
            let csc = CscMatrix::from(&coo);
            let chol = CscCholesky::factor(&csc).map_err(|_| Error::LinearSolver { iterations: 0, residual: f64::NAN })?;
            Factor::Direct(chol)
        } else {
            let k = CsrMatrix::from(&coo);
            let mut diag = vec![0.0; unknowns];
            for (r, c, v) in k.triplet_iter() {
                if r == c {
                    diag[r] += *v;
                }
            }
            Factor::Cg { k, diag }
        };
        Ok(op)
    }

    fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        (trap_weights(self.grid.n1, self.grid.h1()), trap_weights(self.grid.n2, self.grid.h2()))
    }

    /// Couplings (node, neighbour, conductance) over interior faces.
    fn faces(&self) -> Vec<(usize, usize, f64)> {
        let g = self.grid;
        let (w1, w2) = self.weights();
        let (h1, h2) = (g.h1(), g.h2());
        let mut out = Vec::with_capacity(2 * g.n1 * g.n2);
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                let node = i * g.n2 + j;
                if i + 1 < g.n1 {
                    out.push((node, node + g.n2, self.a[j] * w2[j] / h1));
                }
                if j + 1 < g.n2 {
                    out.push((node, node + 1, self.b_face[j] * w1[i] / h2));
                }
            }
        }
        out
    }

    fn assemble(&self) -> CooMatrix<f64> {
        let n = self.unknowns;
        let mut coo = CooMatrix::new(n, n);
        for (p, q, c) in self.faces() {
            match (self.map[p], self.map[q]) {
                (Some(a), Some(b)) => {
                    coo.push(a, a, c);
                    coo.push(b, b, c);
                    coo.push(a, b, -c);
                    coo.push(b, a, -c);
                }
                (Some(a), None) => coo.push(a, a, c),
                (None, Some(b)) => coo.push(b, b, c),
                (None, None) => {}
            }
        }
        coo
    }

    /// Solve d1(a d1 phi) + d2(b d2 phi) = f; the Neumann solution has zero weighted mean.
    pub fn solve(&self, f: &Array2<f64>, bc: &ScalarBoundary) -> Result<Array2<f64>> {
        let g = self.grid;
        let (n1, n2) = (g.n1, g.n2);
        let (w1, w2) = self.weights();
        // nodal right-hand side of K phi = bnd - w f, K the positive operator
        let mut r = Array2::<f64>::zeros((n1, n2));
        for i in 0..n1 {
            for j in 0..n2 {
                r[[i, j]] = -w1[i] * w2[j] * f[[i, j]];
            }
        }
        let mut known = Array2::<f64>::zeros((n1, n2));
        match self.kind {
            BoundaryKind::Neumann => {
                for j in 0..n2 {
                    r[[0, j]] -= w2[j] * bc.left[j];
                    r[[n1 - 1, j]] += w2[j] * bc.right[j];
                }
                for i in 0..n1 {
                    r[[i, 0]] -= w1[i] * bc.bottom[i];
                    r[[i, n2 - 1]] += w1[i] * bc.top[i];
                }
            }
            BoundaryKind::Dirichlet => {
                for j in 0..n2 {
                    known[[0, j]] = bc.left[j];
                    known[[n1 - 1, j]] = bc.right[j];
                }
                for i in 0..n1 {
                    known[[i, 0]] = bc.bottom[i];
                    known[[i, n2 - 1]] = bc.top[i];
                }
            }
        }
        let mut rhs = DVector::<f64>::zeros(self.unknowns);
        for i in 0..n1 {
            for j in 0..n2 {
                if let Some(k) = self.map[i * n2 + j] {
                    rhs[k] += r[[i, j]];
                }
            }
        }
        if self.kind == BoundaryKind::Dirichlet {
            for (p, q, c) in self.faces() {
                let (pi, pj) = (p / n2, p % n2);
                let (qi, qj) = (q / n2, q % n2);
                if let (Some(a), None) = (self.map[p], self.map[q]) {
                    rhs[a] += c * known[[qi, qj]];
                }
                if let (None, Some(b)) = (self.map[p], self.map[q]) {
                    rhs[b] += c * known[[pi, pj]];
                }
            }
        }
        let x = match &self.factor {
            Factor::Direct(ch) => {
                let sol = ch.solve(&rhs);
                DVector::from_column_slice(sol.as_slice())
            }
            Factor::Cg { k, diag } => pcg(k, diag, &rhs, self.opts.cg_tol, self.opts.cg_max_iter, self.kind == BoundaryKind::Neumann)?,
        };
        let mut phi = known;
        for i in 0..n1 {
            for j in 0..n2 {
                if let Some(k) = self.map[i * n2 + j] {
                    phi[[i, j]] = x[k];
                }
            }
        }
        if self.kind == BoundaryKind::Neumann {
            let mean = weighted_mean(&phi, &w1, &w2);
            phi.mapv_inplace(|v| v - mean);
        }
        Ok(phi)
    }
}

pub fn weighted_mean(phi: &Array2<f64>, w1: &[f64], w2: &[f64]) -> f64 {
    let (mut s, mut area) = (0.0, 0.0);
    for i in 0..w1.len() {
        for j in 0..w2.len() {
            s += w1[i] * w2[j] * phi[[i, j]];
            area += w1[i] * w2[j];
        }
    }
    s / area
}

/// Jacobi-preconditioned conjugate gradients; `null_ones` projects out the constant vector.
fn pcg(k: &CsrMatrix<f64>, diag: &[f64], b: &DVector<f64>, tol: f64, max_iter: usize, null_ones: bool) -> Result<DVector<f64>> {
    let n = b.len();
    let project = |v: &mut DVector<f64>| {
        if null_ones {
            let m = v.sum() / n as f64;
            v.add_scalar_mut(-m);
        }
    };
    let mut x = DVector::<f64>::zeros(n);
    let mut r = b.clone();
    project(&mut r);
    let bnorm = r.norm().max(1e-300);
    let mut z = DVector::from_iterator(n, r.iter().zip(diag).map(|(a, d)| a / d));
    project(&mut z);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 0..max_iter {
        if r.norm() <= tol * bnorm {
            return Ok(x);
        }
        let q = k * &p;
        let alpha = rz / p.dot(&q);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        project(&mut r);
        z = DVector::from_iterator(n, r.iter().zip(diag).map(|(a, d)| a / d));
        project(&mut z);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::LinearSolver { iterations: max_iter, residual: r.norm() / bnorm })
}

/// v1 of the lift: -(1/l4) int_0^y2 H2, integrated with `leapfrog_integral`.
fn curl_lift(g: &Grid, l4: &[f64], rhs2: &Array2<f64>) -> Array2<f64> {
    let mut out = g.zeros();
    for i in 0..g.n1 {
        let c = leapfrog_integral(&rhs2.row(i).to_vec(), g.h2());
        for j in 0..g.n2 {
            out[[i, j]] = -c[j] / l4[j];
        }
    }
    out
}

/// Cumulative integral whose central differences reproduce `f` exactly at interior nodes, so
/// the lift adds no truncation error to the centered curl residual. The first step is the
/// third-order one-sided rule; the two sublattices then advance by midpoint steps of 2h.
pub fn leapfrog_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut c = vec![0.0; n];
    if n < 3 {
        return crate::numerics::cumtrapz(f, h);
    }
    c[1] = h * (5.0 * f[0] + 8.0 * f[1] - f[2]) / 12.0;
    for j in 1..n - 1 {
        c[j + 1] = c[j - 1] + 2.0 * h * f[j];
    }
    c
}

/// Central differences inside, half-cell one-sided at the ends, so the trapezoid sum of the
/// result is exactly f(last) - f(first).
pub fn d1_telescoping(f: &Array2<f64>, h: f64) -> Array2<f64> {
    let (n1, n2) = f.dim();
    let mut out = Array2::zeros((n1, n2));
    for j in 0..n2 {
        out[[0, j]] = (f[[1, j]] - f[[0, j]]) / h;
        out[[n1 - 1, j]] = (f[[n1 - 1, j]] - f[[n1 - 2, j]]) / h;
        for i in 1..n1 - 1 {
            out[[i, j]] = (f[[i + 1, j]] - f[[i - 1, j]]) / (2.0 * h);
        }
    }
    out
}

/// `numerics::diff` along axis 0 (y1).
pub fn d1(f: &Array2<f64>, h: f64) -> Array2<f64> {
    let (n1, n2) = f.dim();
    let mut out = Array2::zeros((n1, n2));
    for j in 0..n2 {
        let col = crate::numerics::diff(&f.column(j).to_vec(), h);
        out.column_mut(j).assign(&ndarray::Array1::from(col));
    }
    out
}

/// Same as `d1` along axis 1 (y2).
pub fn d2(f: &Array2<f64>, h: f64) -> Array2<f64> {
    d1(&f.t().to_owned(), h).t().to_owned()
}

/// Cached factorizations for repeated solves with fixed coefficients.
pub struct EllipticSolver {
    pub grid: Grid,
    pub lam: [Vec<f64>; 4],
    hat: ScalarOperator,
    check: ScalarOperator,
    pub opts: SolveOptions,
}

impl EllipticSolver {
    pub fn new(grid: Grid, lam: [Vec<f64>; 4], opts: SolveOptions) -> Result<Self> {
        for (k, l) in lam.iter().enumerate() {
            if l.len() != grid.n2 {
                return Err(Error::Precondition(format!("lambda{} has {} samples, grid has {}", k + 1, l.len(), grid.n2)));
            }
            if let Some(v) = l.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::NonPositiveCoefficient { which: format!("lambda{}", k + 1), value: *v });
            }
        }
        let n2 = grid.n2;
        let ratio = |p: usize, q: usize| (0..n2).map(|j| lam[p][j] / lam[q][j]).collect::<Vec<_>>();
        let hat = ScalarOperator::new(grid, BoundaryKind::Neumann, &ratio(0, 3), &ratio(1, 2), opts)?;
        let check = ScalarOperator::new(grid, BoundaryKind::Dirichlet, &ratio(2, 1), &ratio(3, 0), opts)?;
        Ok(EllipticSolver { grid, lam, hat, check, opts })
    }

    pub fn problem(&self, data: EllipticData) -> EllipticProblem {
        EllipticProblem { grid: self.grid, lam: self.lam.clone(), data }
    }

    pub fn solve(&self, data: &EllipticData) -> Result<EllipticSolution> {
        let g = self.grid;
        let (n1, n2) = (g.n1, g.n2);
        let (h1, h2) = (g.h1(), g.h2());
        let lam = &self.lam;
        let mut data = data.clone();
        let defect = compatibility_defect(&self.problem(data.clone()));
        let mut shift = 0.0;
        if defect.abs() > self.opts.defect_tol && !self.opts.project {
            return Err(Error::IncompatibleData { defect });
        }
        if self.opts.project {
            let w2 = trap_weights(n2, h2);
            let il1: f64 = (0..n2).map(|j| w2[j] * lam[0][j]).sum();
            shift = defect / il1;
            for v in data.h2.iter_mut() {
                *v -= shift;
            }
        }

        // With a nonzero curl source at a corner each potential carries an r^2 log r term even when v
        // is smooth, and their discretization errors no longer cancel. The lift v_c = (-int_0^y2 H2 / l4, 0)
        // takes the whole curl source; the defect is unchanged because its y1-derivative telescopes.
        let original = data.clone();
        let lift = if self.opts.lift {
            let vc = curl_lift(&g, &lam[3], &data.rhs2);
            let dvc = d1_telescoping(&vc, h1);
            for j in 0..n2 {
                data.h1[j] -= vc[[0, j]];
                data.h2[j] -= vc[[n1 - 1, j]];
                for i in 0..n1 {
                    data.rhs1[[i, j]] -= lam[0][j] * dvc[[i, j]];
                    data.rhs2[[i, j]] = 0.0;
                }
            }
            Some(vc)
        } else {
            None
        };

        let mut bc = ScalarBoundary::zeros(&g);
        for j in 0..n2 {
            bc.left[j] = lam[0][j] * data.h1[j];
            bc.right[j] = lam[0][j] * data.h2[j];
        }
        for i in 0..n1 {
            bc.top[i] = lam[1][n2 - 1] * data.h3[i];
        }
        let phi_hat = self.hat.solve(&data.rhs1, &bc)?;
        let phi_check = self.check.solve(&data.rhs2, &ScalarBoundary::zeros(&g))?;

        let dh1 = d1(&phi_hat, h1);
        let dh2 = d2(&phi_hat, h2);
        let dc1 = d1(&phi_check, h1);
        let dc2 = d2(&phi_check, h2);
        let mut v = Field::new(g, &["v1", "v2"]);
        {
            let mut v1 = Array2::zeros((n1, n2));
            let mut v2 = Array2::zeros((n1, n2));
            for i in 0..n1 {
                for j in 0..n2 {
                    v1[[i, j]] = if i == 0 {
                        data.h1[j]
                    } else if i == n1 - 1 {
                        data.h2[j]
                    } else {
                        dh1[[i, j]] / lam[3][j] - dc2[[i, j]] / lam[0][j]
                    };
                    v2[[i, j]] = if j == 0 {
                        0.0
                    } else if j == n2 - 1 {
                        data.h3[i]
                    } else {
                        dh2[[i, j]] / lam[2][j] + dc1[[i, j]] / lam[1][j]
                    };
                }
            }
            if let Some(vc) = &lift {
                v1 += vc;
            }
            v.data[0] = v1;
            v.data[1] = v2;
        }
        let r = residuals(&g, lam, &v.data[0], &v.data[1], &original);
        Ok(EllipticSolution {
            v,
            phi_hat,
            phi_check,
            defect,
            shift,
            residual_div: r.div,
            residual_curl: r.curl,
            boundary_residual: r.boundary,
            corner_residual: r.corner,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ResidualSplit {
    pub div: f64,
    pub curl: f64,
    pub boundary: f64,
    pub corner: f64,
}

/// Corner neighbourhoods cover this fraction of each side (and at least three nodes). Corner
/// singularities of the data reach a fixed physical distance, not a fixed node count.
pub const CORNER_FRACTION: f64 = 0.1;

/// Classify an interior node: 0 deep interior, 1 first layer next to a side, 2 corner neighbourhood.
pub fn node_zone(i: usize, j: usize, n1: usize, n2: usize) -> u8 {
    let near = |k: usize, n: usize| {
        let d = k.min(n - 1 - k);
        d <= 2 || (d as f64) <= CORNER_FRACTION * (n - 1) as f64
    };
    if near(i, n1) && near(j, n2) {
        2
    } else if i == 1 || j == 1 || i + 2 == n1 || j + 2 == n2 {
        1
    } else {
        0
    }
}

/// Max central-difference residuals of both equations at interior nodes, split by zone.
pub fn residuals(g: &Grid, lam: &[Vec<f64>; 4], v1: &Array2<f64>, v2: &Array2<f64>, data: &EllipticData) -> ResidualSplit {
    let (n1, n2) = (g.n1, g.n2);
    let (h1, h2) = (g.h1(), g.h2());
    let mut out = ResidualSplit::default();
    for i in 1..n1 - 1 {
        for j in 1..n2 - 1 {
            let div = (lam[0][j] * (v1[[i + 1, j]] - v1[[i - 1, j]])) / (2.0 * h1)
                + (lam[1][j + 1] * v2[[i, j + 1]] - lam[1][j - 1] * v2[[i, j - 1]]) / (2.0 * h2)
                - data.rhs1[[i, j]];
            let curl = (lam[2][j] * (v2[[i + 1, j]] - v2[[i - 1, j]])) / (2.0 * h1)
                - (lam[3][j + 1] * v1[[i, j + 1]] - lam[3][j - 1] * v1[[i, j - 1]]) / (2.0 * h2)
                - data.rhs2[[i, j]];
            match node_zone(i, j, n1, n2) {
                0 => {
                    out.div = out.div.max(div.abs());
                    out.curl = out.curl.max(curl.abs());
                }
                1 => out.boundary = out.boundary.max(div.abs()).max(curl.abs()),
                _ => out.corner = out.corner.max(div.abs()).max(curl.abs()),
            }
        }
    }
    out
}

/// One-off solve of a problem.
pub fn solve(p: &EllipticProblem, opts: SolveOptions) -> Result<EllipticSolution> {
    EllipticSolver::new(p.grid, p.lam.clone(), opts)?.solve(&p.data)
}

/// Scalar problem d1(a d1 phi) + d2(b d2 phi) = f.
pub fn solve_scalar(
    kind: BoundaryKind,
    grid: Grid,
    a: &[f64],
    b: &[f64],
    f: &Array2<f64>,
    bc: &ScalarBoundary,
    opts: SolveOptions,
) -> Result<Array2<f64>> {
    ScalarOperator::new(grid, kind, a, b, opts)?.solve(f, bc)
}

impl EllipticSolution {
    pub fn dump(&self, dir: &Path, tag: &str) -> Result<()> {
        self.v.write_csv(&dir.join(format!("elliptic_{tag}.csv")), None)
    }
}
