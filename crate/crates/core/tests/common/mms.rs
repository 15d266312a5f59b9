//! Manufactured problem for the elliptic solver.

use rotshock::elliptic::*;
use rotshock::lagrangian::Grid;
use rotshock::numerics::trap_weights;

pub fn grid(n1: usize, n2: usize, a: f64, b: f64, mb: f64) -> Grid {
    Grid::new(n1, n2, a, b, mb, mb).unwrap()
}

// manufactured solution built from smooth potentials satisfying the gauges
pub fn lam_fn(y2: f64) -> [f64; 4] {
    [1.0 + 0.3 * y2, 2.0 - 0.4 * y2, 1.5 + 0.2 * y2 * y2, 0.8 + 0.1 * y2]
}
pub fn dlam_fn(y2: f64) -> [f64; 4] {
    [0.3, -0.4, 0.4 * y2, 0.1]
}
pub const A: f64 = 0.3;
pub const B: f64 = 1.7;
pub const MB: f64 = 1.2;
// phi_hat with d2 phi_hat = 0 at y2 = 0; phi_check vanishing on the boundary
pub fn phi_hat(x: f64, y: f64) -> [f64; 5] {
    let e = (0.5 * x).exp();
    let (c, s) = ((1.3 * y).cos(), (1.3 * y).sin());
    // value, d1, d11, d2, d22
    [e * c + x * y * y, 0.5 * e * c + y * y, 0.25 * e * c, -1.3 * e * s + 2.0 * x * y, -1.69 * e * c + 2.0 * x]
}
pub fn phi_check(x: f64, y: f64) -> [f64; 5] {
    let p = std::f64::consts::PI / (B - A);
    let q = std::f64::consts::PI / MB;
    let (sx, cx) = ((p * (x - A)).sin(), (p * (x - A)).cos());
    let (sy, cy) = ((q * y).sin(), (q * y).cos());
    let v = (1.0 + x) * sx * sy;
    [v, sx * sy + (1.0 + x) * p * cx * sy, 2.0 * p * cx * sy - (1.0 + x) * p * p * sx * sy, (1.0 + x) * sx * q * cy, -q * q * v]
}
pub fn v_exact(y1: f64, y2: f64) -> (f64, f64) {
    let (l, h, c) = (lam_fn(y2), phi_hat(y1, y2), phi_check(y1, y2));
    (h[1] / l[3] - c[3] / l[0], h[3] / l[2] + c[1] / l[1])
}
pub fn sources(y1: f64, y2: f64) -> (f64, f64) {
    let (l, dl, h, c) = (lam_fn(y2), dlam_fn(y2), phi_hat(y1, y2), phi_check(y1, y2));
    let r2 = l[1] / l[2];
    let dr2 = (dl[1] * l[2] - l[1] * dl[2]) / (l[2] * l[2]);
    let s2 = l[3] / l[0];
    let ds2 = (dl[3] * l[0] - l[3] * dl[0]) / (l[0] * l[0]);
    let h1 = l[0] / l[3] * h[2] + dr2 * h[3] + r2 * h[4];
    let h2 = l[2] / l[1] * c[2] + ds2 * c[3] + s2 * c[4];
    (h1, h2)
}

pub fn mms_error(n: usize) -> f64 {
    mms(n).0
}

pub fn mms(n: usize) -> (f64, EllipticSolution) {
    let g = grid(n, n, A, B, MB);
    let y2 = g.y2s();
    let lam: [Vec<f64>; 4] = std::array::from_fn(|k| y2.iter().map(|&y| lam_fn(y)[k]).collect());
    let mut d = EllipticData::zeros(&g);
    for j in 0..g.n2 {
        d.h1[j] = v_exact(g.y1a, y2[j]).0;
        d.h2[j] = v_exact(g.y1b, y2[j]).0;
    }
    for i in 0..g.n1 {
        d.h3[i] = v_exact(g.y1(i), g.m_bar).1;
        for j in 0..g.n2 {
            let (a, b) = sources(g.y1(i), y2[j]);
            d.rhs1[[i, j]] = a;
            d.rhs2[[i, j]] = b;
        }
    }
    let opts = SolveOptions { project: true, defect_tol: 1e-2, ..Default::default() };
    let s = solve(&EllipticProblem { grid: g, lam, data: d }, opts).unwrap();
    let mut e: f64 = 0.0;
    for i in 0..g.n1 {
        for j in 0..g.n2 {
            let (a, b) = v_exact(g.y1(i), y2[j]);
            e = e.max((s.v.data[0][[i, j]] - a).abs()).max((s.v.data[1][[i, j]] - b).abs());
        }
    }
    (e, s)
}

pub fn random_data(g: &Grid, seed: u64) -> EllipticData {
    // deterministic pseudo-random smooth data
    let r = |k: u64| (((seed * 7919 + k * 104729) % 1000) as f64) / 1000.0 - 0.5;
    let mut d = EllipticData::zeros(g);
    for j in 0..g.n2 {
        let y = g.y2(j);
        d.h1[j] = r(1) + r(2) * y;
        d.h2[j] = r(3) * (2.0 * y).sin();
    }
    for i in 0..g.n1 {
        let x = g.y1(i);
        d.h3[i] = r(4) * x * x;
        for j in 0..g.n2 {
            let y = g.y2(j);
            d.rhs1[[i, j]] = r(5) * (x + y).cos();
            d.rhs2[[i, j]] = r(6) * x * y;
        }
    }
    d
}

/// Sum of the assembled finite-volume equations for phi_hat over a random compatible-projected
/// problem. Interior fluxes cancel pairwise, so it must vanish to roundoff.
pub fn telescoped_total() -> f64 {
    let g = grid(29, 23, 0.2, 1.4, 0.9);
    let lam: [Vec<f64>; 4] = std::array::from_fn(|k| g.y2s().iter().map(|&y| lam_fn(y)[k]).collect());
    let d = random_data(&g, 11);
    let p = EllipticProblem { grid: g, lam: lam.clone(), data: d.clone() };
    let s = solve(&p, SolveOptions { project: true, ..Default::default() }).unwrap();
    let (w1, w2) = (trap_weights(g.n1, g.h1()), trap_weights(g.n2, g.h2()));
    let phi = &s.phi_hat;
    let (h1, h2) = (g.h1(), g.h2());
    let a: Vec<f64> = (0..g.n2).map(|j| lam[0][j] / lam[3][j]).collect();
    let b: Vec<f64> = (0..g.n2).map(|j| lam[1][j] / lam[2][j]).collect();
    // interior fluxes cancel pairwise, so the total is boundary flux minus sources
    let mut total = 0.0;
    for i in 0..g.n1 {
        for j in 0..g.n2 {
            let mut out = 0.0;
            let fx = |ii: usize| a[j] * (phi[[ii + 1, j]] - phi[[ii, j]]) / h1;
            let fy = |jj: usize| 0.5 * (b[jj] + b[jj + 1]) * (phi[[i, jj + 1]] - phi[[i, jj]]) / h2;
            out += w2[j] * (if i + 1 < g.n1 { fx(i) } else { lam[0][j] * (d.h2[j] - s.shift) });
            out -= w2[j] * (if i > 0 { fx(i - 1) } else { lam[0][j] * d.h1[j] });
            out += w1[i] * (if j + 1 < g.n2 { fy(j) } else { lam[1][g.n2 - 1] * d.h3[i] });
            out -= w1[i] * (if j > 0 { fy(j - 1) } else { 0.0 });
            total += out - w1[i] * w2[j] * d.rhs1[[i, j]];
        }
    }
    total
}
