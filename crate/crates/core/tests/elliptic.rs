use approx::assert_relative_eq;
use ndarray::Array2;
use rotshock::elliptic::*;
use rotshock::lagrangian::Grid;
use rotshock::numerics::trap_weights;

mod common;
use common::mms::*;

fn ones(g: &Grid) -> [Vec<f64>; 4] {
    [vec![1.0; g.n2], vec![1.0; g.n2], vec![1.0; g.n2], vec![1.0; g.n2]]
}

#[test]
fn defect_examples() {
    let g = grid(33, 33, 0.0, 1.0, 1.0);
    let mut p = EllipticProblem { grid: g, lam: ones(&g), data: EllipticData::zeros(&g) };
    assert_eq!(compatibility_defect(&p), 0.0);
    p.data.h3 = vec![1.0; g.n1];
    assert_relative_eq!(compatibility_defect(&p), 1.0, epsilon = 1e-14);
    p.data.h3 = vec![0.0; g.n1];
    p.data.rhs1.fill(1.0);
    assert_relative_eq!(compatibility_defect(&p), -1.0, epsilon = 1e-14);
}

#[test]
fn zero_data_gives_zero() {
    let g = grid(17, 21, 0.5, 2.0, 1.3);
    let s = solve(&EllipticProblem { grid: g, lam: ones(&g), data: EllipticData::zeros(&g) }, SolveOptions::default()).unwrap();
    assert_eq!(s.v.max_abs(), 0.0);
}

#[test]
fn manufactured_solution_second_order() {
    let (e1, e2) = (mms_error(65), mms_error(129));
    let ratio = e1 / e2;
    assert!(ratio > 3.5 && ratio < 4.5, "errors {e1:e} {e2:e} ratio {ratio}");
}

#[test]
fn first_order_residuals_second_order_in_interior() {
    let (_, a) = mms(65);
    let (_, b) = mms(129);
    let rd = a.residual_div / b.residual_div;
    let rc = a.residual_curl / b.residual_curl;
    assert!(rd > 3.5 && rd < 4.5, "div ratio {rd}");
    assert!(rc > 3.5 && rc < 4.5, "curl ratio {rc}");
    // the layer next to the sides converges at first order
    let rb = a.boundary_residual / b.boundary_residual;
    assert!(rb > 1.7 && rb < 4.5, "boundary ratio {rb}");
}

#[test]
fn dirichlet_poisson_matches_fourier_series() {
    let n = 257;
    let g = grid(n, n, 0.0, 1.0, 1.0);
    let mut d = EllipticData::zeros(&g);
    d.rhs2.fill(1.0);
    let s = solve(&EllipticProblem { grid: g, lam: ones(&g), data: d }, SolveOptions::default()).unwrap();
    let pi = std::f64::consts::PI;
    let series = |x: f64, y: f64| {
        let mut acc = 0.0;
        for m in (1..400).step_by(2) {
            for k in (1..400).step_by(2) {
                let (mf, kf) = (m as f64, k as f64);
                acc -= 16.0 / (pi * pi * mf * kf) / (pi * pi * (mf * mf + kf * kf)) * (mf * pi * x).sin() * (kf * pi * y).sin();
            }
        }
        acc
    };
    let mut e: f64 = 0.0;
    for &(i, j) in &[(64, 64), (128, 128), (32, 200), (128, 16), (240, 100)] {
        e = e.max((s.phi_check[[i, j]] - series(g.y1(i), g.y2(j))).abs());
    }
    assert!(e < 1e-6, "max error {e:e}");
}

#[test]
fn incompatible_data_rejected_with_defect() {
    let g = grid(33, 25, 0.0, 1.5, 1.1);
    let lam: [Vec<f64>; 4] = std::array::from_fn(|k| g.y2s().iter().map(|&y| lam_fn(y)[k]).collect());
    let d = random_data(&g, 3);
    let p = EllipticProblem { grid: g, lam: lam.clone(), data: d.clone() };
    let delta = compatibility_defect(&p);
    assert!(delta.abs() > 1e-3);
    match solve(&p, SolveOptions::default()) {
        Err(rotshock::Error::IncompatibleData { defect }) => assert_eq!(defect, delta),
        other => panic!("expected rejection, got {:?}", other.map(|s| s.defect)),
    }
    let s = solve(&p, SolveOptions { project: true, ..Default::default() }).unwrap();
    let w2 = trap_weights(g.n2, g.h2());
    let il1: f64 = (0..g.n2).map(|j| w2[j] * lam[0][j]).sum();
    assert_relative_eq!(s.shift, delta / il1, max_relative = 1e-13);
    let mut fixed = p.clone();
    for v in fixed.data.h2.iter_mut() {
        *v -= s.shift;
    }
    assert!(compatibility_defect(&fixed).abs() <= 1e-13);
}

#[test]
fn defect_is_telescoped_sum_of_discrete_equations() {
    let total = telescoped_total();
    assert!(total.abs() <= 1e-12, "telescoped total {total:e}");
}

#[test]
fn linearity_and_gauge() {
    let g = grid(33, 29, 0.0, 1.2, 1.0);
    let lam: [Vec<f64>; 4] = std::array::from_fn(|k| g.y2s().iter().map(|&y| lam_fn(y)[k]).collect());
    let solver = EllipticSolver::new(g, lam, SolveOptions { project: true, ..Default::default() }).unwrap();
    let mk = |seed| {
        let mut d = random_data(&g, seed);
        let def = compatibility_defect(&solver.problem(d.clone()));
        // make compatible by adjusting the right data
        let il1: f64 = trap_weights(g.n2, g.h2()).iter().enumerate().map(|(j, w)| w * solver.lam[0][j]).sum();
        for v in d.h2.iter_mut() {
            *v -= def / il1;
        }
        d
    };
    let (p1, p2) = (mk(5), mk(9));
    let mut comb = p1.clone();
    comb.h1 = p1.h1.iter().zip(&p2.h1).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    comb.h2 = p1.h2.iter().zip(&p2.h2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    comb.h3 = p1.h3.iter().zip(&p2.h3).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
    comb.rhs1 = &p1.rhs1 * 2.0 - &p2.rhs1 * 3.0;
    comb.rhs2 = &p1.rhs2 * 2.0 - &p2.rhs2 * 3.0;
    let (s1, s2, s) = (solver.solve(&p1).unwrap(), solver.solve(&p2).unwrap(), solver.solve(&comb).unwrap());
    for k in 0..2 {
        let diff: Array2<f64> = &s.v.data[k] - &(&s1.v.data[k] * 2.0 - &s2.v.data[k] * 3.0);
        assert!(diff.iter().all(|v| v.abs() < 1e-10));
    }
    let mean = weighted_mean(&s.phi_hat, &trap_weights(g.n1, g.h1()), &trap_weights(g.n2, g.h2()));
    assert!(mean.abs() <= 1e-12);
    // boundary conditions exact at nodes
    for j in 0..g.n2 {
        assert_eq!(s.v.data[0][[0, j]], comb.h1[j]);
    }
    for i in 0..g.n1 {
        assert_eq!(s.v.data[1][[i, 0]], 0.0);
        assert_eq!(s.v.data[1][[i, g.n2 - 1]], comb.h3[i]);
    }
}

#[test]
fn scalar_dirichlet_manufactured() {
    let pi = std::f64::consts::PI;
    let err = |n: usize| {
        let g = grid(n, n, 0.0, 1.0, 1.0);
        let mut f = g.zeros();
        for i in 0..n {
            for j in 0..n {
                f[[i, j]] = -2.0 * pi * pi * (pi * g.y1(i)).sin() * (pi * g.y2(j)).sin();
            }
        }
        let one = vec![1.0; n];
        let phi = solve_scalar(BoundaryKind::Dirichlet, g, &one, &one, &f, &ScalarBoundary::zeros(&g), SolveOptions::default()).unwrap();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                e = e.max((phi[[i, j]] - (pi * g.y1(i)).sin() * (pi * g.y2(j)).sin()).abs());
            }
        }
        e
    };
    let r = err(33) / err(65);
    assert!(r > 3.5 && r < 4.5, "ratio {r}");
    let g = grid(9, 9, 0.0, 1.0, 1.0);
    let one = vec![1.0; 9];
    let z = solve_scalar(BoundaryKind::Dirichlet, g, &one, &one, &g.zeros(), &ScalarBoundary::zeros(&g), SolveOptions::default()).unwrap();
    assert!(z.iter().all(|v| *v == 0.0));
}

#[test]
fn cg_fallback_matches_direct() {
    let g = grid(41, 37, 0.0, 1.3, 1.1);
    let lam: [Vec<f64>; 4] = std::array::from_fn(|k| g.y2s().iter().map(|&y| lam_fn(y)[k]).collect());
    let d = random_data(&g, 21);
    let p = EllipticProblem { grid: g, lam, data: d };
    let direct = solve(&p, SolveOptions { project: true, ..Default::default() }).unwrap();
    let cg = solve(&p, SolveOptions { project: true, direct_limit: 0, ..Default::default() }).unwrap();
    for k in 0..2 {
        let e = (&direct.v.data[k] - &cg.v.data[k]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(e < 1e-9, "component {k}: {e:e}");
    }
}

#[test]
fn nonpositive_coefficient_rejected() {
    let g = grid(9, 9, 0.0, 1.0, 1.0);
    let mut lam = ones(&g);
    lam[2][3] = 0.0;
    assert!(EllipticSolver::new(g, lam, SolveOptions::default()).is_err());
}

proptest::proptest! {
    #[test]
    fn leapfrog_differences_reproduce_integrand(f in proptest::collection::vec(-10.0f64..10.0, 3..40), h in 0.01f64..1.0) {
        let c = leapfrog_integral(&f, h);
        proptest::prop_assert_eq!(c[0], 0.0);
        for j in 1..f.len() - 1 {
            let d = (c[j + 1] - c[j - 1]) / (2.0 * h);
            proptest::prop_assert!((d - f[j]).abs() <= 1e-12 * (1.0 + f[j].abs()) / h);
        }
    }
}

#[test]
fn leapfrog_exact_for_linear() {
    let h = 0.1;
    let f: Vec<f64> = (0..11).map(|j| 2.0 - 3.0 * j as f64 * h).collect();
    let c = leapfrog_integral(&f, h);
    for (j, v) in c.iter().enumerate() {
        let x = j as f64 * h;
        assert_relative_eq!(*v, 2.0 * x - 1.5 * x * x, epsilon = 1e-14);
    }
}
