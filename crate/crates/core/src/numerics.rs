//! Splines, quadrature and 1-D root finding shared by the solvers.

use crate::error::{Error, Result};

/// Not-a-knot cubic spline through (x, y); exact for cubics.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 2 {
            return Err(Error::Precondition(format!("spline needs matching samples, got {} and {}", n, y.len())));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("spline abscissae must increase strictly".into()));
        }
        let m = if n < 4 { vec![0.0; n] } else { second_derivatives(&x, &y) };
        Ok(CubicSpline { x, y, m })
    }

    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let y = x.iter().map(|&t| f(t)).collect();
        Self::new(x, y)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and first two derivatives at t (cubic extrapolation outside the knots).
    pub fn eval3(&self, t: f64) -> (f64, f64, f64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval3(t).0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.eval3(t).1
    }

    /// Inverse of an increasing spline on its knot range; Newton safeguarded by bisection.
    pub fn invert(&self, target: f64) -> f64 {
        let (a, b) = (self.x[0], *self.x.last().unwrap());
        let (ya, yb) = (self.y[0], *self.y.last().unwrap());
        if target <= ya {
            return a;
        }
        if target >= yb {
            return b;
        }
        let (mut lo, mut hi) = (a, b);
        let mut x = a + (b - a) * (target - ya) / (yb - ya);
        for _ in 0..100 {
            let (v, d, _) = self.eval3(x);
            let r = v - target;
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut nx = x - r / d;
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() < 1e-16 * (1.0 + x.abs()) {
                return nx;
            }
            x = nx;
        }
        x
    }
}

fn second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let dl: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    // unknowns M_1..M_{n-2}; M_0 and M_{n-1} follow from third-derivative continuity at x_1, x_{n-2}
    let k = n - 2;
    let mut lo = vec![0.0; k];
    let mut di = vec![0.0; k];
    let mut up = vec![0.0; k];
    let mut r = vec![0.0; k];
    for i in 1..n - 1 {
        lo[i - 1] = h[i - 1];
        di[i - 1] = 2.0 * (h[i - 1] + h[i]);
        up[i - 1] = h[i];
        r[i - 1] = 6.0 * (dl[i] - dl[i - 1]);
    }
    let (h0, h1) = (h[0], h[1]);
    di[0] += h0 * (h0 + h1) / h1;
    up[0] -= h0 * h0 / h1;
    let (ha, hb) = (h[n - 3], h[n - 2]);
    di[k - 1] += hb * (ha + hb) / ha;
    lo[k - 1] -= hb * hb / ha;
    let inner = thomas(&lo, &di, &up, &r);
    let mut m = vec![0.0; n];
    m[1..n - 1].copy_from_slice(&inner);
    m[0] = ((h0 + h1) * m[1] - h0 * m[2]) / h1;
    m[n - 1] = ((ha + hb) * m[n - 2] - hb * m[n - 3]) / ha;
    m
}

/// Tridiagonal solve; lo[0] and up[n-1] are ignored.
pub fn thomas(lo: &[f64], di: &[f64], up: &[f64], r: &[f64]) -> Vec<f64> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = up[0] / di[0];
    d[0] = r[0] / di[0];
    for i in 1..n {
        let den = di[i] - lo[i] * c[i - 1];
        c[i] = if i + 1 < n { up[i] / den } else { 0.0 };
        d[i] = (r[i] - lo[i] * d[i - 1]) / den;
    }
    let mut out = vec![0.0; n];
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    out
}

/// A scalar profile given in closed form (polynomial) or by samples.
#[derive(Debug, Clone)]
pub enum Func {
    Poly(Vec<f64>),
    Spline(CubicSpline),
}

impl Func {
    pub fn zero() -> Self {
        Func::Poly(vec![])
    }

    pub fn constant(c: f64) -> Self {
        Func::Poly(vec![c])
    }

    /// Value and first three derivatives.
    pub fn eval_d(&self, t: f64) -> [f64; 4] {
        match self {
            Func::Poly(c) => {
                let mut out = [0.0; 4];
                for (k, slot) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (p, &cp) in c.iter().enumerate().skip(k).rev() {
                        let mut fac = 1.0;
                        for q in 0..k {
                            fac *= (p - q) as f64;
                        }
                        acc = acc * t + cp * fac;
                    }
                    *slot = acc;
                }
                out
            }
            Func::Spline(s) => {
                let (v, d, dd) = s.eval3(t);
                [v, d, dd, 0.0]
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Func::Poly(c) => c.iter().rev().fold(0.0, |acc, &cp| acc * t + cp),
            Func::Spline(s) => s.eval(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.eval_d(t)[1]
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Func::Poly(c) if c.iter().all(|&v| v == 0.0))
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { b } else { a + h * i as f64 }).collect()
}

/// Trapezoid weights on a uniform grid of n nodes with spacing h.
pub fn trap_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

pub fn trapz(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    h * (f[1..n - 1].iter().sum::<f64>() + 0.5 * (f[0] + f[n - 1]))
}

/// Cumulative trapezoid from the first node.
pub fn cumtrapz(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 1..f.len() {
        out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    out
}

/// Simpson's rule on [a,b] for a callable integrand.
pub fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

/// Cumulative integral from each node to the last one, panel-wise Simpson with midpoints.
pub fn cum_simpson_to_end(f: &impl Fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + simpson(f, x[i], x[i + 1]);
    }
    out
}

/// Cumulative integral from the first node, panel-wise Simpson with midpoints.
pub fn cum_simpson_from_start(f: &impl Fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in 1..n {
        out[i] = out[i - 1] + simpson(f, x[i - 1], x[i]);
    }
    out
}

/// Composite Simpson on samples of an odd-length uniform grid.
pub fn simpson_samples(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    assert!(n % 2 == 1 && n >= 3, "composite Simpson needs an odd node count");
    let mut s = f[0] + f[n - 1];
    for (i, v) in f.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Second-order derivative on a uniform grid: central inside, and at the ends a one-sided
/// stencil with the same leading truncation term (h^2/6 times the third derivative),
/// so the error stays smooth up to the boundary.
pub fn diff(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "diff needs at least four samples");
    let mut out = vec![0.0; n];
    out[0] = (-4.0 * f[0] + 7.0 * f[1] - 4.0 * f[2] + f[3]) / (2.0 * h);
    out[n - 1] = (4.0 * f[n - 1] - 7.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    out
}

/// Local four-point Lagrange interpolation on a uniform grid starting at x0.
pub fn cubic_uniform(values: &[f64], x0: f64, h: f64, t: f64) -> f64 {
    let n = values.len();
    if n < 4 {
        let s = ((t - x0) / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n.saturating_sub(2));
        let w = s - i as f64;
        return if n == 1 { values[0] } else { values[i] * (1.0 - w) + values[i + 1] * w };
    }
    let s = (t - x0) / h;
    let i = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                l *= (s - (i + b) as f64) / (a as f64 - b as f64);
            }
        }
        acc += l * values[i + a];
    }
    acc
}

#[derive(Debug, Clone, Copy)]
pub struct RootReport {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bracketed root of a continuous f with f(a), f(b) of opposite sign:
/// secant steps are taken when they stay inside the bracket and shrink it fast enough,
/// bisection otherwise.
pub fn bisect_secant(f: &impl Fn(f64) -> f64, a: f64, b: f64, ftol: f64, max_iter: usize) -> Result<RootReport> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(RootReport { root: a, residual: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(RootReport { root: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Precondition(format!("root not bracketed: f({a})={fa}, f({b})={fb}")));
    }
    let mut width = 2.0 * (b - a).abs();
    for it in 1..=max_iter {
        let sec = b - fb * (b - a) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        let mut x = if sec > lo && sec < hi { sec } else { 0.5 * (a + b) };
        if (b - a).abs() > 0.5 * width {
            x = 0.5 * (a + b);
        }
        width = (b - a).abs();
        let fx = f(x);
        if fx.abs() <= ftol || (hi - lo) < 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            return Ok(RootReport { root: x, residual: fx, iterations: it });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    let x = if fa.abs() < fb.abs() { a } else { b };
    Err(Error::Precondition(format!("root finder stalled near {x} after {max_iter} iterations")))
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
