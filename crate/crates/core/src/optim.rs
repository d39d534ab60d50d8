//! Dense BFGS minimizer with a strong-Wolfe line search.
//!
//! Near a minimum the objective differences fall to rounding level long
//! before the gradient reaches a tight tolerance, so the line search also
//! accepts steps meeting the approximate Wolfe conditions (Hager & Zhang)
//! provided the objective does not rise by more than a few ulps.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    pub max_iters: usize,
    /// Convergence threshold on the max-norm of the gradient.
    pub grad_tol: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self { max_iters: 5000, grad_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_inf: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective value after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(fabs(*v)))
}

struct Point {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

struct LineSearch<'a, F> {
    func: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    f_tol: f64,
    evals: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        self.evals += 1;
        let x: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + alpha * di).collect();
        let mut g = vec![0.0; x.len()];
        let f = (self.func)(&x, &mut g);
        let slope = dot(&g, self.d);
        Point { alpha, f, slope, x, g }
    }

    fn sufficient_decrease(&self, pt: &Point) -> bool {
        pt.f <= self.f0 + C1 * pt.alpha * self.slope0
    }

    fn acceptable(&self, pt: &Point) -> bool {
        if !pt.f.is_finite() {
            return false;
        }
        let strong = self.sufficient_decrease(pt) && fabs(pt.slope) <= -C2 * self.slope0;
        let approx = pt.f <= self.f0 + self.f_tol
            && pt.slope >= C2 * self.slope0
            && pt.slope <= (2.0 * C1 - 1.0) * self.slope0;
        strong || approx
    }

    fn run(&mut self, alpha0: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            slope: self.slope0,
            x: self.x.to_vec(),
            g: Vec::new(),
        };
        let mut alpha = alpha0;
        let mut best: Option<Point> = None;
        let mut first = true;
        while self.evals < MAX_LINE_EVALS {
            let pt = self.eval(alpha);
            if !pt.f.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if self.acceptable(&pt) {
                return Some(pt);
            }
            track_best(&mut best, &pt, self.f0);
            if !self.sufficient_decrease(&pt) || (!first && pt.f >= prev.f) {
                return self.zoom(prev, pt, best);
            }
            if pt.slope >= 0.0 {
                return self.zoom(pt, prev, best);
            }
            first = false;
            alpha *= 2.0;
            prev = pt;
        }
        best
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point, mut best: Option<Point>) -> Option<Point> {
        while self.evals < MAX_LINE_EVALS {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= f64::EPSILON * b.max(1e-300) {
                break;
            }
            let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (lo.alpha + hi.alpha));
            let margin = 0.1 * width;
            if !(alpha > a + margin && alpha < b - margin) {
                alpha = 0.5 * (lo.alpha + hi.alpha);
            }
            let pt = self.eval(alpha);
            if self.acceptable(&pt) {
                return Some(pt);
            }
            if !pt.f.is_finite() || !self.sufficient_decrease(&pt) || pt.f >= lo.f {
                hi = pt;
            } else {
                track_best(&mut best, &pt, self.f0);
                if pt.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = pt;
            }
        }
        best
    }
}

fn track_best(best: &mut Option<Point>, pt: &Point, f0: f64) {
    if pt.f < f0 && best.as_ref().is_none_or(|b| pt.f < b.f) {
        *best = Some(Point {
            alpha: pt.alpha,
            f: pt.f,
            slope: pt.slope,
            x: pt.x.clone(),
            g: pt.g.clone(),
        });
    }
}

/// Minimizer of the cubic matching value and slope at both ends.
fn cubic_min(a: &Point, b: &Point) -> Option<f64> {
    if !(a.f.is_finite() && b.f.is_finite()) || b.g.is_empty() && a.g.is_empty() {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = sqrt(disc) * if b.alpha > a.alpha { 1.0 } else { -1.0 };
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Minimizes `func`, which returns the objective and writes its gradient.
pub fn minimize<F>(mut func: F, x0: &[f64], config: &BfgsConfig) -> BfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = func(&x, &mut g);
    let mut trace = vec![f];

    let finish = |x: Vec<f64>, f: f64, g: Vec<f64>, iterations: usize, termination: Termination, trace: Vec<f64>| {
        let grad_inf = inf_norm(&g);
        BfgsOutcome {
            x,
            f,
            grad: g,
            grad_inf,
            iterations,
            termination,
            trace,
        }
    };

    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, f, g, 0, Termination::NonFinite, trace);
    }

    let mut h = identity(n);
    let mut h_is_identity = true;
    let mut scaled = false;
    let mut hy = vec![0.0; n];
    let mut d = vec![0.0; n];

    for iter in 0..config.max_iters {
        if inf_norm(&g) <= config.grad_tol {
            return finish(x, f, g, iter, Termination::Converged, trace);
        }

        mat_vec(&h, &g, &mut d);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            reset(&mut h, &mut h_is_identity);
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&d, &g);
        }

        let alpha0 = if h_is_identity { (1.0 / sqrt(dot(&g, &g))).min(1.0) } else { 1.0 };
        let f_tol = 16.0 * f64::EPSILON * fabs(f);
        let found = LineSearch {
            func: &mut func,
            x: &x,
            d: &d,
            f0: f,
            slope0: slope,
            f_tol,
            evals: 0,
        }
        .run(alpha0);

        let pt = match found {
            Some(pt) => pt,
            None if !h_is_identity => {
                reset(&mut h, &mut h_is_identity);
                continue;
            }
            None => return finish(x, f, g, iter, Termination::LineSearchFailed, trace),
        };

        let s: Vec<f64> = pt.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = pt.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * sqrt(dot(&s, &s) * yy) && sy > 0.0 {
            if !scaled {
                let gamma = sy / yy;
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] = if i == j { gamma } else { 0.0 };
                    }
                }
                scaled = true;
            }
            let rho = 1.0 / sy;
            mat_vec(&h, &y, &mut hy);
            let yhy = dot(&y, &hy);
            let coef = rho * rho * yhy + rho;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
            h_is_identity = false;
        }

        x = pt.x;
        g = pt.g;
        f = pt.f;
        trace.push(f);
    }

    let termination = if inf_norm(&g) <= config.grad_tol {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    finish(x, f, g, config.max_iters, termination, trace)
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn reset(h: &mut [f64], flag: &mut bool) {
    let n = libm::sqrt(h.len() as f64) as usize;
    h.fill(0.0);
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    *flag = true;
}

fn mat_vec(h: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&h[i * n..(i + 1) * n], v);
    }
}
