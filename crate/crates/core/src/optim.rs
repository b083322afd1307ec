//! Unconstrained minimizers used by the likelihood fits.
//!
//! Objectives may return non-finite values for infeasible points; those are
//! treated as `+inf` so the search backs away from them.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Relative tolerance on objective changes.
    pub tol: f64,
    /// Initial simplex edge length (Nelder-Mead only).
    pub step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-9,
            step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn spread_small(fx: &[f64], tol: f64) -> bool {
    let best = fx[0];
    let worst = fx[fx.len() - 1];
    best.is_finite() && worst - best <= tol * (1.0 + best.abs())
}

/// Nelder-Mead simplex search with automatic restarts from the incumbent.
///
/// A fresh axis-aligned simplex is rebuilt around the best point after each
/// contraction to convergence; the search ends once a restart no longer
/// improves the objective by more than `tol`.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let mut obj = Counted { f, evals: 0 };
    let mut history = Vec::new();
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    let mut iters = 0;
    let mut converged = false;
    let mut step = opts.step;
    while iters < opts.max_iters {
        let (xb, fb, it, ok) = nm_pass(&mut obj, &x, fx, step, opts, opts.max_iters - iters, &mut history);
        iters += it;
        let improvement = fx - fb;
        x = xb;
        fx = fb;
        if ok && improvement <= opts.tol * (1.0 + fx.abs()) && step <= opts.step * 0.1 + f64::EPSILON {
            converged = true;
            break;
        }
        if !ok {
            break;
        }
        step = (step * 0.1).max(opts.step * 0.1);
    }
    OptimResult {
        x,
        fx,
        iters,
        evals: obj.evals,
        converged,
        history,
    }
}

#[allow(clippy::too_many_arguments)]
fn nm_pass<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    f0: f64,
    step: f64,
    opts: &OptimOptions,
    budget: usize,
    history: &mut Vec<f64>,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut fx: Vec<f64> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    fx.push(f0);
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        fx.push(obj.eval(&p));
        pts.push(p);
    }
    let mut iters = 0;
    loop {
        // sort ascending by objective
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        fx = order.iter().map(|&i| fx[i]).collect();
        if iters > 0 {
            let best = history.last().copied().unwrap_or(f64::INFINITY).min(fx[0]);
            history.push(best);
        }

        let xspread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread_small(&fx, opts.tol) && xspread <= 1e-7 + opts.tol.sqrt() * 1e-2 {
            return (pts[0].clone(), fx[0], iters, true);
        }
        if iters >= budget {
            return (pts[0].clone(), fx[0], iters, false);
        }
        iters += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = obj.eval(&xr);
        if fr < fx[0] {
            let xe = along(2.0);
            let fe = obj.eval(&xe);
            if fe < fr {
                pts[n] = xe;
                fx[n] = fe;
            } else {
                pts[n] = xr;
                fx[n] = fr;
            }
            continue;
        }
        if fr < fx[n - 1] {
            pts[n] = xr;
            fx[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fx[n] {
            let xc = along(0.5);
            let fc = obj.eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = obj.eval(&xc);
            (xc, fc)
        };
        if fc < fx[n].min(fr) {
            pts[n] = xc;
            fx[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = pts[0].clone();
        for i in 1..=n {
            for (v, b) in pts[i].iter_mut().zip(&best) {
                *v = b + 0.5 * (*v - b);
            }
            fx[i] = obj.eval(&pts[i]);
        }
    }
}

/// Central-difference gradient with relative step `1e-5`.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let dn = f(&xp);
            xp[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian; `steps[i]` is the step for coordinate `i`.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let f0 = f(x);
    let mut h = vec![vec![0.0; n]; n];
    let mut p = x.to_vec();
    for i in 0..n {
        let hi = steps[i];
        p[i] = x[i] + hi;
        let up = f(&p);
        p[i] = x[i] - hi;
        let dn = f(&p);
        p[i] = x[i];
        h[i][i] = (up - 2.0 * f0 + dn) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * hi * hj);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

/// BFGS with central-difference gradients and Armijo backtracking.
pub fn bfgs_fd<F>(f: F, x0: &[f64], opts: &OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut obj = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    let grad = |obj: &mut Counted<F>, x: &[f64]| {
        obj.evals += 2 * x.len();
        let g = fd_gradient(&|p: &[f64]| {
            let v = (obj.f)(p);
            if v.is_nan() { f64::INFINITY } else { v }
        }, x);
        g
    };
    let mut g = grad(&mut obj, &x);
    let mut hinv = identity(n);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        if !fx.is_finite() {
            break;
        }
        let gnorm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gnorm <= 1e-6 * (1.0 + fx.abs()) || g.iter().any(|v| !v.is_finite()) {
            converged = g.iter().all(|v| v.is_finite());
            history.push(fx);
            break;
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| hinv[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            hinv = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let fnew = obj.eval(&xn);
            if fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            converged = gnorm <= 1e-3 * (1.0 + fx.abs());
            history.push(fx);
            break;
        };
        let gn = grad(&mut obj, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i][j] * yv[j]).sum()).collect();
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let decrease = fx - fnew;
        x = xn;
        g = gn;
        fx = fnew;
        history.push(fx);
        if decrease <= opts.tol * (1.0 + fx.abs()) * 1e-3 {
            converged = true;
            break;
        }
    }
    OptimResult {
        x,
        fx,
        iters,
        evals: obj.evals,
        converged,
        history,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}
