//! Derivative-free optimizers and a bracketing root finder.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the simplex spread in objective value falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Initial simplex edge length per coordinate.
    pub step: Vec<f64>,
}

impl NelderMeadOptions {
    pub fn new(dim: usize) -> Self {
        Self {
            max_iter: 2000,
            f_tol: 1e-10,
            x_tol: 1e-8,
            step: vec![0.1; dim],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization. Non-finite objective values are treated
/// as `+inf`, so constraints can be imposed by returning `f64::INFINITY`.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.step.get(i).copied().unwrap_or(0.1);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && spread <= opts.f_tol * (1.0 + vals[0].abs()) && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect()
        };

        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-gamma);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        let best = pts[0].clone();
        for i in 1..=n {
            pts[i] = best.iter().zip(&pts[i]).map(|(b, p)| b + sigma * (p - b)).collect();
            vals[i] = eval(&pts[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Minimum {
        x: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

/// Nelder–Mead from several starting points, restarting once from the best
/// result to shake off premature simplex collapse.
pub fn multistart(
    f: impl Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    opts: &NelderMeadOptions,
) -> Result<Minimum> {
    let mut best: Option<Minimum> = None;
    for s in starts {
        let m = nelder_mead(&f, s, opts);
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
    }
    let first = best.ok_or_else(|| Error::InvalidInput("no starting points".into()))?;
    let polished = nelder_mead(&f, &first.x, opts);
    let best = if polished.value <= first.value { polished } else { first };
    if !best.value.is_finite() {
        return Err(Error::NonConvergence {
            iterations: best.iterations,
            best_value: best.value,
            best_point: best.x,
        });
    }
    Ok(best)
}

/// Golden-section search for a minimum of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > tol * (1.0 + c.abs()) {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`; returns the point where
/// `f >= 0` first holds, to within `tol`.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo >= 0.0 {
        return Ok(lo);
    }
    if !(fhi >= 0.0) {
        return Err(Error::Numerical(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= tol * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(hi)
}

/// Central-difference Hessian of `f` at `x`.
pub fn numerical_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
    let mut hess = vec![vec![0.0; n]; n];
    let f0 = f(x);
    for i in 0..n {
        for j in i..n {
            let value = if i == j {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h[i];
                xm[i] -= h[i];
                (f(&xp) - 2.0 * f0 + f(&xm)) / (h[i] * h[i])
            } else {
                let mut pp = x.to_vec();
                let mut pm = x.to_vec();
                let mut mp = x.to_vec();
                let mut mm = x.to_vec();
                pp[i] += h[i];
                pp[j] += h[j];
                pm[i] += h[i];
                pm[j] -= h[j];
                mp[i] -= h[i];
                mp[j] += h[j];
                mm[i] -= h[i];
                mm[j] -= h[j];
                (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h[i] * h[j])
            };
            hess[i][j] = value;
            hess[j][i] = value;
        }
    }
    hess
}
