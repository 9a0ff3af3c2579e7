//! Discrete mountain pass: a climbing string between two endpoints, then
//! Newton on the path maximizer.

use rayon::prelude::*;

use super::{finish, newton, Classification, NewtonOptions, SolveResult};
use crate::error::{Error, Result};
use crate::functional::{dual_operator, energy_parts, norm_mu_sq, weighted_gradient};
use crate::grid::Field;
use crate::linalg::{dot, Operator};
use crate::problem::Model;

#[derive(Clone, Debug)]
pub struct MountainPassOptions {
    /// Path points including both endpoints.
    pub points: usize,
    pub max_iter: usize,
    /// Path-maximizer residual, relative to its initial value, at which
    /// the string stops.
    pub string_tol: f64,
    /// Relative path-maximizer residual at which Newton is attempted.
    pub newton_switch: f64,
    /// Newton is also attempted from the climber every this many steps.
    pub newton_every: usize,
    /// Replace path points by their absolute values every this many steps.
    pub abs_every: Option<usize>,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        MountainPassOptions {
            points: 41,
            max_iter: 20000,
            string_tol: 1e-8,
            newton_switch: 1e-2,
            newton_every: 50,
            abs_every: Some(10),
        }
    }
}

/// Mountain-pass critical point between 0 and `e0`.
pub fn mountain_pass(model: &Model, e0: &Field) -> Result<SolveResult> {
    mountain_pass_with(model, None, e0, &MountainPassOptions::default())
}

/// As [`mountain_pass`] with an optional start point other than 0.
pub fn mountain_pass_with(
    model: &Model,
    start: Option<&Field>,
    e0: &Field,
    opts: &MountainPassOptions,
) -> Result<SolveResult> {
    let grid = model.grid();
    grid.check(e0)?;
    let n = grid.len();
    let x0 = match start {
        Some(s) => {
            grid.check(s)?;
            s.values().to_vec()
        }
        None => vec![0.0; n],
    };
    let x1 = e0.values().to_vec();
    let j0 = energy_parts(model, &x0).total;
    let j1 = energy_parts(model, &x1).total;
    let m = opts.points.max(5);
    let mut path: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let t = k as f64 / (m - 1) as f64;
            x0.iter().zip(&x1).map(|(a, b)| (1.0 - t) * a + t * b).collect()
        })
        .collect();
    let d0 = (0..=1000)
        .map(|k| {
            let t = k as f64 / 1000.0;
            let x: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            energy_parts(model, &x).total
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = j0.max(j1);
    let collapse_tol = 1e-12 * (1.0 + d0.abs());
    let p_op = dual_operator(model);
    let mut h: f64 = 0.1;
    let mut switch = opts.newton_switch;
    let mut max_norm = 0.0f64;
    let mut prev_res = f64::INFINITY;
    let mut res0 = 1.0;
    let mut it = 0;
    while it < opts.max_iter {
        let energies: Vec<f64> = path.par_iter().map(|x| energy_parts(model, x).total).collect();
        let (k, emax) = (1..m - 1)
            .map(|i| (i, energies[i]))
            .fold((1, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if !(emax > floor + collapse_tol) {
            return Err(Error::degenerate(
                "mountain_pass",
                format!("path collapse: maximum {emax:.4e} at the endpoint level {floor:.4e}"),
            ));
        }
        let grads: Vec<Vec<f64>> = path[1..m - 1].par_iter().map(|x| weighted_gradient(model, x)).collect();
        let dirs: Vec<Vec<f64>> = grads.par_iter().map(|g| p_op.solve(g)).collect::<Result<Vec<_>>>()?;
        let res = dot(&grads[k - 1], &dirs[k - 1]).max(0.0).sqrt();
        if it == 0 {
            res0 = res.max(f64::MIN_POSITIVE);
        }
        let rel = res / res0;
        let periodic = it > 0 && opts.newton_every > 0 && it % opts.newton_every == 0;
        if rel <= switch || rel <= opts.string_tol || periodic {
            if let Some(r) = try_newton(model, &path[k], d0, it, max_norm)? {
                return Ok(r);
            }
            if rel <= switch {
                switch *= 0.1;
            }
            if rel <= opts.string_tol {
                return Err(Error::no_convergence(
                    "mountain_pass",
                    "path maximizer converged but Newton found no positive level below D0",
                ));
            }
        }
        if res > 2.0 * prev_res && h > 1e-6 {
            h *= 0.5;
        } else {
            h = (h * 1.05).min(1.0);
        }
        prev_res = res;
        let tangents: Vec<Vec<f64>> = (1..m - 1)
            .map(|i| {
                let t: Vec<f64> = path[i + 1].iter().zip(&path[i - 1]).map(|(a, b)| a - b).collect();
                let nt = dot(&t, &p_op.apply(&t)).max(0.0).sqrt();
                t.into_iter().map(|v| v / nt.max(f64::MIN_POSITIVE)).collect()
            })
            .collect();
        let spacing = path_length(&path, &p_op) / (m - 1) as f64;
        for i in 1..m - 1 {
            // J is unbounded below, so points already under the endpoint level stay put.
            if i != k && energies[i] < floor {
                continue;
            }
            let d = &dirs[i - 1];
            let tau = &tangents[i - 1];
            let c = dot(d, &p_op.apply(tau));
            let along = if i == k { 2.0 * c } else { c };
            let mut delta: Vec<f64> = d.iter().zip(tau).map(|(d, t)| h * (d - along * t)).collect();
            // No point moves more than a quarter of the mean spacing per step.
            let len = dot(&delta, &p_op.apply(&delta)).max(0.0).sqrt();
            if len > 0.25 * spacing {
                let s = 0.25 * spacing / len;
                delta.iter_mut().for_each(|v| *v *= s);
            }
            path[i].iter_mut().zip(&delta).for_each(|(x, d)| *x -= d);
        }
        reparametrize(&mut path, k, &p_op);
        it += 1;
        if let Some(e) = opts.abs_every {
            if it % e == 0 {
                for x in path[1..m - 1].iter_mut() {
                    x.iter_mut().for_each(|v| *v = v.abs());
                }
            }
        }
        max_norm = max_norm.max(norm_mu_sq(model, &path[k]).max(0.0).sqrt());
    }
    Err(Error::no_convergence(
        "mountain_pass",
        format!(
            "iteration cap {} reached (last maximizer residual {prev_res:.3e})",
            opts.max_iter
        ),
    ))
}

fn try_newton(model: &Model, x: &[f64], d0: f64, iters: usize, max_norm: f64) -> Result<Option<SolveResult>> {
    let run = match newton(model, x.to_vec(), &NewtonOptions::default()) {
        Ok(r) => r,
        Err(Error::NoConvergence { .. }) | Err(Error::Degenerate { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let res = finish(
        model,
        run.x,
        Classification::MountainPass,
        iters + run.iterations,
        run.history,
        max_norm.max(run.max_norm),
    )?;
    if res.energy > 0.0 && res.energy <= d0 + 1e-6 {
        Ok(Some(res))
    } else {
        Ok(None)
    }
}

fn path_length(path: &[Vec<f64>], p: &Operator) -> f64 {
    path.windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            dot(&d, &p.apply(&d)).max(0.0).sqrt()
        })
        .sum()
}

/// Equal `P`-arclength redistribution on each side of the climbing point,
/// which stays fixed.
fn reparametrize(path: &mut [Vec<f64>], k: usize, p: &Operator) {
    let m = path.len();
    redistribute(&mut path[..=k], p);
    redistribute(&mut path[k..m], p);
}

fn redistribute(seg: &mut [Vec<f64>], p: &Operator) {
    let m = seg.len();
    if m < 3 {
        return;
    }
    let mut s = vec![0.0; m];
    for i in 1..m {
        let d: Vec<f64> = seg[i].iter().zip(&seg[i - 1]).map(|(a, b)| a - b).collect();
        s[i] = s[i - 1] + dot(&d, &p.apply(&d)).max(0.0).sqrt();
    }
    let total = s[m - 1];
    if !(total > 0.0) {
        return;
    }
    let old: Vec<Vec<f64>> = seg.to_vec();
    let mut j = 0;
    for (i, target) in (1..m - 1).map(|i| (i, total * i as f64 / (m - 1) as f64)) {
        while j + 1 < m - 1 && s[j + 1] < target {
            j += 1;
        }
        let span = s[j + 1] - s[j];
        let t = if span > 0.0 { (target - s[j]) / span } else { 0.0 };
        seg[i] = old[j]
            .iter()
            .zip(&old[j + 1])
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};

    #[test]
    fn redistribution_equalizes_spacing() {
        let g = Grid::new(GridSpec::tensor(1, 1.0, 11)).unwrap();
        let p = Operator::new(&g, 0.0, vec![1.0; g.len()], true);
        let ts = [0.0, 0.05, 0.1, 0.7, 1.0];
        let mut path: Vec<Vec<f64>> = ts.iter().map(|t| vec![*t; g.len()]).collect();
        redistribute(&mut path, &p);
        for (i, x) in path.iter().enumerate() {
            assert!((x[0] - i as f64 / 4.0).abs() < 1e-12);
        }
    }
}
