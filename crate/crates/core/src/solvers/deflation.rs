//! Deflated Newton: the residual is multiplied by
//! `M(u) = Π_k (1/‖u − u_k‖²_μ + 1)` so iterations are repelled from known
//! solutions.

use rayon::prelude::*;

use super::{a_mu, distance_mu, finish, hessian_solve, newton, Classification, NewtonOptions, SolveResult};
use crate::error::{Error, Result};
use crate::functional::{dual_norm_weighted, weighted_gradient};
use crate::linalg::dot;
use crate::optim::a_norm;
use crate::problem::Model;
use crate::rng;

#[derive(Clone, Debug)]
pub struct DeflationOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Start amplitudes in `‖·‖_μ`, cycled over the starts.
    pub scales: Vec<f64>,
}

impl Default for DeflationOptions {
    fn default() -> Self {
        DeflationOptions {
            starts: 16,
            seed: 0,
            max_iter: 60,
            scales: vec![0.05, 0.3, 1.0, 3.0],
        }
    }
}

struct Deflator<'a> {
    model: &'a Model,
    known: Vec<Vec<f64>>,
    a_known: Vec<Vec<f64>>,
}

impl<'a> Deflator<'a> {
    fn new(model: &'a Model, known: &[SolveResult]) -> Self {
        let op = a_mu(model);
        let known: Vec<Vec<f64>> = known.iter().map(|k| k.field.values().to_vec()).collect();
        let a_known = known.iter().map(|k| op.apply(k)).collect();
        Deflator { model, known, a_known }
    }

    /// `(M(u), ∇ ln M(u))`.
    fn factor(&self, u: &[f64], au: &[f64]) -> (f64, Vec<f64>) {
        let mut m = 1.0;
        let mut grad = vec![0.0; u.len()];
        for (k, ak) in self.known.iter().zip(&self.a_known) {
            let ad: Vec<f64> = au.iter().zip(ak).map(|(a, b)| a - b).collect();
            let d: Vec<f64> = u.iter().zip(k).map(|(a, b)| a - b).collect();
            let r2 = dot(&d, &ad).max(f64::MIN_POSITIVE);
            let term = 1.0 / r2 + 1.0;
            m *= term;
            let c = -2.0 / (r2 * r2 * term);
            grad.iter_mut().zip(&ad).for_each(|(g, a)| *g += c * a);
        }
        (m, grad)
    }

    fn deflated_residual(&self, u: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        let op = a_mu(self.model);
        let wr = weighted_gradient(self.model, u);
        let res = dual_norm_weighted(self.model, &wr)?;
        let (m, _) = self.factor(u, &op.apply(u));
        Ok((m * res, wr, res))
    }

    fn run(&self, x0: Vec<f64>, max_iter: usize) -> Result<Option<Vec<f64>>> {
        let op = a_mu(self.model);
        let mut x = x0;
        let (mut merit, mut wr, mut res) = self.deflated_residual(&x)?;
        for _ in 0..max_iter {
            if res <= 1e-6 {
                return Ok(Some(x));
            }
            let delta: Vec<f64> = hessian_solve(self.model, &x, &wr)?.into_iter().map(|v| -v).collect();
            let (_, gl) = self.factor(&x, &op.apply(&x));
            let denom = 1.0 - dot(&gl, &delta);
            let tau = if denom.abs() > 1e-12 { 1.0 / denom } else { 1.0 };
            let mut t = tau;
            let mut moved = false;
            for _ in 0..12 {
                let trial: Vec<f64> = x.iter().zip(&delta).map(|(x, d)| x + t * d).collect();
                let (tm, twr, tres) = self.deflated_residual(&trial)?;
                if tm.is_finite() && tm < merit {
                    x = trial;
                    merit = tm;
                    wr = twr;
                    res = tres;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                return Ok(None);
            }
        }
        Ok((res <= 1e-6).then_some(x))
    }
}

/// A solution not in `known`, or `None` when the start budget is spent.
pub fn deflated_search(model: &Model, known: &[SolveResult]) -> Result<Option<SolveResult>> {
    deflated_search_with(model, known, &DeflationOptions::default())
}

pub fn deflated_search_with(
    model: &Model,
    known: &[SolveResult],
    opts: &DeflationOptions,
) -> Result<Option<SolveResult>> {
    if known.is_empty() {
        return Err(Error::param("deflated_search needs at least one known solution"));
    }
    for k in known {
        model.grid().check(&k.field)?;
    }
    let defl = Deflator::new(model, known);
    let op = a_mu(model);
    let grid = model.grid();
    let reach = match model.spec.omega {
        crate::problem::Shape::Ball { radius } => radius,
        crate::problem::Shape::Cube { half_side } => half_side,
    };
    let starts: Vec<Vec<f64>> = (0..opts.starts)
        .map(|s| {
            let mut r = rng::stream(opts.seed, "deflated_search", s as u64);
            let x = rng::smooth_field(grid, &mut r, reach, true);
            let scale = opts.scales[s % opts.scales.len().max(1)];
            let n = a_norm(&op, &x);
            x.into_iter().map(|v| v * scale / n).collect()
        })
        .collect();
    // Starts run in parallel; the first success in start order wins.
    let found: Vec<Result<Option<Vec<f64>>>> = starts.into_par_iter().map(|x0| defl.run(x0, opts.max_iter)).collect();
    for f in found {
        let Some(x) = f? else { continue };
        let run = match newton(model, x, &NewtonOptions::default()) {
            Ok(r) => r,
            Err(Error::NoConvergence { .. }) | Err(Error::Degenerate { .. }) => continue,
            Err(e) => return Err(e),
        };
        let r = finish(
            model,
            run.x,
            Classification::Refined,
            run.iterations,
            run.history,
            run.max_norm,
        )?;
        if is_new(model, &r, known) {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

/// Separation rule: `‖u − u_k‖_μ ≥ 10⁻³·max(1, ‖u_k‖_μ)` for every known `u_k`.
pub(crate) fn is_new(model: &Model, r: &SolveResult, known: &[SolveResult]) -> bool {
    known
        .iter()
        .all(|k| distance_mu(model, r.field.values(), k.field.values()) >= 1e-3 * k.norm_mu.max(1.0))
}
