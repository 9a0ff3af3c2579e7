//! Preconditioned gradient descent in the metric of an SPD operator `A`,
//! optionally constrained to a sphere, ball or ball complement of `A`.

use crate::error::Result;
use crate::linalg::{dot, Operator};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Constraint {
    Free,
    Sphere(f64),
    Ball(f64),
    Exterior(f64),
}

#[derive(Clone, Debug)]
pub(crate) struct DescentOptions {
    pub max_iter: usize,
    /// Stop when the `A`-norm of the (projected) gradient falls below this.
    pub grad_tol: f64,
    /// Replace the iterate by its absolute value every this many steps.
    pub abs_every: Option<usize>,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iter: 2000,
            grad_tol: 1e-9,
            abs_every: None,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Descent {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Largest `A`-norm of any accepted iterate.
    pub max_norm: f64,
}

pub(crate) fn a_norm(op: &Operator, x: &[f64]) -> f64 {
    dot(x, &op.apply(x)).max(0.0).sqrt()
}

fn project(op: &Operator, c: Constraint, x: &mut [f64]) {
    let target = match c {
        Constraint::Free => return,
        Constraint::Sphere(r) => Some(r),
        Constraint::Ball(r) => (a_norm(op, x) > r).then_some(r),
        Constraint::Exterior(r) => (a_norm(op, x) < r).then_some(r),
    };
    if let Some(r) = target {
        let n = a_norm(op, x);
        if n > 0.0 {
            x.iter_mut().for_each(|v| *v *= r / n);
        }
    }
}

/// Minimizes `objective` (returning value and Euclidean gradient) with
/// Barzilai–Borwein steps and Armijo backtracking.
pub(crate) fn descend(
    op: &Operator,
    constraint: Constraint,
    x0: Vec<f64>,
    objective: impl Fn(&[f64]) -> (f64, Vec<f64>),
    opts: &DescentOptions,
) -> Result<Descent> {
    let mut x = x0;
    project(op, constraint, &mut x);
    let (mut f, mut g) = objective(&x);
    let mut max_norm = a_norm(op, &x);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut tau = f64::NAN;
    let mut it = 0;
    while it < opts.max_iter {
        let xi = direction(op, constraint, &x, &g)?;
        let a_xi = op.apply(&xi);
        let grad_norm = dot(&xi, &a_xi).max(0.0).sqrt();
        if grad_norm <= opts.grad_tol {
            break;
        }
        if let Some((px, pxi)) = &prev {
            let dx: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = xi.iter().zip(pxi).map(|(a, b)| a - b).collect();
            let adx = op.apply(&dx);
            let num = dot(&dx, &adx);
            let den = dot(&dg, &adx);
            if den > 0.0 && num > 0.0 {
                tau = num / den;
            }
        }
        if !tau.is_finite() || tau <= 0.0 {
            let scale = a_norm(op, &x).max(1e-3);
            tau = 0.1 * scale / grad_norm;
        }
        let mut accepted = false;
        for _ in 0..50 {
            let mut trial: Vec<f64> = x.iter().zip(&xi).map(|(x, d)| x - tau * d).collect();
            project(op, constraint, &mut trial);
            let (ft, gt) = objective(&trial);
            // Armijo on the actual displacement so projections are accounted for.
            let disp: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &disp);
            if ft.is_finite() && ft < f && ft <= f + 1e-4 * decrease.min(0.0) {
                prev = Some((std::mem::replace(&mut x, trial), xi));
                f = ft;
                g = gt;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        it += 1;
        if !accepted {
            break;
        }
        if let Some(k) = opts.abs_every {
            if it % k == 0 && x.iter().any(|v| *v < 0.0) {
                x.iter_mut().for_each(|v| *v = v.abs());
                project(op, constraint, &mut x);
                let (fa, ga) = objective(&x);
                f = fa;
                g = ga;
                prev = None;
            }
        }
        max_norm = max_norm.max(a_norm(op, &x));
    }
    Ok(Descent {
        x,
        value: f,
        iterations: it,
        max_norm,
    })
}

/// `A⁻¹g`, projected onto the sphere's tangent space when the iterate sits
/// on an active boundary.
fn direction(op: &Operator, c: Constraint, x: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let mut s = op.solve(g)?;
    let radius = match c {
        Constraint::Free => None,
        Constraint::Sphere(r) => Some(r),
        Constraint::Ball(r) | Constraint::Exterior(r) => {
            let n = a_norm(op, x);
            let on_boundary = (n - r).abs() <= 1e-10 * r;
            // Only project when the step would leave the feasible set.
            let outward = dot(x, g) * if matches!(c, Constraint::Ball(_)) { -1.0 } else { 1.0 };
            (on_boundary && outward > 0.0).then_some(r)
        }
    };
    if let Some(r) = radius {
        let c = dot(x, g) / (r * r);
        s.iter_mut().zip(x).for_each(|(s, x)| *s -= c * x);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridSpec};

    #[test]
    fn sphere_minimum_of_rayleigh_quotient() {
        // min of -½xᵀWx on {xᵀKx = 1} is -1/(2λ_min) for the pencil (K, W).
        let g = Grid::new(GridSpec::tensor(1, 0.5, 51)).unwrap();
        let op = Operator::new(&g, 1.0, vec![0.0; g.len()], true);
        let w = g.weights().to_vec();
        let obj = |x: &[f64]| {
            let wx: Vec<f64> = x.iter().zip(&w).map(|(x, w)| -x * w).collect();
            (0.5 * dot(x, &wx), wx)
        };
        let x0: Vec<f64> = (0..g.len()).map(|i| 1.0 + 0.3 * (i as f64).sin()).collect();
        let res = descend(&op, Constraint::Sphere(1.0), x0, obj, &DescentOptions::default()).unwrap();
        let h = g.spacing();
        let lmin = 4.0 * (std::f64::consts::PI * h / 2.0).sin().powi(2) / (h * h);
        assert!(
            (res.value + 0.5 / lmin).abs() < 1e-9,
            "{} vs {}",
            res.value,
            -0.5 / lmin
        );
    }
}
