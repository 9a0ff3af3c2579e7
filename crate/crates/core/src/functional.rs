//! The energy
//!
//! `J(u) = a/4‖u‖⁴_D + ½‖u‖²_μ − λ/2∫f u² − 1/p∫g|u|^p`,
//!
//! its first variation and the dual residual norm.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{dirichlet, Field};
use crate::linalg::Operator;
use crate::problem::Model;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet4: f64,
    pub mu_half: f64,
    pub f_term: f64,
    pub g_term: f64,
    pub total: f64,
}

/// `|t|^{q}`, zero at zero.
#[inline]
pub(crate) fn abs_pow(t: f64, q: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        (q * t.abs().ln()).exp()
    }
}

/// `|t|^{p-2} t`, zero at zero.
#[inline]
pub(crate) fn signed_pow(t: f64, p: f64) -> f64 {
    abs_pow(t, p - 1.0).copysign(t)
}

pub(crate) fn energy_parts(model: &Model, u: &[f64]) -> EnergyBreakdown {
    let grid = model.grid();
    let w = grid.weights();
    let (v, f, g) = (model.v(), model.f(), model.g());
    let (a, p, lambda, mu) = (model.a(), model.p(), model.lambda(), model.mu());
    let d = dirichlet(grid, u, u);
    let pot = grid.sum(|i| w[i] * v[i] * u[i] * u[i]);
    let fu = grid.sum(|i| w[i] * f[i] * u[i] * u[i]);
    let gu = grid.sum(|i| w[i] * g[i] * abs_pow(u[i], p));
    let dirichlet4 = 0.25 * a * d * d;
    let mu_half = 0.5 * (d + mu * pot);
    let f_term = 0.5 * lambda * fu;
    let g_term = gu / p;
    EnergyBreakdown {
        dirichlet4,
        mu_half,
        f_term,
        g_term,
        total: dirichlet4 + mu_half - f_term - g_term,
    }
}

pub fn energy(model: &Model, u: &Field) -> Result<EnergyBreakdown> {
    model.grid().check(u)?;
    Ok(energy_parts(model, u.values()))
}

/// `‖u‖²_μ`.
pub(crate) fn norm_mu_sq(model: &Model, u: &[f64]) -> f64 {
    let grid = model.grid();
    let w = grid.weights();
    let v = model.v();
    dirichlet(grid, u, u) + model.mu() * grid.sum(|i| w[i] * v[i] * u[i] * u[i])
}

pub fn norm_mu(model: &Model, u: &Field) -> Result<f64> {
    model.grid().check(u)?;
    Ok(norm_mu_sq(model, u.values()).sqrt())
}

/// Weighted gradient `W·r`: the vector with `(W r)·φ = J'(u)φ` for every φ.
pub(crate) fn weighted_gradient(model: &Model, u: &[f64]) -> Vec<f64> {
    let grid = model.grid();
    let w = grid.weights();
    let (v, f, g) = (model.v(), model.f(), model.g());
    let (a, p, lambda, mu) = (model.a(), model.p(), model.lambda(), model.mu());
    let ku = grid.stiffness(u);
    let d = crate::linalg::dot(u, &ku);
    let c = a * d + 1.0;
    (0..u.len())
        .map(|i| c * ku[i] + w[i] * ((mu * v[i] - lambda * f[i]) * u[i] - g[i] * signed_pow(u[i], p)))
        .collect()
}

pub fn directional_derivative(model: &Model, u: &Field, phi: &Field) -> Result<f64> {
    let grid = model.grid();
    grid.check(u)?;
    grid.check(phi)?;
    let wr = weighted_gradient(model, u.values());
    let ph = phi.values();
    Ok(grid.sum(|i| wr[i] * ph[i]))
}

/// Nodal residual of the strong form.
pub fn gradient_field(model: &Model, u: &Field) -> Result<Field> {
    let grid = model.grid();
    grid.check(u)?;
    let mut r = weighted_gradient(model, u.values());
    r.iter_mut().zip(grid.weights()).for_each(|(r, w)| *r /= w);
    Ok(grid.wrap(r))
}

/// Preconditioner `K + W(μV + 1)` used for all dual norms.
pub(crate) fn dual_operator(model: &Model) -> Operator<'_> {
    let grid = model.grid();
    let mu = model.mu();
    let diag = grid
        .weights()
        .iter()
        .zip(model.v())
        .map(|(w, v)| w * (mu * v + 1.0))
        .collect();
    Operator::new(grid, 1.0, diag, true)
}

/// `sqrt((W r)ᵀ P⁻¹ (W r))` for a weighted residual `W r`.
pub(crate) fn dual_norm_weighted(model: &Model, wr: &[f64]) -> Result<f64> {
    if wr.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let z = dual_operator(model).solve(wr)?;
    Ok(crate::linalg::dot(wr, &z).max(0.0).sqrt())
}

/// Dual norm of a nodal field `r`: `sqrt(∫ r z)` with `(−Δ + μV + 1) z = r`.
pub fn dual_norm(model: &Model, r: &Field) -> Result<f64> {
    let grid = model.grid();
    grid.check(r)?;
    let wr: Vec<f64> = r.values().iter().zip(grid.weights()).map(|(r, w)| r * w).collect();
    dual_norm_weighted(model, &wr)
}

pub fn residual_norm(model: &Model, u: &Field) -> Result<f64> {
    model.grid().check(u)?;
    dual_norm_weighted(model, &weighted_gradient(model, u.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Canonical, ProblemSpec};
    use rand::{Rng, SeedableRng};

    fn small(which: Canonical) -> Model {
        let mut spec = ProblemSpec::canonical(which);
        if which == Canonical::CubeP5 {
            spec.grid.nodes_per_axis = 17;
        } else {
            spec.grid.nodes_per_axis = 241;
        }
        spec.lambda = 3.0;
        Model::new(spec).unwrap()
    }

    fn random_field(model: &Model, rng: &mut impl Rng, scale: f64) -> Field {
        let grid = model.grid();
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        grid.sample(|x| {
            let r2: f64 = x.iter().map(|t| t * t).sum();
            scale * (c[0] + c[1] * x[0] + c[2] * r2 + c[3] * (3.0 * x[0]).sin()) * (-r2).exp()
        })
    }

    #[test]
    fn zero_field() {
        let m = small(Canonical::BallP5);
        let z = m.grid().zeros();
        let e = energy(&m, &z).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(e.g_term, 0.0);
        assert!(gradient_field(&m, &z).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(residual_norm(&m, &z).unwrap(), 0.0);
        let phi = m.grid().sample(|x| x[0].cos());
        assert_eq!(directional_derivative(&m, &z, &phi).unwrap(), 0.0);
    }

    #[test]
    fn derivative_along_u_recombines_parts() {
        let m = small(Canonical::BallP3Pos);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let u = random_field(&m, &mut rng, 2.0);
            let e = energy(&m, &u).unwrap();
            let expect = 4.0 * e.dirichlet4 + 2.0 * e.mu_half - 2.0 * e.f_term - m.p() * e.g_term;
            let got = directional_derivative(&m, &u, &u).unwrap();
            assert!((got - expect).abs() <= 1e-10 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn residual_norm_homogeneous_in_r() {
        let m = small(Canonical::BallP5);
        let r = m.grid().sample(|x| (-x[0] * x[0]).exp());
        let a = dual_norm(&m, &r).unwrap();
        let b = dual_norm(&m, &r.scaled(3.0)).unwrap();
        assert!((b - 3.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn fractional_powers_are_guarded() {
        assert_eq!(signed_pow(0.0, 2.5), 0.0);
        assert!((signed_pow(-4.0, 2.5) + 8.0).abs() < 1e-12);
        assert!((abs_pow(-2.0, 3.0) - 8.0).abs() < 1e-12);
    }
}
