//! Critical points of the energy: constrained minimization, the discrete
//! mountain pass, Newton refinement, deflation and the multiplicity census.

mod census;
mod deflation;
mod mountain;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{abs_pow, dual_norm_weighted, energy_parts, norm_mu_sq, weighted_gradient};
use crate::grid::Field;
use crate::linalg::{dot, Operator};
use crate::optim::{a_norm, descend, Constraint, DescentOptions};
use crate::problem::Model;
use crate::rng;

pub use census::{multiplicity_census, multiplicity_census_with, Census, CensusOptions, Regime};
pub use deflation::{deflated_search, deflated_search_with, DeflationOptions};
pub use mountain::{mountain_pass, mountain_pass_with, MountainPassOptions};

/// Solutions with `‖u‖_μ` at or below this count as the zero solution.
pub const TRIVIAL_NORM: f64 = 1e-8;

/// Accepted solutions have dual residual at most this.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    BallMin,
    ExteriorMin,
    MountainPass,
    Refined,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::BallMin => "ball-min",
            Classification::ExteriorMin => "exterior-min",
            Classification::MountainPass => "mountain-pass",
            Classification::Refined => "refined",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub field: Field,
    pub energy: f64,
    pub residual: f64,
    pub norm_mu: f64,
    pub classification: Classification,
    pub iterations: usize,
    pub positive: bool,
    /// Smallest nodal value.
    pub min_value: f64,
    /// Dual residuals of the Newton polish, first entry at the start point.
    pub residual_history: Vec<f64>,
    /// Largest `‖·‖_μ` over the iterates that produced this point.
    pub max_iterate_norm: f64,
}

/// The scalar part of a [`SolveResult`], for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub energy: f64,
    pub residual: f64,
    pub norm_mu: f64,
    pub classification: Classification,
    pub iterations: usize,
    pub positive: bool,
    pub min_value: f64,
    pub max_iterate_norm: f64,
}

impl SolveResult {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            energy: self.energy,
            residual: self.residual,
            norm_mu: self.norm_mu,
            classification: self.classification,
            iterations: self.iterations,
            positive: self.positive,
            min_value: self.min_value,
            max_iterate_norm: self.max_iterate_norm,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.norm_mu <= TRIVIAL_NORM
    }
}

/// `A_μ = K + μWV`, the Gram operator of `⟨·,·⟩_μ`.
pub(crate) fn a_mu(model: &Model) -> Operator<'_> {
    let grid = model.grid();
    let mu = model.mu();
    let diag = grid.weights().iter().zip(model.v()).map(|(w, v)| mu * w * v).collect();
    Operator::new(grid, 1.0, diag, true)
}

/// Second variation `s·K + diag(d) + 2a (Ku)(Ku)ᵀ` as `(operator, 2a, Ku)`.
pub(crate) fn hessian<'a>(model: &'a Model, u: &[f64]) -> (Operator<'a>, f64, Vec<f64>) {
    let grid = model.grid();
    let w = grid.weights();
    let (v, f, g) = (model.v(), model.f(), model.g());
    let (a, p, lambda, mu) = (model.a(), model.p(), model.lambda(), model.mu());
    let ku = grid.stiffness(u);
    let d = dot(u, &ku);
    let diag = (0..u.len())
        .map(|i| w[i] * (mu * v[i] - lambda * f[i] - (p - 1.0) * g[i] * abs_pow(u[i], p - 2.0)))
        .collect();
    (Operator::new(grid, a * d + 1.0, diag, false), 2.0 * a, ku)
}

pub(crate) fn hessian_solve(model: &Model, u: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let (op, beta, ku) = hessian(model, u);
    op.solve_rank_one(beta, &ku, b)
}

pub(crate) fn hessian_apply(model: &Model, u: &[f64], x: &[f64]) -> Vec<f64> {
    let (op, beta, ku) = hessian(model, u);
    let mut y = op.apply(x);
    let c = beta * dot(&ku, x);
    y.iter_mut().zip(&ku).for_each(|(y, k)| *y += c * k);
    y
}

pub(crate) fn residual_of(model: &Model, u: &[f64]) -> Result<f64> {
    dual_norm_weighted(model, &weighted_gradient(model, u))
}

/// A solution is positive when its values on `{V < c₀}` are strictly
/// positive and nowhere below `−10⁻¹⁰·max|u|` (the exponential tail under
/// the well underflows to round-off).
pub(crate) fn is_positive(model: &Model, u: &[f64]) -> bool {
    let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return false;
    }
    let c0 = model.spec.c0;
    let core = u.iter().zip(model.v()).filter(|(_, v)| **v < c0).all(|(u, _)| *u > 0.0);
    core && u.iter().all(|v| *v >= -1e-10 * peak)
}

pub(crate) fn finish(
    model: &Model,
    x: Vec<f64>,
    classification: Classification,
    iterations: usize,
    history: Vec<f64>,
    max_iterate_norm: f64,
) -> Result<SolveResult> {
    let residual = residual_of(model, &x)?;
    let norm_mu = norm_mu_sq(model, &x).max(0.0).sqrt();
    Ok(SolveResult {
        energy: energy_parts(model, &x).total,
        residual,
        norm_mu,
        classification,
        iterations,
        positive: is_positive(model, &x),
        min_value: x.iter().copied().fold(f64::INFINITY, f64::min),
        residual_history: history,
        max_iterate_norm: max_iterate_norm.max(norm_mu),
        field: model.grid().wrap(x),
    })
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 30,
        }
    }
}

pub(crate) struct NewtonRun {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub max_norm: f64,
}

/// Damped Newton on `J′(u) = 0`. Steps that increase the residual are
/// halved up to eight times; three consecutive increases abort.
pub(crate) fn newton(model: &Model, x0: Vec<f64>, opts: &NewtonOptions) -> Result<NewtonRun> {
    let mut x = x0;
    let mut wr = weighted_gradient(model, &x);
    let mut res = dual_norm_weighted(model, &wr)?;
    let mut history = vec![res];
    let mut increases = 0;
    let mut max_norm = norm_mu_sq(model, &x).max(0.0).sqrt();
    let mut it = 0;
    while res > opts.tol && it < opts.max_iter {
        let step = hessian_solve(model, &x, &wr)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::degenerate("newton_refine", "singular linearization"));
        }
        let mut t = 1.0;
        let mut accepted = None;
        let mut first = None;
        for _ in 0..9 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(x, s)| x - t * s).collect();
            let twr = weighted_gradient(model, &trial);
            let tres = dual_norm_weighted(model, &twr)?;
            if first.is_none() {
                first = Some((trial.clone(), twr.clone(), tres));
            }
            if tres < res {
                accepted = Some((trial, twr, tres));
                break;
            }
            t *= 0.5;
        }
        it += 1;
        let (nx, nwr, nres) = match accepted {
            Some(a) => {
                increases = 0;
                a
            }
            None => {
                increases += 1;
                first.expect("at least one trial")
            }
        };
        let stalled = nres > 0.5 * res && nres <= RESIDUAL_TOL;
        x = nx;
        wr = nwr;
        res = nres;
        history.push(res);
        max_norm = max_norm.max(norm_mu_sq(model, &x).max(0.0).sqrt());
        if increases >= 3 {
            return Err(Error::no_convergence(
                "newton_refine",
                format!("residual increased three consecutive steps (now {res:.3e})"),
            ));
        }
        if stalled {
            break;
        }
    }
    if res > RESIDUAL_TOL {
        return Err(Error::no_convergence(
            "newton_refine",
            format!("residual {res:.3e} after {it} iterations"),
        ));
    }
    Ok(NewtonRun {
        x,
        iterations: it,
        history,
        max_norm,
    })
}

/// Newton polish of `u0` to residual `10⁻¹⁰` (accepting `10⁻⁸` at
/// round-off stagnation). The zero field is returned unchanged with
/// `positive = false`.
pub fn newton_refine(model: &Model, u0: &Field) -> Result<SolveResult> {
    newton_refine_with(model, u0, &NewtonOptions::default())
}

pub fn newton_refine_with(model: &Model, u0: &Field, opts: &NewtonOptions) -> Result<SolveResult> {
    model.grid().check(u0)?;
    let run = newton(model, u0.values().to_vec(), opts)?;
    finish(
        model,
        run.x,
        Classification::Refined,
        run.iterations,
        run.history,
        run.max_norm,
    )
}

fn polish(model: &Model, x: Vec<f64>, class: Classification, iters: usize, max_norm: f64) -> Result<SolveResult> {
    let run = newton(model, x, &NewtonOptions::default())?;
    finish(
        model,
        run.x,
        class,
        iters + run.iterations,
        run.history,
        max_norm.max(run.max_norm),
    )
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::param(format!("rho = {rho} must be positive")));
    }
    Ok(())
}

fn energy_objective(model: &Model) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + '_ {
    move |u: &[f64]| (energy_parts(model, u).total, weighted_gradient(model, u))
}

/// Positive random start fields, `count` of them, unit `‖·‖_μ`.
fn random_starts(model: &Model, op: &Operator, seed: u64, tag: &str, count: usize) -> Vec<Vec<f64>> {
    let grid = model.grid();
    let reach = match model.spec.omega {
        crate::problem::Shape::Ball { radius } => radius,
        crate::problem::Shape::Cube { half_side } => half_side,
    };
    (0..count)
        .map(|s| {
            let mut r = rng::stream(seed, tag, s as u64);
            let mut x = rng::smooth_field(grid, &mut r, reach, true);
            let n = a_norm(op, &x);
            x.iter_mut().for_each(|v| *v /= n);
            x
        })
        .collect()
}

fn scaled_to(op: &Operator, x: &[f64], r: f64) -> Vec<f64> {
    let n = a_norm(op, x);
    x.iter().map(|v| v * r / n).collect()
}

/// Best point of a multistart descent with the starts' values.
#[derive(Clone, Debug)]
pub struct SphereMin {
    pub value: f64,
    pub argmin: Field,
    pub start_values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub starts: usize,
    pub seed: u64,
    pub descent: DescentSettings,
}

#[derive(Clone, Debug)]
pub struct DescentSettings {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            starts: 8,
            seed: 0,
            descent: DescentSettings {
                max_iter: 3000,
                grad_tol: 1e-10,
            },
        }
    }
}

impl SearchOptions {
    fn descent(&self) -> DescentOptions {
        DescentOptions {
            max_iter: self.descent.max_iter,
            grad_tol: self.descent.grad_tol,
            abs_every: Some(10),
        }
    }
}

/// `min J` on `{‖u‖_μ = ρ}` by Riemannian descent from φ_{1,μ} and random
/// positive fields. The value is an upper bound for the infimum.
pub fn sphere_min(model: &Model, rho: f64) -> Result<SphereMin> {
    sphere_min_with(model, rho, &SearchOptions::default())
}

pub fn sphere_min_with(model: &Model, rho: f64, opts: &SearchOptions) -> Result<SphereMin> {
    check_rho(rho)?;
    let op = a_mu(model);
    let mut starts = vec![crate::eigen::lambda1_mu(model, model.mu())?.field.into_values()];
    starts.extend(random_starts(
        model,
        &op,
        opts.seed,
        "sphere_min",
        opts.starts.max(1) - 1,
    ));
    let dopts = opts.descent();
    let runs: Vec<Result<(f64, Vec<f64>)>> = starts
        .into_par_iter()
        .map(|x0| {
            let d = descend(&op, Constraint::Sphere(rho), x0, energy_objective(model), &dopts)?;
            Ok((d.value, d.x))
        })
        .collect();
    let mut values = Vec::with_capacity(runs.len());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in runs {
        let (v, x) = r?;
        values.push(v);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    let (value, x) = best.expect("at least one start");
    Ok(SphereMin {
        value,
        argmin: model.grid().wrap(x),
        start_values: values,
    })
}

/// `t·φ` with `J(tφ) < 0` and `‖tφ‖_μ > ρ`.
///
/// For p > 4, φ is φ₁ (or φ₁ cut to `{g > 0}` when `∫gφ₁^p ≤ 0`) and t is
/// doubled until the energy is negative. For p < 4, φ₁ scaled by
/// `t_a = (2(p−2)∫gφ₁^p/(apλ₁²))^{1/(4−p)}` when `∫gφ₁^p > 0`, otherwise
/// the Γ_p maximizer scaled by `((2p−4)Γ_p/(ap))^{1/(4−p)}`.
pub fn find_e0(model: &Model, rho: f64) -> Result<Field> {
    check_rho(rho)?;
    let grid = model.grid();
    let p = model.p();
    let a = model.a();
    let g = model.g();
    if !model.omega().iter().zip(g).any(|(&m, &g)| m && g > 0.0) {
        return Err(Error::Condition {
            condition: "D2",
            detail: "g⁺ vanishes on Ω; no direction with negative energy".into(),
        });
    }
    let phi1 = crate::eigen::lambda1_omega(model)?;
    let gphi = crate::constants::g_phi_p(model, &phi1.field)?;
    let op = a_mu(model);
    let accept = |x: &[f64]| energy_parts(model, x).total < 0.0 && a_norm(&op, x) > rho;
    let candidate: Vec<f64> = if p > 4.0 {
        let mut phi = phi1.field.values().to_vec();
        if gphi <= 0.0 {
            phi.iter_mut().zip(g).for_each(|(u, g)| *u *= g.max(0.0));
        }
        let base = scaled_to(&op, &phi, 1.01 * rho);
        let at = |t: f64| -> Vec<f64> { base.iter().map(|v| v * t).collect() };
        let mut hi = 1.0;
        while !accept(&at(hi)) {
            hi *= 2.0;
            if hi > 1e60 {
                return Err(Error::regime("find_e0", "no negative energy along the scaled ray"));
            }
        }
        // Bisect to just past the first sign change so e₀ stays moderate.
        let mut lo = if hi > 1.0 { 0.5 * hi } else { hi };
        if lo < hi {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if accept(&at(mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let mut t = 1.1 * hi;
        while !accept(&at(t)) {
            t *= 1.1;
        }
        at(t)
    } else if gphi > 0.0 {
        let t = crate::constants::t_a(a, p, phi1.value, gphi);
        phi1.field.values().iter().map(|v| v * t).collect()
    } else {
        let gamma = crate::constants::gamma_p(model, Some(&phi1.field), &Default::default())?;
        let t = ((2.0 * p - 4.0) * gamma.value / (a * p)).powf(1.0 / (4.0 - p));
        gamma.maximizer.values().iter().map(|v| v * t).collect()
    };
    if !accept(&candidate) {
        let e = energy_parts(model, &candidate).total;
        return Err(Error::regime(
            "find_e0",
            format!(
                "J(e0) = {e:.4e}, ‖e0‖_μ = {:.4e} against ρ = {rho:.4e}",
                a_norm(&op, &candidate)
            ),
        ));
    }
    Ok(grid.wrap(candidate))
}

#[derive(Clone, Debug)]
pub struct GeometryReport {
    pub rho: f64,
    pub certified_min_on_sphere: f64,
    pub sphere_argmin: Field,
    pub e0: Option<Field>,
    pub j_e0: Option<f64>,
    pub e0_norm_mu: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub rho: f64,
    pub certified_min_on_sphere: f64,
    pub j_e0: Option<f64>,
    pub e0_norm_mu: Option<f64>,
    pub pass: bool,
}

impl GeometryReport {
    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            rho: self.rho,
            certified_min_on_sphere: self.certified_min_on_sphere,
            j_e0: self.j_e0,
            e0_norm_mu: self.e0_norm_mu,
            pass: self.pass,
        }
    }
}

/// Sphere minimum and e₀ for radius ρ.
pub fn geometry(model: &Model, rho: f64, opts: &SearchOptions) -> Result<GeometryReport> {
    let sphere = sphere_min_with(model, rho, opts)?;
    let e0 = match find_e0(model, rho) {
        Ok(e) => Some(e),
        Err(Error::Regime { .. }) => None,
        Err(e) => return Err(e),
    };
    let j_e0 = e0.as_ref().map(|e| energy_parts(model, e.values()).total);
    let e0_norm_mu = e0.as_ref().map(|e| norm_mu_sq(model, e.values()).max(0.0).sqrt());
    let pass = sphere.value > 0.0 && j_e0.is_some_and(|j| j < 0.0) && e0_norm_mu.is_some_and(|n| n > rho);
    Ok(GeometryReport {
        rho,
        certified_min_on_sphere: sphere.value,
        sphere_argmin: sphere.argmin,
        e0,
        j_e0,
        e0_norm_mu,
        pass,
    })
}

fn no_negative(op: &'static str) -> Error {
    Error::degenerate(op, "no negative-energy point found")
}

/// `min J` over `{‖u‖_μ ≤ ρ}` from small multiples of φ_{1,μ} and random
/// positive fields, Newton-polished. Errors when the minimizer is the zero
/// field or has nonnegative energy.
pub fn ball_min(model: &Model, rho: f64) -> Result<SolveResult> {
    ball_min_with(model, rho, &SearchOptions::default())
}

pub fn ball_min_with(model: &Model, rho: f64, opts: &SearchOptions) -> Result<SolveResult> {
    check_rho(rho)?;
    let op = a_mu(model);
    let phi = crate::eigen::lambda1_mu(model, model.mu())?.field.into_values();
    let mut starts: Vec<Vec<f64>> = [0.01, 0.1, 0.5].iter().map(|s| scaled_to(&op, &phi, s * rho)).collect();
    starts.extend(
        random_starts(model, &op, opts.seed, "ball_min", opts.starts.saturating_sub(3))
            .into_iter()
            .map(|x| scaled_to(&op, &x, 0.5 * rho)),
    );
    constrained_min(
        model,
        &op,
        Constraint::Ball(rho),
        starts,
        opts,
        Classification::BallMin,
        "ball_min",
    )
}

/// `min J` over `{‖u‖_μ ≥ ρ}` from e₀ (p < 4 only). The energy must land
/// in `(−1.05·C_{N,a,λ}, 0)` when the coercivity constant is available.
pub fn exterior_min(model: &Model, rho: f64) -> Result<SolveResult> {
    exterior_min_with(model, rho, &SearchOptions::default())
}

pub fn exterior_min_with(model: &Model, rho: f64, opts: &SearchOptions) -> Result<SolveResult> {
    check_rho(rho)?;
    if !(model.p() < 4.0) {
        return Err(Error::regime("exterior_min", "needs p < 4 for a coercive energy"));
    }
    let op = a_mu(model);
    let e0 = find_e0(model, rho).map_err(|e| match e {
        Error::Regime { detail, .. } | Error::Condition { detail, .. } => {
            Error::degenerate("exterior_min", format!("no negative exterior value: {detail}"))
        }
        e => e,
    })?;
    let mut starts = vec![e0.into_values()];
    starts.extend(
        random_starts(model, &op, opts.seed, "exterior_min", opts.starts.saturating_sub(1))
            .into_iter()
            .map(|x| scaled_to(&op, &x, 2.0 * rho)),
    );
    let res = constrained_min(
        model,
        &op,
        Constraint::Exterior(rho),
        starts,
        opts,
        Classification::ExteriorMin,
        "exterior_min",
    )?;
    if let Ok(c) = crate::constants::coercivity_constants(model) {
        if !(res.energy > -1.05 * c.c_n_a_lambda) {
            return Err(Error::degenerate(
                "exterior_min",
                format!("energy {:.4e} below the coercivity bound", res.energy),
            ));
        }
    }
    Ok(res)
}

fn constrained_min(
    model: &Model,
    op: &Operator,
    constraint: Constraint,
    starts: Vec<Vec<f64>>,
    opts: &SearchOptions,
    class: Classification,
    name: &'static str,
) -> Result<SolveResult> {
    let dopts = opts.descent();
    let runs: Vec<Result<crate::optim::Descent>> = starts
        .into_par_iter()
        .map(|x0| descend(op, constraint, x0, energy_objective(model), &dopts))
        .collect();
    let mut best: Option<crate::optim::Descent> = None;
    for r in runs {
        let d = r?;
        if best.as_ref().is_none_or(|b| d.value < b.value) {
            best = Some(d);
        }
    }
    let d = best.expect("at least one start");
    if !(d.value < 0.0) {
        return Err(no_negative(name));
    }
    let res = polish(model, d.x, class, d.iterations, d.max_norm)?;
    if !(res.energy < 0.0) || res.is_trivial() {
        return Err(no_negative(name));
    }
    Ok(res)
}

/// Free descent (coercive regimes only) followed by a Newton polish.
pub(crate) fn local_min(model: &Model, x0: Vec<f64>, opts: &SearchOptions) -> Result<SolveResult> {
    let op = a_mu(model);
    let d = descend(&op, Constraint::Free, x0, energy_objective(model), &opts.descent())?;
    let class = Classification::BallMin;
    polish(model, d.x, class, d.iterations, d.max_norm)
}

/// `‖u − v‖_μ`.
pub(crate) fn distance_mu(model: &Model, u: &[f64], v: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    norm_mu_sq(model, &d).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Canonical, ProblemSpec, Sampler};

    fn ball_p5(n: usize, lambda: f64) -> Model {
        let mut spec = ProblemSpec::canonical(Canonical::BallP5);
        spec.grid.nodes_per_axis = n;
        spec.lambda = lambda;
        Model::new(spec).unwrap()
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let m = ball_p5(241, 3.0);
        let grid = m.grid();
        let u: Vec<f64> = (0..grid.len()).map(|i| (-(grid.radius(i)).powi(2)).exp()).collect();
        let x: Vec<f64> = (0..grid.len())
            .map(|i| (2.0 * grid.radius(i)).cos() * (-grid.radius(i)).exp())
            .collect();
        let hx = hessian_apply(&m, &u, &x);
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&x).map(|(u, x)| u + h * x).collect();
        let um: Vec<f64> = u.iter().zip(&x).map(|(u, x)| u - h * x).collect();
        let gp = weighted_gradient(&m, &up);
        let gm = weighted_gradient(&m, &um);
        let scale = hx.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for i in 0..u.len() {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            assert!((fd - hx[i]).abs() <= 1e-6 * scale, "node {i}: {fd} vs {}", hx[i]);
        }
        let y = hessian_solve(&m, &u, &hx).unwrap();
        let err = y.iter().zip(&x).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn zero_field_is_fixed_by_newton() {
        let m = ball_p5(241, 3.0);
        let r = newton_refine(&m, &m.grid().zeros()).unwrap();
        assert!(r.is_trivial());
        assert!(!r.positive);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn sphere_min_without_g_is_positive() {
        let mut spec = ProblemSpec::canonical(Canonical::BallP5);
        spec.grid.nodes_per_axis = 241;
        spec.g = Sampler::Constant { value: 0.0 };
        let m = Model::new(spec).unwrap();
        let rho = 0.3;
        let s = sphere_min(&m, rho).unwrap();
        assert!(s.value >= 0.5 * rho * rho * (1.0 - 1e-9), "{}", s.value);
    }

    #[test]
    fn e0_requires_positive_g() {
        let mut spec = ProblemSpec::canonical(Canonical::BallP5);
        spec.grid.nodes_per_axis = 241;
        spec.g = Sampler::Constant { value: -1.0 };
        let m = Model::new(spec).unwrap();
        assert!(find_e0(&m, 0.1).is_err());
    }

    #[test]
    fn no_ball_minimum_below_lambda1() {
        let m = ball_p5(241, 0.0);
        let l1 = crate::eigen::lambda1_omega(&m).unwrap().value;
        let m = m.with_lambda(0.5 * l1).unwrap();
        assert!(matches!(ball_min(&m, 0.2), Err(Error::Degenerate { .. })));
    }
}
