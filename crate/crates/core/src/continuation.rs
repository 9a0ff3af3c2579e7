//! Pseudo-arclength continuation of positive solutions in λ, fold
//! detection and bifurcation-diagram export.
//!
//! Branches live in `(u, λ)` with the inner product `w⟨u, v⟩_μ + λκ`,
//! where `w = (λ₁/‖u_seed‖_μ)²` puts both components on the λ scale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::functional::{dual_norm_weighted, energy_parts, norm_mu_sq, weighted_gradient};
use crate::grid::Field;
use crate::linalg::dot;
use crate::problem::Model;
use crate::solvers::{
    a_mu, hessian_apply, hessian_solve, is_positive, multiplicity_census_with, newton, CensusOptions, NewtonOptions,
    SolveResult, TRIVIAL_NORM,
};

#[derive(Clone, Debug)]
pub struct ContinuationOptions {
    /// Step bounds as fractions of λ₁(f_Ω).
    pub ds_min: f64,
    pub ds_max: f64,
    pub ds_start: f64,
    pub max_points: usize,
    /// Corrector target and acceptance residuals.
    pub tol: f64,
    pub accept_tol: f64,
    pub max_corrector: usize,
    /// Inverse-iteration steps for the diagnostic eigenvalue; 0 skips it.
    pub eigen_steps: usize,
    /// Keep the field of every this many points (and of the ends); 0 keeps none.
    pub keep_every: usize,
    /// λ₁(f_Ω), computed when absent.
    pub lambda1: Option<f64>,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            ds_min: 1e-4,
            ds_max: 0.05,
            ds_start: 0.01,
            max_points: 400,
            tol: 1e-10,
            accept_tol: 1e-6,
            max_corrector: 12,
            eigen_steps: 20,
            keep_every: 10,
            lambda1: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub norm_mu: f64,
    pub energy: f64,
    pub residual: f64,
    /// Eigenvalue of the linearization nearest zero, relative to `⟨·,·⟩_μ`.
    pub smallest_eigenvalue: Option<f64>,
    /// λ-component of the unit tangent, oriented along the trace.
    pub lambda_dot: f64,
    pub fold_flag: bool,
    #[serde(skip)]
    pub field: Option<Field>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RangeEnd,
    StepUnderflow,
    Budget,
    /// The branch reached the zero solution or left the positive cone.
    Trivial,
    CorrectorDivergence,
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub stop: StopReason,
}

impl Branch {
    pub fn folds(&self) -> Vec<&BranchPoint> {
        self.points.iter().filter(|p| p.fold_flag).collect()
    }
}

/// Traces the branch through `seed` from `range.0` towards `range.1`. The
/// trace ends when λ leaves the range, the step underflows, the point
/// budget is spent or the branch reaches zero.
pub fn trace_branch(model: &Model, range: (f64, f64), seed: &SolveResult) -> Result<Branch> {
    trace_branch_with(model, range, seed, &ContinuationOptions::default())
}

pub fn trace_branch_with(
    model: &Model,
    range: (f64, f64),
    seed: &SolveResult,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let bounds = (range.0.min(range.1), range.0.max(range.1));
    let trace = trace(model, range.0, range.1 - range.0, bounds, seed, opts)?;
    if trace.branch.stop == StopReason::CorrectorDivergence {
        let at = trace.branch.points.last().map_or(range.0, |p| p.lambda);
        return Err(Error::no_convergence(
            "trace_branch",
            format!("corrector diverged after 5 step halvings near λ = {at:.6}"),
        ));
    }
    Ok(trace.branch)
}

struct Trace {
    branch: Branch,
    fields: Vec<Vec<f64>>,
}

fn lambda1_of(model: &Model, opts: &ContinuationOptions) -> Result<f64> {
    match opts.lambda1 {
        Some(l) => Ok(l),
        None => Ok(eigen::lambda1_omega(model)?.value),
    }
}

/// `W f u`, which is `−∂R/∂λ`.
fn wfu(model: &Model, u: &[f64]) -> Vec<f64> {
    let w = model.grid().weights();
    let f = model.f();
    (0..u.len()).map(|i| w[i] * f[i] * u[i]).collect()
}

/// Unit tangent at a solution, oriented to agree with `prev` (or with the
/// sign `dir` of dλ when there is none).
fn tangent(model: &Model, w: f64, u: &[f64], prev: Option<(&[f64], f64)>, dir: f64) -> Result<(Vec<f64>, f64)> {
    let op = a_mu(model);
    let z = hessian_solve(model, u, &wfu(model, u))?;
    let n = (w * dot(&z, &op.apply(&z)).max(0.0) + 1.0).sqrt();
    let mut tu: Vec<f64> = z.iter().map(|v| v / n).collect();
    let mut tl = 1.0 / n;
    let flip = match prev {
        Some((pu, pl)) => w * dot(pu, &op.apply(&tu)) + pl * tl < 0.0,
        None => tl * dir < 0.0,
    };
    if flip {
        tu.iter_mut().for_each(|v| *v = -*v);
        tl = -tl;
    }
    Ok((tu, tl))
}

/// Eigenvalue of `H x = σ A_μ x` nearest zero by inverse iteration from `u`.
fn smallest_eigenvalue(model: &Model, u: &[f64], steps: usize) -> Option<f64> {
    if steps == 0 {
        return None;
    }
    let op = a_mu(model);
    let mut x = u.to_vec();
    let mut sigma = f64::NAN;
    for _ in 0..steps {
        let n = dot(&x, &op.apply(&x)).max(0.0).sqrt();
        if !(n > 0.0) {
            return None;
        }
        x.iter_mut().for_each(|v| *v /= n);
        let hx = hessian_apply(model, u, &x);
        sigma = dot(&x, &hx);
        x = hessian_solve(model, u, &op.apply(&x)).ok()?;
    }
    sigma.is_finite().then_some(sigma)
}

struct Corrected {
    u: Vec<f64>,
    lambda: f64,
    residual: f64,
    iterations: usize,
}

/// Newton on the bordered system `R(u, λ) = 0`, `⟨τ, (u, λ) − x⟩ = ds`.
fn correct(
    model: &Model,
    w: f64,
    x: (&[f64], f64),
    tau: (&[f64], f64),
    ds: f64,
    opts: &ContinuationOptions,
) -> Result<Option<Corrected>> {
    let op = a_mu(model);
    let atau: Vec<f64> = op.apply(tau.0).into_iter().map(|v| w * v).collect();
    let mut u: Vec<f64> = x.0.iter().zip(tau.0).map(|(x, t)| x + ds * t).collect();
    let mut lambda = x.1 + ds * tau.1;
    let mut last = f64::INFINITY;
    for it in 0..=opts.max_corrector {
        let m = model.with_lambda(lambda)?;
        let r = weighted_gradient(&m, &u);
        let res = dual_norm_weighted(&m, &r)?;
        if !res.is_finite() || res > 1e3 * last.max(1e-300) && it > 1 {
            return Ok(None);
        }
        if res <= opts.tol || (it == opts.max_corrector && res <= opts.accept_tol) {
            return Ok(Some(Corrected {
                u,
                lambda,
                residual: res,
                iterations: it,
            }));
        }
        if it == opts.max_corrector {
            break;
        }
        // Stagnation at round-off: accept.
        if res <= opts.accept_tol && res > 0.5 * last {
            return Ok(Some(Corrected {
                u,
                lambda,
                residual: res,
                iterations: it,
            }));
        }
        last = res;
        let constraint: f64 = {
            let du: Vec<f64> = u.iter().zip(x.0).map(|(a, b)| a - b).collect();
            dot(&atau, &du) + tau.1 * (lambda - x.1) - ds
        };
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let a = match hessian_solve(&m, &u, &neg_r) {
            Ok(a) => a,
            Err(Error::NoConvergence { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let b = match hessian_solve(&m, &u, &wfu(&m, &u)) {
            Ok(b) => b,
            Err(Error::NoConvergence { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let denom = dot(&atau, &b) + tau.1;
        if denom.abs() < 1e-300 {
            return Ok(None);
        }
        let dl = (-constraint - dot(&atau, &a)) / denom;
        u.iter_mut()
            .zip(a.iter().zip(&b))
            .for_each(|(u, (a, b))| *u += a + dl * b);
        lambda += dl;
    }
    Ok(None)
}

/// Trace from `start` heading in the direction of sign `dir` in λ, within
/// `[lo, hi]`; `dir = 0` returns the seed alone.
fn trace(
    model: &Model,
    start: f64,
    dir: f64,
    (lo, hi): (f64, f64),
    seed: &SolveResult,
    opts: &ContinuationOptions,
) -> Result<Trace> {
    model.grid().check(&seed.field)?;
    if !start.is_finite() || !dir.is_finite() || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param("λ range must be finite"));
    }
    let m0 = model.with_lambda(start)?;
    let u0 = seed.field.values().to_vec();
    let r0 = dual_norm_weighted(&m0, &weighted_gradient(&m0, &u0))?;
    if r0 > opts.accept_tol {
        return Err(Error::param(format!(
            "seed is not a solution at λ = {start}: residual {r0:.3e}"
        )));
    }
    let lambda1 = lambda1_of(model, opts)?;
    let w = (lambda1 / seed.norm_mu.max(TRIVIAL_NORM)).powi(2);
    let (mut tu, mut tl) = tangent(&m0, w, &u0, None, dir)?;
    let point = |m: &Model, u: &[f64], residual: f64, lambda_dot: f64, keep: bool| BranchPoint {
        lambda: m.lambda(),
        norm_mu: norm_mu_sq(m, u).max(0.0).sqrt(),
        energy: energy_parts(m, u).total,
        residual,
        smallest_eigenvalue: smallest_eigenvalue(m, u, opts.eigen_steps),
        lambda_dot,
        fold_flag: false,
        field: keep.then(|| m.grid().wrap(u.to_vec())),
    };
    let mut points = vec![point(&m0, &u0, r0, tl, opts.keep_every > 0)];
    let mut fields = vec![u0.clone()];
    if dir == 0.0 {
        return Ok(Trace {
            branch: Branch {
                points,
                stop: StopReason::RangeEnd,
            },
            fields,
        });
    }
    let (ds_min, ds_max) = (opts.ds_min * lambda1, opts.ds_max * lambda1);
    let mut ds = (opts.ds_start * lambda1).clamp(ds_min, ds_max);
    let mut u = u0;
    let mut lambda = start;
    let stop = loop {
        if points.len() >= opts.max_points {
            break StopReason::Budget;
        }
        let mut halvings = 0;
        let mut trivial;
        let accepted = loop {
            let c = correct(model, w, (&u, lambda), (&tu, tl), ds, opts)?;
            let ok = match &c {
                Some(c) => {
                    let m = model.with_lambda(c.lambda)?;
                    let du: Vec<f64> = c.u.iter().zip(&u).map(|(a, b)| a - b).collect();
                    let dist = (w * norm_mu_sq(&m, &du).max(0.0) + (c.lambda - lambda).powi(2)).sqrt();
                    let norm = norm_mu_sq(&m, &c.u).max(0.0).sqrt();
                    let pos = norm > TRIVIAL_NORM && is_positive(&m, &c.u);
                    trivial = !pos;
                    pos && dist <= 2.0 * ds
                }
                None => {
                    trivial = false;
                    false
                }
            };
            if ok {
                break c;
            }
            ds *= 0.5;
            if ds < ds_min {
                break None;
            }
            if !trivial {
                halvings += 1;
                if halvings > 5 {
                    break None;
                }
            }
        };
        let Some(c) = accepted else {
            break if trivial {
                StopReason::Trivial
            } else if ds < ds_min {
                StopReason::StepUnderflow
            } else {
                StopReason::CorrectorDivergence
            };
        };
        if c.lambda < lo || c.lambda > hi {
            // Land on the bound itself so the trace ends exactly there.
            let b = if c.lambda < lo { lo } else { hi };
            let t = (b - lambda) / (c.lambda - lambda);
            let guess: Vec<f64> = u.iter().zip(&c.u).map(|(a, b)| a + t * (b - a)).collect();
            let m = model.with_lambda(b)?;
            if let Ok(run) = newton(&m, guess, &NewtonOptions::default()) {
                if is_positive(&m, &run.x) && norm_mu_sq(&m, &run.x).sqrt() > TRIVIAL_NORM {
                    let (_, nl) = tangent(&m, w, &run.x, Some((&tu, tl)), dir)?;
                    let res = dual_norm_weighted(&m, &weighted_gradient(&m, &run.x))?;
                    let mut p = point(&m, &run.x, res, nl, opts.keep_every > 0);
                    p.fold_flag = (nl > 0.0) != (tl > 0.0);
                    points.push(p);
                    fields.push(run.x);
                }
            }
            break StopReason::RangeEnd;
        }
        let m = model.with_lambda(c.lambda)?;
        let (nu, nl) = tangent(&m, w, &c.u, Some((&tu, tl)), dir)?;
        let keep = opts.keep_every > 0 && points.len() % opts.keep_every == 0;
        let mut p = point(&m, &c.u, c.residual, nl, keep);
        p.fold_flag = (nl > 0.0) != (tl > 0.0);
        points.push(p);
        fields.push(c.u.clone());
        if c.iterations <= 3 {
            ds = (1.5 * ds).min(ds_max);
        } else if c.iterations >= 7 {
            ds = (0.7 * ds).max(ds_min);
        }
        u = c.u;
        lambda = c.lambda;
        tu = nu;
        tl = nl;
    };
    if opts.keep_every > 0 {
        if let (Some(p), Some(f)) = (points.last_mut(), fields.last()) {
            p.field.get_or_insert_with(|| model.grid().wrap(f.clone()));
        }
    }
    Ok(Trace {
        branch: Branch { points, stop },
        fields,
    })
}

/// One row of a bifurcation diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramRow {
    pub a: f64,
    pub lambda: f64,
    pub norm_mu: f64,
    pub energy: f64,
    pub branch_id: usize,
    pub fold_flag: bool,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct DiagramOptions {
    pub census: CensusOptions,
    pub continuation: ContinuationOptions,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        DiagramOptions {
            census: CensusOptions::default(),
            continuation: ContinuationOptions {
                eigen_steps: 0,
                keep_every: 0,
                ..Default::default()
            },
        }
    }
}

/// Branches seeded by censuses at every `λ_grid` value and traced across
/// the grid's span, for each `a`. Searches that fail leave no rows.
pub fn bifurcation_diagram(model: &Model, lambda_grid: &[f64], a_list: &[f64]) -> Result<Vec<DiagramRow>> {
    bifurcation_diagram_with(model, lambda_grid, a_list, &DiagramOptions::default())
}

pub fn bifurcation_diagram_with(
    model: &Model,
    lambda_grid: &[f64],
    a_list: &[f64],
    opts: &DiagramOptions,
) -> Result<Vec<DiagramRow>> {
    if lambda_grid.is_empty() || a_list.is_empty() {
        return Ok(Vec::new());
    }
    if lambda_grid.iter().chain(a_list).any(|v| !v.is_finite()) {
        return Err(Error::param("λ grid and a list must be finite"));
    }
    let lambda1 = lambda1_of(model, &opts.continuation)?;
    let cont = ContinuationOptions {
        lambda1: Some(lambda1),
        ..opts.continuation.clone()
    };
    let census = CensusOptions {
        mu_ladder_max: model.mu(),
        ..opts.census.clone()
    };
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let per_a: Vec<Vec<Vec<BranchPoint>>> = a_list
        .par_iter()
        .map(|&a| -> Result<Vec<Vec<BranchPoint>>> {
            let m = model.with_a(a)?;
            Ok(branches_for(&m, &grid, &census, &cont))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut id = 0;
    for (&a, branches) in a_list.iter().zip(per_a) {
        for b in branches {
            rows.extend(b.into_iter().map(|p| DiagramRow {
                a,
                lambda: p.lambda,
                norm_mu: p.norm_mu,
                energy: p.energy,
                branch_id: id,
                fold_flag: p.fold_flag,
                residual: p.residual,
            }));
            id += 1;
        }
    }
    Ok(rows)
}

fn branches_for(
    model: &Model,
    grid: &[f64],
    census: &CensusOptions,
    cont: &ContinuationOptions,
) -> Vec<Vec<BranchPoint>> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let mut traced: Vec<(Vec<BranchPoint>, Vec<Vec<f64>>)> = Vec::new();
    for &lambda in grid {
        let Ok(c) = multiplicity_census_with(model, lambda, census) else {
            continue;
        };
        for s in &c.solutions {
            if traced.iter().any(|(pts, fs)| covers(model, pts, fs, lambda, s)) {
                continue;
            }
            let up = trace(model, lambda, 1.0, (lo, hi), s, cont).ok();
            let down = trace(model, lambda, -1.0, (lo, hi), s, cont).ok();
            let (mut pts, mut fs) = (Vec::new(), Vec::new());
            if let Some(d) = down {
                for (p, f) in d.branch.points.into_iter().zip(d.fields).skip(1).rev() {
                    pts.push(BranchPoint {
                        lambda_dot: -p.lambda_dot,
                        ..p
                    });
                    fs.push(f);
                }
            }
            match up {
                Some(u) => {
                    pts.extend(u.branch.points);
                    fs.extend(u.fields);
                }
                None => {
                    pts.push(BranchPoint {
                        lambda,
                        norm_mu: s.norm_mu,
                        energy: s.energy,
                        residual: s.residual,
                        smallest_eigenvalue: None,
                        lambda_dot: 0.0,
                        fold_flag: false,
                        field: None,
                    });
                    fs.push(s.field.values().to_vec());
                }
            }
            mark_folds(&mut pts);
            traced.push((pts, fs));
        }
    }
    traced.into_iter().map(|(p, _)| p).collect()
}

/// Fold flags where the λ-component of consecutive tangents changes sign.
fn mark_folds(points: &mut [BranchPoint]) {
    for i in 0..points.len() {
        points[i].fold_flag = i > 0
            && points[i].lambda_dot != 0.0
            && points[i - 1].lambda_dot != 0.0
            && (points[i].lambda_dot > 0.0) != (points[i - 1].lambda_dot > 0.0);
    }
}

/// True when the traced polyline passes within a tenth of the solution's
/// norm of `s` at the parameter value `lambda`.
fn covers(model: &Model, pts: &[BranchPoint], fields: &[Vec<f64>], lambda: f64, s: &SolveResult) -> bool {
    let target = s.field.values();
    let tol = 0.1 * s.norm_mu.max(TRIVIAL_NORM);
    let near = |u: &[f64]| {
        let d: Vec<f64> = u.iter().zip(target).map(|(a, b)| a - b).collect();
        norm_mu_sq(model, &d).max(0.0).sqrt() <= tol
    };
    for i in 0..pts.len() {
        if pts[i].lambda == lambda && near(&fields[i]) {
            return true;
        }
        if i + 1 < pts.len() {
            let (l0, l1) = (pts[i].lambda, pts[i + 1].lambda);
            if (l0 - lambda) * (l1 - lambda) < 0.0 {
                let t = (lambda - l0) / (l1 - l0);
                let u: Vec<f64> = fields[i]
                    .iter()
                    .zip(&fields[i + 1])
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                if near(&u) {
                    return true;
                }
            }
        }
    }
    false
}

/// CSV with a header row.
pub fn diagram_csv(rows: &[DiagramRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::param(format!("csv: {e}")))?;
    }
    if rows.is_empty() {
        w.write_record(["a", "lambda", "norm_mu", "energy", "branch_id", "fold_flag", "residual"])
            .map_err(|e| Error::param(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::param(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// λ against `‖u‖_μ`, one colour per `a`, folds circled, λ₁ dashed.
pub fn diagram_svg(rows: &[DiagramRow], lambda1: Option<f64>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 50.0;
    const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if rows.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&DiagramRow) -> f64| rows.iter().map(sel).fold(init, f);
    let mut lmin = fold(f64::min, f64::INFINITY, |r| r.lambda);
    let mut lmax = fold(f64::max, f64::NEG_INFINITY, |r| r.lambda);
    if let Some(l) = lambda1 {
        lmin = lmin.min(l);
        lmax = lmax.max(l);
    }
    let nmax = fold(f64::max, 0.0, |r| r.norm_mu).max(f64::MIN_POSITIVE);
    let span = (lmax - lmin).max(1e-12);
    let sx = |l: f64| PAD + (l - lmin) / span * (W - 2.0 * PAD);
    let sy = |n: f64| H - PAD - n / nmax * (H - 2.0 * PAD);
    out.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{y}\" stroke=\"black\"/>\n\
         <text x=\"{tx}\" y=\"{ty}\" font-size=\"12\">λ</text>\n\
         <text x=\"10\" y=\"{PAD}\" font-size=\"12\">‖u‖_μ</text>\n\
         <text x=\"{PAD}\" y=\"{ly}\" font-size=\"10\">{lmin:.4}</text>\n\
         <text x=\"{x2}\" y=\"{ly}\" font-size=\"10\" text-anchor=\"end\">{lmax:.4}</text>\n\
         <text x=\"{nx}\" y=\"{ny}\" font-size=\"10\" text-anchor=\"end\">{nmax:.4}</text>\n",
        y = H - PAD,
        x2 = W - PAD,
        tx = W / 2.0,
        ty = H - 10.0,
        ly = H - PAD + 15.0,
        nx = PAD - 4.0,
        ny = PAD + 4.0,
    ));
    if let Some(l) = lambda1 {
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{PAD}\" x2=\"{x:.2}\" y2=\"{y}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
            x = sx(l),
            y = H - PAD
        ));
    }
    let mut a_values: Vec<f64> = Vec::new();
    for r in rows {
        if !a_values.contains(&r.a) {
            a_values.push(r.a);
        }
    }
    let mut start = 0;
    while start < rows.len() {
        let id = rows[start].branch_id;
        let end = start + rows[start..].iter().take_while(|r| r.branch_id == id).count();
        let colour = COLOURS[a_values.iter().position(|a| *a == rows[start].a).unwrap_or(0) % COLOURS.len()];
        let pts: Vec<String> = rows[start..end]
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.lambda), sy(r.norm_mu)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        for r in rows[start..end].iter().filter(|r| r.fold_flag) {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"none\" stroke=\"black\"/>\n",
                sx(r.lambda),
                sy(r.norm_mu)
            ));
        }
        start = end;
    }
    for (i, a) in a_values.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" fill=\"{c}\" text-anchor=\"end\">a = {a:.4}</text>\n",
            x = W - PAD,
            y = PAD + 14.0 * i as f64,
            c = COLOURS[i % COLOURS.len()]
        ));
    }
    out.push_str("</svg>\n");
    out
}
