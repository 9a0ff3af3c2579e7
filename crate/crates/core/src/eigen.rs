//! Weighted eigenproblems `−Δu + μVu = λ f u`, on Ω (μ-free, Dirichlet on
//! ∂Ω) and on the whole truncated domain.
//!
//! The pencil `(A, F)` with `A = K + μWV` positive definite and `F = W f`
//! possibly indefinite is handled through `T = A⁻¹F`, which is self-adjoint
//! in the `A` inner product; the smallest positive eigenvalue is `1/σ` for
//! the largest eigenvalue `σ` of `T`. Each start runs restarted Krylov
//! iterations with full `A`-orthogonalization and Rayleigh–Ritz
//! extraction. Second eigenpairs deflate `A`-orthogonally against the
//! principal field, which is `∇`-orthogonality on Ω and `⟨·,·⟩_μ`
//! orthogonality on the whole domain.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dirichlet, Field, Grid};
use crate::linalg::{dot, Operator};
use crate::problem::Model;
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub field: Field,
    /// Dual norm of `−Δu + μVu − λfu`.
    pub residual: f64,
    pub f_mass: f64,
    /// `A`-inner product with the principal field (0 for principal pairs).
    pub orth: f64,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            starts: 5,
            seed: 0,
            tol: 1e-8,
            krylov_dim: 30,
            max_restarts: 60,
        }
    }
}

struct Pencil<'a> {
    grid: &'a Grid,
    a: Operator<'a>,
    f: Vec<f64>,
    dual: Operator<'a>,
    mask: Option<&'a [bool]>,
}

impl<'a> Pencil<'a> {
    fn omega(model: &'a Model) -> Self {
        let grid = model.grid();
        let mask = Some(model.omega());
        let n = grid.len();
        let f = (0..n)
            .map(|i| {
                if model.omega()[i] {
                    grid.weights()[i] * model.f()[i]
                } else {
                    0.0
                }
            })
            .collect();
        Pencil {
            grid,
            a: Operator::new(grid, 1.0, vec![0.0; n], true).masked(mask),
            f,
            dual: Operator::new(grid, 1.0, grid.weights().to_vec(), true).masked(mask),
            mask,
        }
    }

    fn whole(model: &'a Model, mu: f64) -> Self {
        let grid = model.grid();
        let w = grid.weights();
        let pot: Vec<f64> = w.iter().zip(model.v()).map(|(w, v)| mu * w * v).collect();
        let dual = pot.iter().zip(w).map(|(p, w)| p + w).collect();
        Pencil {
            grid,
            a: Operator::new(grid, 1.0, pot, true),
            f: w.iter().zip(model.f()).map(|(w, f)| w * f).collect(),
            dual: Operator::new(grid, 1.0, dual, true),
            mask: None,
        }
    }

    fn mask_vec(&self, x: &mut [f64]) {
        if let Some(m) = self.mask {
            x.iter_mut().zip(m).for_each(|(v, &keep)| {
                if !keep {
                    *v = 0.0
                }
            });
        }
    }

    fn f_apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.f).map(|(x, f)| x * f).collect()
    }

    fn residual(&self, value: f64, u: &[f64]) -> Result<f64> {
        let mut r = self.a.apply(u);
        let fu = self.f_apply(u);
        r.iter_mut().zip(&fu).for_each(|(r, f)| *r -= value * f);
        self.mask_vec(&mut r);
        if r.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let z = self.dual.solve(&r)?;
        Ok(dot(&r, &z).max(0.0).sqrt())
    }
}

struct Deflation {
    phi: Vec<f64>,
    a_phi: Vec<f64>,
    norm_sq: f64,
}

impl Deflation {
    fn new(pencil: &Pencil, phi: &[f64]) -> Result<Self> {
        let a_phi = pencil.a.apply(phi);
        let norm_sq = dot(phi, &a_phi);
        if !(norm_sq > 0.0) {
            return Err(Error::degenerate("eigen deflation", "principal field has zero norm"));
        }
        Ok(Deflation {
            phi: phi.to_vec(),
            a_phi,
            norm_sq,
        })
    }

    fn project(&self, x: &mut [f64]) {
        let c = dot(x, &self.a_phi) / self.norm_sq;
        x.iter_mut().zip(&self.phi).for_each(|(x, p)| *x -= c * p);
    }
}

impl EigenOptions {
    pub fn lambda1_omega(&self, model: &Model) -> Result<EigenPair> {
        let pencil = Pencil::omega(model);
        self.solve(&pencil, None)
    }

    pub fn lambda2_omega(&self, model: &Model, phi1: &EigenPair) -> Result<EigenPair> {
        model.grid().check(&phi1.field)?;
        let pencil = Pencil::omega(model);
        let defl = Deflation::new(&pencil, phi1.field.values())?;
        self.solve(&pencil, Some(&defl))
    }

    pub fn lambda1_mu(&self, model: &Model, mu: f64) -> Result<EigenPair> {
        check_mu(mu)?;
        let pencil = Pencil::whole(model, mu);
        self.solve(&pencil, None)
    }

    pub fn lambda2_mu(&self, model: &Model, mu: f64, phi1: &EigenPair) -> Result<EigenPair> {
        check_mu(mu)?;
        model.grid().check(&phi1.field)?;
        let pencil = Pencil::whole(model, mu);
        let defl = Deflation::new(&pencil, phi1.field.values())?;
        self.solve(&pencil, Some(&defl))
    }

    fn solve(&self, pencil: &Pencil, defl: Option<&Deflation>) -> Result<EigenPair> {
        let grid = pencil.grid;
        let reach = grid.spec().half_length * 0.5;
        let runs: Vec<Result<(f64, Vec<f64>)>> = (0..self.starts.max(1))
            .into_par_iter()
            .map(|s| {
                let mut r = rng::stream(self.seed, "eigen", s as u64);
                let mut x = rng::smooth_field(grid, &mut r, reach, false);
                // Seed 0 starts from the principal-looking positive field.
                if s == 0 {
                    x.iter_mut().for_each(|v| *v = v.abs() + 0.1);
                }
                pencil.mask_vec(&mut x);
                self.krylov(pencil, defl, x)
            })
            .collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut first_err = None;
        for run in runs {
            match run {
                Ok((value, y)) => {
                    if best.as_ref().is_none_or(|(b, _)| value < *b) {
                        best = Some((value, y));
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        let (_, mut y) = match (best, first_err) {
            (Some(b), _) => b,
            (None, Some(e)) => return Err(e),
            (None, None) => unreachable!("at least one start"),
        };
        if defl.is_none() && pencil.f.iter().all(|&f| f >= 0.0) {
            // One inverse-power step keeps the principal field entrywise positive.
            let fy = pencil.f_apply(&y);
            y = pencil.a.solve(&fy)?;
            pencil.mask_vec(&mut y);
            let peak = y.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            y.iter_mut().for_each(|v| {
                if *v * peak < 0.0 && v.abs() < 1e-12 * peak.abs() {
                    *v = 0.0
                }
            });
        }
        if let Some(d) = defl {
            d.project(&mut y);
        }
        self.finish(pencil, defl, y)
    }

    fn finish(&self, pencil: &Pencil, defl: Option<&Deflation>, mut y: Vec<f64>) -> Result<EigenPair> {
        let mass = dot(&y, &pencil.f_apply(&y));
        if !(mass > 0.0) {
            return Err(no_positive());
        }
        let s = mass.sqrt();
        y.iter_mut().for_each(|v| *v /= s);
        let (imax, _) = y.iter().enumerate().fold(
            (0, 0.0f64),
            |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) },
        );
        if y[imax] < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        let ay = pencil.a.apply(&y);
        let f_mass = dot(&y, &pencil.f_apply(&y));
        let value = dot(&y, &ay) / f_mass;
        let residual = pencil.residual(value, &y)?;
        if residual > self.tol {
            return Err(Error::no_convergence(
                "eigen solve",
                format!("dual residual {residual:.3e} above {:.1e}", self.tol),
            ));
        }
        let orth = defl.map_or(0.0, |d| dot(&y, &d.a_phi));
        Ok(EigenPair {
            value,
            field: pencil.grid.wrap(y),
            residual,
            f_mass,
            orth,
        })
    }

    /// Restarted Krylov–Rayleigh–Ritz for the top eigenvalue of `A⁻¹F`.
    /// Returns `(λ, field)` with the field not yet normalized.
    fn krylov(&self, pencil: &Pencil, defl: Option<&Deflation>, mut x: Vec<f64>) -> Result<(f64, Vec<f64>)> {
        let n = x.len();
        let m = self.krylov_dim.clamp(2, n);
        let mut last_res = f64::INFINITY;
        for _ in 0..self.max_restarts {
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
            let mut a_basis: Vec<Vec<f64>> = Vec::with_capacity(m);
            let mut candidate = x.clone();
            for _ in 0..m {
                if let Some(d) = defl {
                    d.project(&mut candidate);
                }
                pencil.mask_vec(&mut candidate);
                let start_norm = dot(&candidate, &pencil.a.apply(&candidate)).max(0.0).sqrt();
                for _ in 0..2 {
                    for (b, ab) in basis.iter().zip(&a_basis) {
                        let c = dot(&candidate, ab);
                        candidate.iter_mut().zip(b).for_each(|(x, b)| *x -= c * b);
                    }
                }
                let ac = pencil.a.apply(&candidate);
                let nrm = dot(&candidate, &ac).max(0.0).sqrt();
                if !(nrm > 1e-10 * start_norm) || nrm == 0.0 {
                    break;
                }
                basis.push(candidate.iter().map(|v| v / nrm).collect());
                a_basis.push(ac.iter().map(|v| v / nrm).collect());
                if basis.len() == m {
                    break;
                }
                let fb = pencil.f_apply(basis.last().unwrap());
                candidate = pencil.a.solve(&fb)?;
            }
            let k = basis.len();
            if k == 0 {
                return Err(Error::degenerate(
                    "eigen solve",
                    "start vector vanished after projection",
                ));
            }
            let fb: Vec<Vec<f64>> = basis.iter().map(|b| pencil.f_apply(b)).collect();
            let h = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&basis[i], &fb[j]) + dot(&basis[j], &fb[i])));
            let eig = SymmetricEigen::new(h);
            let (top, sigma) =
                eig.eigenvalues
                    .iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
                    );
            if !(sigma > 0.0) {
                return Err(no_positive());
            }
            let coeffs = eig.eigenvectors.column(top);
            let mut y = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                let c = coeffs[j];
                y.iter_mut().zip(b).for_each(|(y, b)| *y += c * b);
            }
            let lambda = 1.0 / sigma;
            let mass = dot(&y, &pencil.f_apply(&y));
            let res = pencil.residual(lambda, &y)? / mass.max(f64::MIN_POSITIVE).sqrt();
            if res <= 0.1 * self.tol || (res <= self.tol && res >= 0.5 * last_res) {
                return Ok((lambda, y));
            }
            last_res = res;
            x = y;
        }
        Err(Error::no_convergence(
            "eigen solve",
            format!("dual residual {last_res:.3e} after {} restarts", self.max_restarts),
        ))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu < 0.0 || !mu.is_finite() {
        return Err(Error::param(format!("mu = {mu} must be nonnegative")));
    }
    Ok(())
}

fn no_positive() -> Error {
    Error::Condition {
        condition: "D1",
        detail: "no field with ∫f u² > 0 exists on the admissible nodes".into(),
    }
}

/// λ₁(f_Ω) and φ₁ over fields supported on Ω nodes.
pub fn lambda1_omega(model: &Model) -> Result<EigenPair> {
    EigenOptions::default().lambda1_omega(model)
}

/// λ₂(f_Ω) in the ∇-orthogonal complement of φ₁.
pub fn lambda2_omega(model: &Model, phi1: &EigenPair) -> Result<EigenPair> {
    EigenOptions::default().lambda2_omega(model, phi1)
}

/// λ_{1,μ}(f) over the whole truncated domain.
pub fn lambda1_mu(model: &Model, mu: f64) -> Result<EigenPair> {
    EigenOptions::default().lambda1_mu(model, mu)
}

/// λ_{2,μ}(f) in the ⟨·,·⟩_μ-orthogonal complement of φ_{1,μ}.
pub fn lambda2_mu(model: &Model, mu: f64, phi1: &EigenPair) -> Result<EigenPair> {
    EigenOptions::default().lambda2_mu(model, mu, phi1)
}

/// The four eigenvalues the constants need.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda1_mu: f64,
    pub lambda2_mu: f64,
}

#[derive(Clone, Debug)]
pub struct EigenSet {
    pub omega1: EigenPair,
    pub omega2: EigenPair,
    pub mu1: EigenPair,
    pub mu2: EigenPair,
}

impl EigenSet {
    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            lambda1: self.omega1.value,
            lambda2: self.omega2.value,
            lambda1_mu: self.mu1.value,
            lambda2_mu: self.mu2.value,
        }
    }
}

/// All four eigenpairs at the model's μ.
pub fn eigen_set(model: &Model, opts: &EigenOptions) -> Result<EigenSet> {
    let omega1 = opts.lambda1_omega(model)?;
    let omega2 = opts.lambda2_omega(model, &omega1)?;
    let mu1 = opts.lambda1_mu(model, model.mu())?;
    let mu2 = opts.lambda2_mu(model, model.mu(), &mu1)?;
    Ok(EigenSet {
        omega1,
        omega2,
        mu1,
        mu2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub mu: f64,
    pub lambda1_mu: f64,
    pub lambda2_mu: f64,
    /// λ₁(f_Ω) − λ_{1,μ}(f)
    pub gap1: f64,
    /// Dirichlet seminorm of φ_{1,μ} − φ₁.
    pub eigfield_dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuScan {
    pub lambda1_omega: f64,
    pub rows: Vec<ScanRow>,
}

pub fn mu_convergence_scan(model: &Model, mus: &[f64]) -> Result<MuScan> {
    mu_convergence_scan_with(model, mus, &EigenOptions::default())
}

pub fn mu_convergence_scan_with(model: &Model, mus: &[f64], opts: &EigenOptions) -> Result<MuScan> {
    if mus.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("mu list must be strictly increasing"));
    }
    let grid = model.grid();
    let phi1 = opts.lambda1_omega(model)?;
    let rows = mus
        .par_iter()
        .map(|&mu| {
            let e1 = opts.lambda1_mu(model, mu)?;
            let e2 = opts.lambda2_mu(model, mu, &e1)?;
            let diff: Vec<f64> = e1
                .field
                .values()
                .iter()
                .zip(phi1.field.values())
                .map(|(a, b)| a - b)
                .collect();
            Ok(ScanRow {
                mu,
                lambda1_mu: e1.value,
                lambda2_mu: e2.value,
                gap1: phi1.value - e1.value,
                eigfield_dist: dirichlet(grid, &diff, &diff).max(0.0).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MuScan {
        lambda1_omega: phi1.value,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::problem::{Canonical, ProblemSpec, Sampler, Shape};
    use std::f64::consts::PI;

    fn interval(n: usize, f: Sampler) -> Model {
        let mut spec = ProblemSpec::canonical(Canonical::BallP5);
        spec.grid = GridSpec::tensor(1, 0.5, n);
        spec.omega = Shape::Cube { half_side: 0.5 };
        spec.f = f;
        spec.p = 3.0;
        Model::new(spec).unwrap()
    }

    #[test]
    fn interval_first_two() {
        let m = interval(201, Sampler::Constant { value: 1.0 });
        let e1 = lambda1_omega(&m).unwrap();
        let e2 = lambda2_omega(&m, &e1).unwrap();
        assert!((e1.value - PI * PI).abs() < 0.005 * PI * PI);
        assert!((e2.value - 4.0 * PI * PI).abs() < 0.005 * 4.0 * PI * PI);
        assert!((e1.f_mass - 1.0).abs() < 1e-8);
        assert!(e1.field.values().iter().all(|&v| v > 0.0));
        assert!(e1.residual <= 1e-8 && e2.residual <= 1e-8);
        let d1 = dirichlet(m.grid(), e1.field.values(), e1.field.values()).sqrt();
        let d2 = dirichlet(m.grid(), e2.field.values(), e2.field.values()).sqrt();
        assert!(e2.orth.abs() <= 1e-8 * d1 * d2);
    }

    #[test]
    fn doubling_f_halves_lambda() {
        let a = lambda1_omega(&interval(101, Sampler::Constant { value: 1.0 })).unwrap();
        let b = lambda1_omega(&interval(101, Sampler::Constant { value: 2.0 })).unwrap();
        assert!((a.value - 2.0 * b.value).abs() <= 1e-10 * a.value);
    }

    #[test]
    fn sign_changing_weight() {
        let m = interval(
            201,
            Sampler::Bump {
                amp: 2.0,
                width: 1.0,
                kappa: 0.05,
            },
        );
        let e = lambda1_omega(&m).unwrap();
        assert!(e.value > 0.0);
        assert!((e.f_mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn no_positive_weight_is_d1() {
        let m = interval(51, Sampler::Constant { value: -1.0 });
        assert!(matches!(
            lambda1_omega(&m),
            Err(Error::Condition { condition: "D1", .. })
        ));
    }
}
