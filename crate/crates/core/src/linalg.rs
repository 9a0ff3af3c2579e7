//! Linear solvers for operators of the form `s·K + diag(d)`, optionally
//! restricted to a node mask, plus rank-one corrections.
//!
//! Banded grids go through a pivoted tridiagonal LU. Tensor grids in two and
//! three dimensions use Jacobi-preconditioned CG when the operator is known
//! to be positive definite and MINRES otherwise.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// General tridiagonal matrix; `lower[i]` sits at `(i+1, i)`, `upper[i]` at `(i, i+1)`.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len() + 1, diag.len());
        debug_assert_eq!(upper.len() + 1, diag.len());
        Tridiagonal { lower, diag, upper }
    }

    /// Gaussian elimination with partial pivoting (one extra fill-in band).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut d = self.diag.clone();
        let mut u1: Vec<f64> = self.upper.clone();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut l = self.lower.clone();
        let mut x = b.to_vec();
        let scale = d
            .iter()
            .chain(&self.lower)
            .chain(&self.upper)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-300_f64.max(f64::EPSILON * 1e-6);
        for i in 0..n - 1 {
            if l[i].abs() > d[i].abs() {
                // Swap rows i and i+1.
                std::mem::swap(&mut d[i], &mut l[i]);
                let (a, bb) = (u1[i], d[i + 1]);
                u1[i] = bb;
                d[i + 1] = a;
                let (a, bb) = (u2[i], u1[i + 1]);
                u2[i] = bb;
                u1[i + 1] = a;
                x.swap(i, i + 1);
            }
            if d[i].abs() <= tiny {
                return Err(Error::degenerate("tridiagonal solve", "singular matrix"));
            }
            let m = l[i] / d[i];
            d[i + 1] -= m * u1[i];
            u1[i + 1] -= m * u2[i];
            x[i + 1] -= m * x[i];
            l[i] = 0.0;
        }
        if d[n - 1].abs() <= tiny {
            return Err(Error::degenerate("tridiagonal solve", "singular matrix"));
        }
        x[n - 1] /= d[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - u1[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - u1[i] * x[i + 1] - u2[i] * x[i + 2]) / d[i];
        }
        Ok(x)
    }
}

/// `s·K + diag(d)` on the grid; rows outside `mask` act as the identity.
#[derive(Clone, Debug)]
pub(crate) struct Operator<'a> {
    grid: &'a Grid,
    scale: f64,
    diag: Vec<f64>,
    mask: Option<&'a [bool]>,
    definite: bool,
}

pub(crate) const LINEAR_TOL: f64 = 1e-12;

impl<'a> Operator<'a> {
    /// `definite` promises the operator is positive definite (selects CG).
    pub fn new(grid: &'a Grid, scale: f64, diag: Vec<f64>, definite: bool) -> Self {
        Operator {
            grid,
            scale,
            diag,
            mask: None,
            definite,
        }
    }

    pub fn masked(mut self, mask: Option<&'a [bool]>) -> Self {
        self.mask = mask;
        self
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        match self.mask {
            None => self.grid.stiffness_into(x, &mut y),
            Some(mask) => {
                let xm: Vec<f64> = x.iter().zip(mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
                self.grid.stiffness_into(&xm, &mut y);
            }
        }
        for i in 0..x.len() {
            y[i] = self.scale * y[i] + self.diag[i] * x[i];
            if let Some(mask) = self.mask {
                if !mask[i] {
                    y[i] = x[i];
                }
            }
        }
        y
    }

    fn full_diagonal(&self) -> Vec<f64> {
        let k = self.grid.stiffness_diagonal();
        (0..k.len())
            .map(|i| match self.mask {
                Some(m) if !m[i] => 1.0,
                _ => self.scale * k[i] + self.diag[i],
            })
            .collect()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.grid.is_banded() {
            let diag = self.full_diagonal();
            let mut off: Vec<f64> = self
                .grid
                .stiffness_offdiagonal()
                .into_iter()
                .map(|c| c * self.scale)
                .collect();
            if let Some(mask) = self.mask {
                for (i, o) in off.iter_mut().enumerate() {
                    if !mask[i] || !mask[i + 1] {
                        *o = 0.0;
                    }
                }
            }
            return Tridiagonal::new(off.clone(), diag, off).solve(b);
        }
        let diag = self.full_diagonal();
        if self.definite {
            pcg(|x| self.apply(x), &diag, b, LINEAR_TOL, 20 * b.len() + 100)
        } else {
            let precond: Vec<f64> = diag.iter().map(|d| d.abs().max(1e-300)).collect();
            minres(|x| self.apply(x), &precond, b, LINEAR_TOL, 20 * b.len() + 100)
        }
    }

    /// Solves `(A + beta·v vᵀ) x = b` by Sherman–Morrison.
    pub fn solve_rank_one(&self, beta: f64, v: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let y = self.solve(b)?;
        if beta == 0.0 {
            return Ok(y);
        }
        let z = self.solve(v)?;
        let denom = 1.0 + beta * dot(v, &z);
        if denom.abs() < 1e-14 * (1.0 + (beta * dot(v, &z)).abs()) {
            return Err(Error::degenerate("rank-one solve", "singular update"));
        }
        let c = beta * dot(v, &y) / denom;
        Ok(y.iter().zip(&z).map(|(yi, zi)| yi - c * zi).collect())
    }
}

/// Jacobi-preconditioned conjugate gradients.
pub(crate) fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::degenerate(
                "conjugate gradients",
                "operator not positive definite",
            ));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        z.iter_mut().zip(&r).zip(diag).for_each(|((z, r), d)| *z = r / d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::no_convergence(
        "conjugate gradients",
        format!("relative residual above {tol:e} after {max_iter} iterations"),
    ))
}

/// Preconditioned MINRES for symmetric indefinite systems; `precond` is a
/// positive diagonal.
pub(crate) fn minres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let minv = |r: &[f64]| -> Vec<f64> { r.iter().zip(precond).map(|(r, d)| r / d).collect() };
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = minv(&r1);
    let beta1 = dot(&r1, &y).sqrt();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|t| s * t).collect();
        y = apply(&v);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y);
        y = minv(&r2);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w);
        w = (0..n)
            .map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma)
            .collect();
        axpy(phi, &w, &mut x);
        if phibar <= tol * beta1 || beta == 0.0 {
            return Ok(x);
        }
    }
    // The recurrence estimate can stall near roundoff; accept if the true residual is fine.
    let r = apply(&x);
    let res = r.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if res <= 1e3 * tol * bnorm {
        return Ok(x);
    }
    Err(Error::no_convergence(
        "MINRES",
        format!("relative residual {:.3e} after {max_iter} iterations", res / bnorm),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn tridiagonal_with_pivoting() {
        // Zero leading diagonal forces a row swap.
        let t = Tridiagonal::new(vec![1.0, 1.0], vec![0.0, 2.0, -3.0], vec![1.0, 4.0]);
        let x_true = [1.0, -2.0, 0.5];
        let b = [
            0.0 * 1.0 + 1.0 * -2.0,
            1.0 * 1.0 + 2.0 * -2.0 + 4.0 * 0.5,
            1.0 * -2.0 + -3.0 * 0.5,
        ];
        let x = t.solve(&b).unwrap();
        for (a, b) in x.iter().zip(x_true) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn check_solve(grid: &Grid, shift: f64, definite: bool) {
        let n = grid.len();
        let diag: Vec<f64> = grid.weights().iter().map(|w| shift * w).collect();
        let op = Operator::new(grid, 1.0, diag, definite);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let x = op.solve(&b).unwrap();
        let r = op.apply(&x);
        let err = r.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * norm(&b), "residual {err}");
    }

    #[test]
    fn solves_on_every_layout() {
        let g1 = Grid::new(GridSpec::tensor(1, 1.0, 41)).unwrap();
        let g2 = Grid::new(GridSpec::tensor(2, 1.0, 21)).unwrap();
        let g3 = Grid::new(GridSpec::tensor(3, 1.0, 13)).unwrap();
        let gr = Grid::new(GridSpec::radial(3, 1.0, 41)).unwrap();
        for g in [&g1, &g2, &g3, &gr] {
            check_solve(g, 1.0, true);
            // Shift between the first eigenvalues makes the operator indefinite.
            check_solve(g, -15.0, false);
        }
    }

    #[test]
    fn sherman_morrison() {
        let g = Grid::new(GridSpec::tensor(2, 1.0, 15)).unwrap();
        let n = g.len();
        let op = Operator::new(&g, 1.0, g.weights().to_vec(), true);
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let x = op.solve_rank_one(2.5, &v, &b).unwrap();
        let mut r = op.apply(&x);
        axpy(2.5 * dot(&v, &x), &v, &mut r);
        let err = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn masked_rows_are_identity() {
        let g = Grid::new(GridSpec::tensor(2, 1.0, 11)).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|i| g.radius(i) < 0.5).collect();
        let op = Operator::new(&g, 1.0, vec![0.0; g.len()], true).masked(Some(&mask));
        let b = vec![1.0; g.len()];
        let x = op.solve(&b).unwrap();
        for i in 0..g.len() {
            if !mask[i] {
                assert!((x[i] - 1.0).abs() < 1e-9);
            }
        }
    }
}
