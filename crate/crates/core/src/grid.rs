//! Finite-difference discretization of the truncation domain.
//!
//! Two layouts are supported:
//!
//! * `Tensor`: the box `(-L, L)^dim` for `dim` in 1..=3, `n` nodes per axis
//!   including the two boundary nodes, unknowns on the `(n-2)^dim` interior
//!   nodes, lumped quadrature weight `h^dim` per node.
//! * `Radial`: radially symmetric fields on the ball of radius `L` in
//!   `R^dim`, `dim >= 3`. Unknowns sit at `r_i = i h` for `i = 0..n-1`
//!   (the origin included, `r = L` carries the Dirichlet zero). The
//!   stiffness form is the conservative flux form of `-r^{1-N}(r^{N-1}u')'`
//!   with zero flux through the origin, and the quadrature weights are the
//!   measures of the dual shells `[r_i - h/2, r_i + h/2]`, the last one
//!   closed at `r = L`, so that constants integrate to the ball volume.
//!
//! In both layouts the discrete Dirichlet form is `u^T K v` for a symmetric
//! stiffness matrix `K`, the discrete Laplacian is `W^{-1} K u` with `W` the
//! diagonal weight matrix, and summation by parts holds exactly.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Tensor,
    Radial,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tensor" => Ok(Mode::Tensor),
            "radial" => Ok(Mode::Radial),
            other => Err(Error::param(format!("unknown grid mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Tensor => "tensor",
            Mode::Radial => "radial",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub mode: Mode,
    pub half_length: f64,
    pub nodes_per_axis: usize,
}

impl GridSpec {
    pub fn tensor(dim: usize, half_length: f64, nodes_per_axis: usize) -> Self {
        GridSpec {
            dim,
            mode: Mode::Tensor,
            half_length,
            nodes_per_axis,
        }
    }

    pub fn radial(dim: usize, radius: f64, nodes: usize) -> Self {
        GridSpec {
            dim,
            mode: Mode::Radial,
            half_length: radius,
            nodes_per_axis: nodes,
        }
    }

    pub fn spacing(&self) -> f64 {
        let n = self.nodes_per_axis as f64;
        match self.mode {
            Mode::Tensor => 2.0 * self.half_length / (n - 1.0),
            Mode::Radial => self.half_length / (n - 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes_per_axis;
        if n < 9 {
            return Err(Error::InvalidGrid(format!("nodes_per_axis = {n} < 9")));
        }
        if n.is_multiple_of(2) && self.mode == Mode::Tensor {
            return Err(Error::InvalidGrid(format!(
                "nodes_per_axis = {n} is even; the origin must be a node"
            )));
        }
        if !(self.half_length > 0.0) || !self.half_length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half_length = {} must be positive",
                self.half_length
            )));
        }
        match self.mode {
            Mode::Tensor if !(1..=3).contains(&self.dim) => Err(Error::InvalidGrid(format!(
                "tensor grids support dim 1..=3, got {}",
                self.dim
            ))),
            Mode::Radial if self.dim < 3 => Err(Error::InvalidGrid(format!(
                "radial grids need dim >= 3, got {}",
                self.dim
            ))),
            _ => Ok(()),
        }
    }

    fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.dim.hash(&mut hasher);
        (self.mode == Mode::Radial).hash(&mut hasher);
        self.half_length.to_bits().hash(&mut hasher);
        self.nodes_per_axis.hash(&mut hasher);
        hasher.finish()
    }
}

/// Surface area of the unit sphere in `R^dim`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Nodal scalar function on the interior nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid_id: u64,
    values: Vec<f64>,
}

impl Field {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            grid_id: self.grid_id,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    id: u64,
    h: f64,
    /// Unknowns per axis (tensor) or along the radius (radial).
    axis: usize,
    len: usize,
    weights: Vec<f64>,
    /// Node coordinates, `coord_dim` entries per node.
    points: Vec<f64>,
    coord_dim: usize,
    /// Radial mode: flux coefficient between node `i` and `i + 1`.
    faces: Vec<f64>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let h = spec.spacing();
        let n = spec.nodes_per_axis;
        let id = spec.fingerprint();
        match spec.mode {
            Mode::Tensor => {
                let m = n - 2;
                let dim = spec.dim;
                let len = m.pow(dim as u32);
                let center = (m as f64 - 1.0) / 2.0;
                let mut points = Vec::with_capacity(len * dim);
                for idx in 0..len {
                    let mut rest = idx;
                    for _ in 0..dim {
                        let k = rest % m;
                        rest /= m;
                        // (k - center) is an exact integer, so mirrored nodes are exact negatives.
                        points.push((k as f64 - center) * h);
                    }
                }
                Ok(Grid {
                    weights: vec![h.powi(dim as i32); len],
                    spec,
                    id,
                    h,
                    axis: m,
                    len,
                    points,
                    coord_dim: dim,
                    faces: Vec::new(),
                })
            }
            Mode::Radial => {
                let len = n - 1;
                let dim = spec.dim as i32;
                let omega = unit_sphere_area(spec.dim);
                let ball = |r: f64| omega * r.powi(dim) / dim as f64;
                let radius = spec.half_length;
                let points: Vec<f64> = (0..len).map(|i| i as f64 * h).collect();
                let weights = (0..len)
                    .map(|i| {
                        let r = points[i];
                        let inner = if i == 0 { 0.0 } else { ball(r - 0.5 * h) };
                        let outer = if i + 1 == len { ball(radius) } else { ball(r + 0.5 * h) };
                        outer - inner
                    })
                    .collect();
                let faces = (0..len)
                    .map(|i| omega * ((i as f64 + 0.5) * h).powi(dim - 1) / h)
                    .collect();
                Ok(Grid {
                    spec,
                    id,
                    h,
                    axis: len,
                    len,
                    weights,
                    points,
                    coord_dim: 1,
                    faces,
                })
            }
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn mode(&self) -> Mode {
        self.spec.mode
    }

    /// Ambient dimension N.
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axis_len(&self) -> usize {
        self.axis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinates of node `i` (`[r]` in radial mode).
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.coord_dim..(i + 1) * self.coord_dim]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.point(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// True when the stiffness matrix is tridiagonal (1D tensor or radial).
    pub fn is_banded(&self) -> bool {
        self.spec.mode == Mode::Radial || self.spec.dim == 1
    }

    pub fn zeros(&self) -> Field {
        Field {
            grid_id: self.id,
            values: vec![0.0; self.len],
        }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<Field> {
        if values.len() != self.len {
            return Err(Error::GridMismatch {
                grid: self.id,
                field_grid: self.id,
                expected: self.len,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("field value at node {i} is not finite")));
        }
        Ok(Field {
            grid_id: self.id,
            values,
        })
    }

    pub(crate) fn wrap(&self, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), self.len);
        Field {
            grid_id: self.id,
            values,
        }
    }

    pub fn sample(&self, mut f: impl FnMut(&[f64]) -> f64) -> Field {
        let values = (0..self.len).map(|i| f(self.point(i))).collect();
        self.wrap(values)
    }

    pub fn check(&self, u: &Field) -> Result<()> {
        if u.grid_id != self.id || u.values.len() != self.len {
            return Err(Error::GridMismatch {
                grid: self.id,
                field_grid: u.grid_id,
                expected: self.len,
                got: u.values.len(),
            });
        }
        Ok(())
    }

    /// `out = K u`, the stiffness matrix applied to nodal values.
    pub(crate) fn stiffness_into(&self, u: &[f64], out: &mut [f64]) {
        match self.spec.mode {
            Mode::Radial => {
                let c = &self.faces;
                let n = self.len;
                for i in 0..n {
                    let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                    let mut s = c[i] * (u[i] - right);
                    if i > 0 {
                        s += c[i - 1] * (u[i] - u[i - 1]);
                    }
                    out[i] = s;
                }
            }
            Mode::Tensor => {
                let m = self.axis;
                let dim = self.spec.dim;
                let scale = self.h.powi(dim as i32 - 2);
                let mut stride = 1;
                out.iter_mut().zip(u).for_each(|(o, &v)| *o = 2.0 * dim as f64 * v);
                for _ in 0..dim {
                    for (i, o) in out.iter_mut().enumerate() {
                        let k = (i / stride) % m;
                        if k > 0 {
                            *o -= u[i - stride];
                        }
                        if k + 1 < m {
                            *o -= u[i + stride];
                        }
                    }
                    stride *= m;
                }
                out.iter_mut().for_each(|o| *o *= scale);
            }
        }
    }

    pub(crate) fn stiffness(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.stiffness_into(u, &mut out);
        out
    }

    /// Diagonal of the stiffness matrix.
    pub(crate) fn stiffness_diagonal(&self) -> Vec<f64> {
        match self.spec.mode {
            Mode::Radial => (0..self.len)
                .map(|i| self.faces[i] + if i > 0 { self.faces[i - 1] } else { 0.0 })
                .collect(),
            Mode::Tensor => {
                let dim = self.spec.dim as i32;
                vec![2.0 * dim as f64 * self.h.powi(dim - 2); self.len]
            }
        }
    }

    /// Off-diagonal of the stiffness matrix for banded grids: entry `i`
    /// couples node `i` and `i + 1`.
    pub(crate) fn stiffness_offdiagonal(&self) -> Vec<f64> {
        debug_assert!(self.is_banded());
        match self.spec.mode {
            Mode::Radial => self.faces[..self.len - 1].iter().map(|c| -c).collect(),
            Mode::Tensor => vec![-1.0 / self.h; self.len - 1],
        }
    }

    /// Sums `term(i)` over all nodes. Tensor grids pair each node with its
    /// point reflection first, so odd integrands cancel exactly.
    pub(crate) fn sum(&self, term: impl Fn(usize) -> f64) -> f64 {
        match self.spec.mode {
            Mode::Radial => (0..self.len).map(term).sum(),
            Mode::Tensor => {
                let n = self.len;
                let mut s = 0.0;
                for i in 0..n / 2 {
                    s += term(i) + term(n - 1 - i);
                }
                if n % 2 == 1 {
                    s += term(n / 2);
                }
                s
            }
        }
    }
}

/// Builds the grid for `spec`.
pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    Grid::new(spec)
}

/// Discrete `-Δu`.
pub fn laplacian_apply(grid: &Grid, u: &Field) -> Result<Field> {
    grid.check(u)?;
    let mut out = grid.stiffness(&u.values);
    out.iter_mut().zip(&grid.weights).for_each(|(o, w)| *o /= w);
    Ok(grid.wrap(out))
}

pub fn integrate(grid: &Grid, w: &Field) -> Result<f64> {
    grid.check(w)?;
    Ok(grid.sum(|i| grid.weights[i] * w.values[i]))
}

/// Discrete `∫ ∇u·∇v`.
pub fn inner_dirichlet(grid: &Grid, u: &Field, v: &Field) -> Result<f64> {
    grid.check(u)?;
    grid.check(v)?;
    Ok(dirichlet(grid, &u.values, &v.values))
}

pub(crate) fn dirichlet(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    match grid.spec.mode {
        // Sum over edges of the flux form; symmetric in (u, v) by construction.
        Mode::Radial => {
            let n = grid.len;
            (0..n)
                .map(|i| {
                    let (du, dv) = if i + 1 < n {
                        (u[i] - u[i + 1], v[i] - v[i + 1])
                    } else {
                        (u[i], v[i])
                    };
                    grid.faces[i] * du * dv
                })
                .sum()
        }
        Mode::Tensor => {
            let m = grid.axis;
            let dim = grid.spec.dim;
            let scale = grid.h.powi(dim as i32 - 2);
            let mut total = 0.0;
            let mut stride = 1;
            for _ in 0..dim {
                for i in 0..grid.len {
                    let k = (i / stride) % m;
                    // Edge to the lower neighbour (or the boundary).
                    let (du, dv) = if k > 0 {
                        (u[i] - u[i - stride], v[i] - v[i - stride])
                    } else {
                        (u[i], v[i])
                    };
                    total += du * dv;
                    if k + 1 == m {
                        total += u[i] * v[i];
                    }
                }
                stride *= m;
            }
            total * scale
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Grid {
        Grid::new(GridSpec::tensor(1, 0.5, n)).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Grid::new(GridSpec::tensor(1, 1.0, 10)).is_err());
        assert!(Grid::new(GridSpec::tensor(1, 1.0, 7)).is_err());
        assert!(Grid::new(GridSpec::tensor(1, 0.0, 11)).is_err());
        assert!(Grid::new(GridSpec::tensor(1, -1.0, 11)).is_err());
        assert!(Grid::new(GridSpec::tensor(4, 1.0, 11)).is_err());
        assert!(Grid::new(GridSpec::radial(2, 1.0, 11)).is_err());
    }

    #[test]
    fn one_dimensional_layout() {
        let g = line(11);
        assert_eq!(g.len(), 9);
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        for i in 1..g.len() {
            assert!((g.point(i)[0] - g.point(i - 1)[0] - 0.1).abs() < 1e-14);
        }
        assert_eq!(g.point(4)[0], 0.0);
    }

    #[test]
    fn three_dimensional_count() {
        let g = Grid::new(GridSpec::tensor(3, 2.0, 33)).unwrap();
        assert_eq!(g.len(), 29791);
    }

    #[test]
    fn radial_ball_volume() {
        let g = Grid::new(GridSpec::radial(3, 3.0, 301)).unwrap();
        let one = g.sample(|_| 1.0);
        let vol = integrate(&g, &one).unwrap();
        let exact = 4.0 * PI * 27.0 / 3.0;
        assert!((vol - exact).abs() / exact < 1e-3, "{vol} vs {exact}");
    }

    #[test]
    fn tensor_volume_is_interior_volume() {
        let g = Grid::new(GridSpec::tensor(3, 1.0, 17)).unwrap();
        let one = g.sample(|_| 1.0);
        let vol = integrate(&g, &one).unwrap();
        let interior = (15.0 * g.spacing()).powi(3);
        assert!((vol - interior).abs() < 1e-12);
        // O(h) away from the box volume.
        assert!((vol - 8.0).abs() < 8.0 * 3.0 * g.spacing());
    }

    #[test]
    fn odd_integrand_vanishes_exactly() {
        for dim in 1..=3 {
            let g = Grid::new(GridSpec::tensor(dim, 1.5, 15)).unwrap();
            let w = g.sample(|x| x[0] * (-x.iter().map(|t| t * t).sum::<f64>()).exp());
            assert_eq!(integrate(&g, &w).unwrap(), 0.0);
        }
    }

    #[test]
    fn sine_is_an_approximate_eigenfunction() {
        let g = line(201);
        let u = g.sample(|x| (PI * (x[0] + 0.5)).sin());
        let lu = laplacian_apply(&g, &u).unwrap();
        for (a, b) in lu.values().iter().zip(u.values()) {
            assert!((a - PI * PI * b).abs() <= 1e-3 * PI * PI * b.abs());
        }
        let z = laplacian_apply(&g, &g.zeros()).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn radial_sinc_is_an_approximate_eigenfunction() {
        let g = Grid::new(GridSpec::radial(3, 1.0, 401)).unwrap();
        let u = g.sample(|x| {
            let r = x[0];
            if r == 0.0 {
                PI
            } else {
                (PI * r).sin() / r
            }
        });
        let lu = laplacian_apply(&g, &u).unwrap();
        for i in 0..g.len() {
            if g.point(i)[0] > 0.9 {
                break;
            }
            let expect = PI * PI * u.values()[i];
            assert!(
                (lu.values()[i] - expect).abs() <= 2e-3 * expect.abs(),
                "node {i}: {} vs {expect}",
                lu.values()[i]
            );
        }
    }

    #[test]
    fn dirichlet_of_sine() {
        let g = line(201);
        let u = g.sample(|x| (PI * (x[0] + 0.5)).sin());
        let d = inner_dirichlet(&g, &u, &u).unwrap();
        let exact = PI * PI / 2.0;
        assert!((d - exact).abs() / exact < 5e-3);
        assert_eq!(inner_dirichlet(&g, &g.zeros(), &u).unwrap(), 0.0);
        let d2 = inner_dirichlet(&g, &u.scaled(2.0), &u).unwrap();
        assert!((d2 - 2.0 * d).abs() <= 1e-14 * d);
    }

    #[test]
    fn smallest_eigenvalue_matches_classical_formula() {
        let g = line(41);
        let h = g.spacing();
        let exact = 4.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
        // Inverse power iteration with the tridiagonal solver.
        let diag: Vec<f64> = g.stiffness_diagonal();
        let off = g.stiffness_offdiagonal();
        let tri = crate::linalg::Tridiagonal::new(off.clone(), diag, off);
        let mut x = vec![1.0; g.len()];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let mx: Vec<f64> = x.iter().zip(g.weights()).map(|(a, w)| a * w).collect();
            let y = tri.solve(&mx).unwrap();
            let num = dirichlet(&g, &y, &y);
            let den = g.sum(|i| g.weights()[i] * y[i] * y[i]);
            lambda = num / den;
            let s = den.sqrt();
            x = y.iter().map(|v| v / s).collect();
        }
        assert!((lambda - exact).abs() <= 1e-10 * exact, "{lambda} vs {exact}");
    }

    #[test]
    fn wrong_grid_is_rejected() {
        let a = line(11);
        let b = line(13);
        assert!(matches!(
            laplacian_apply(&a, &b.zeros()),
            Err(Error::GridMismatch { .. })
        ));
        assert!(a.field(vec![0.0; 3]).is_err());
        assert!(a.field(vec![f64::NAN; 9]).is_err());
    }
}
