//! Problem data: the well `V`, weights `f` and `g`, the set Ω and the
//! parameters `(a, p, λ, μ)`, plus the canonical test problems and the
//! key-value config format.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridSpec, Mode};

/// Coefficient functions of `x`, evaluated through `r² = |x|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Constant {
        value: f64,
    },
    /// `amp · exp(-|x|²/width)`
    Gaussian {
        amp: f64,
        width: f64,
    },
    /// `amp · exp(-|x|²/width) · (kappa - |x|²)`
    Bump {
        amp: f64,
        width: f64,
        kappa: f64,
    },
}

impl Sampler {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|t| t * t).sum();
        match *self {
            Sampler::Constant { value } => value,
            Sampler::Gaussian { amp, width } => amp * (-r2 / width).exp(),
            Sampler::Bump { amp, width, kappa } => amp * (-r2 / width).exp() * (kappa - r2),
        }
    }

    /// Splits a bump into `base · (kappa - s)` with `s = |x|²`.
    pub fn bump_parts(&self) -> Option<(Sampler, f64)> {
        match *self {
            Sampler::Bump { amp, width, kappa } => Some((Sampler::Gaussian { amp, width }, kappa)),
            _ => None,
        }
    }
}

/// The bounded set Ω where the well vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { radius: f64 },
    Cube { half_side: f64 },
}

impl Shape {
    /// Distance outside Ω per axis (cube) or radially (ball).
    fn excess(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match *self {
            Shape::Ball { radius } => {
                let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
                out.push((r - radius).max(0.0));
            }
            Shape::Cube { half_side } => {
                out.extend(x.iter().map(|t| (t.abs() - half_side).max(0.0)));
            }
        }
    }

    /// Strict interior test; boundary nodes carry the Dirichlet zero of H¹₀(Ω).
    fn contains(&self, x: &[f64], h: f64) -> bool {
        let slack = 1e-9 * h;
        match *self {
            Shape::Ball { radius } => x.iter().map(|t| t * t).sum::<f64>().sqrt() < radius - slack,
            Shape::Cube { half_side } => x.iter().all(|t| t.abs() < half_side - slack),
        }
    }

    fn extent(&self) -> f64 {
        match *self {
            Shape::Ball { radius } => radius,
            Shape::Cube { half_side } => half_side,
        }
    }
}

/// Profile of `V` as a function of the excess `d` outside Ω, summed over
/// axes for cubes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Well {
    /// `scale · d²`
    Quadratic { scale: f64 },
    /// `min(slope · d, cap)`
    Ramp { slope: f64, cap: f64 },
    /// `value` everywhere, Ω included. Only useful to exercise the validator.
    Constant { value: f64 },
}

impl Well {
    fn profile(&self, d: f64) -> f64 {
        match *self {
            Well::Quadratic { scale } => scale * d * d,
            Well::Ramp { slope, cap } => (slope * d).min(cap),
            Well::Constant { value } => value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Canonical {
    #[serde(rename = "TP-CUBE-P5")]
    CubeP5,
    #[serde(rename = "TP-BALL-P5")]
    BallP5,
    #[serde(rename = "TP-BALL-P3-NEG")]
    BallP3Neg,
    #[serde(rename = "TP-BALL-P3-POS")]
    BallP3Pos,
}

impl Canonical {
    pub const ALL: [Canonical; 4] = [
        Canonical::CubeP5,
        Canonical::BallP5,
        Canonical::BallP3Neg,
        Canonical::BallP3Pos,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Canonical::CubeP5 => "TP-CUBE-P5",
            Canonical::BallP5 => "TP-BALL-P5",
            Canonical::BallP3Neg => "TP-BALL-P3-NEG",
            Canonical::BallP3Pos => "TP-BALL-P3-POS",
        }
    }
}

impl std::str::FromStr for Canonical {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Canonical::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// `g` amplitude for the p = 5 problems. At a = 1 it keeps ρ_a large
/// enough for a positive sphere minimum at λ₁ + δ_a/2 and brings the
/// mountain-pass solutions down to moderate norms.
pub const P5_G_AMP: f64 = 8.0;
/// `g` amplitudes for the sub-quartic ball problems, sized so that Γ₃ is
/// about 5 and solutions have unit-order norms and energies. At p = 3 the
/// amplitude is a pure rescaling (g ↦ cg, a ↦ c²a, u ↦ u/c).
pub const P3_NEG_G_AMP: f64 = 3000.0;
pub const P3_POS_G_AMP: f64 = 250.0;
/// κ values on either side of the sign threshold of ∫gφ₁³ (≈ 0.192 on the
/// default ball grid).
pub const P3_KAPPA_NEG: f64 = 0.15;
pub const P3_KAPPA_POS: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub grid: GridSpec,
    pub a: f64,
    pub p: f64,
    pub lambda: f64,
    pub mu: f64,
    pub omega: Shape,
    pub well: Well,
    pub f: Sampler,
    pub g: Sampler,
    pub c0: f64,
    pub c_star: Option<f64>,
    pub r_star: Option<f64>,
}

/// Canonical test problem by name.
pub fn canonical_problem(name: &str) -> Result<ProblemSpec> {
    Ok(ProblemSpec::canonical(name.parse()?))
}

impl ProblemSpec {
    pub fn canonical(which: Canonical) -> Self {
        let well = Well::Ramp {
            slope: 1.0e4,
            cap: 1.0e3,
        };
        let f = Sampler::Gaussian { amp: 1.0, width: 1.0 };
        let ball = |p: f64, amp: f64, kappa: f64| ProblemSpec {
            name: Some(which.name().to_string()),
            grid: GridSpec::radial(3, 3.0, 1201),
            a: 1.0,
            p,
            lambda: 0.0,
            mu: 1000.0,
            omega: Shape::Ball { radius: 1.0 },
            well,
            f,
            g: Sampler::Bump { amp, width: 4.0, kappa },
            c0: 0.25,
            c_star: Some(1.0),
            r_star: Some(1.5),
        };
        match which {
            Canonical::CubeP5 => ProblemSpec {
                grid: GridSpec::tensor(3, 2.0, 33),
                omega: Shape::Cube { half_side: 1.0 },
                ..ball(5.0, P5_G_AMP, 1.0)
            },
            Canonical::BallP5 => ball(5.0, P5_G_AMP, 1.0),
            Canonical::BallP3Neg => ball(3.0, P3_NEG_G_AMP, P3_KAPPA_NEG),
            Canonical::BallP3Pos => ball(3.0, P3_POS_G_AMP, P3_KAPPA_POS),
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Critical Sobolev exponent 2N/(N-2), infinite for N ≤ 2.
    pub fn critical_exponent(&self) -> f64 {
        let n = self.dim() as f64;
        if n <= 2.0 {
            f64::INFINITY
        } else {
            2.0 * n / (n - 2.0)
        }
    }

    pub fn check_parameters(&self) -> Result<()> {
        self.grid.validate()?;
        let finite = [self.a, self.p, self.lambda, self.mu, self.c0];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("parameters must be finite"));
        }
        if !(self.a > 0.0) {
            return Err(Error::param(format!("a = {} must be positive", self.a)));
        }
        if !(self.p > 2.0 && self.p < self.critical_exponent()) {
            return Err(Error::param(format!(
                "p = {} must lie in (2, {})",
                self.p,
                self.critical_exponent()
            )));
        }
        if self.mu < 0.0 {
            return Err(Error::param(format!("mu = {} must be nonnegative", self.mu)));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::param(format!("c0 = {} must be positive", self.c0)));
        }
        Ok(())
    }

    /// Replaces κ in a bump-shaped `g`.
    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        match &mut self.g {
            Sampler::Bump { kappa: k, .. } => {
                *k = kappa;
                Ok(self)
            }
            _ => Err(Error::param("g is not of the form base·(kappa - |x|²)")),
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        self.g.bump_parts().map(|(_, k)| k)
    }

    /// Serializes to the key-value config format.
    pub fn to_config(&self) -> String {
        let mut s = String::new();
        if let Some(name) = &self.name {
            let _ = writeln!(s, "problem.name = {name}");
        }
        let _ = writeln!(s, "dim = {}", self.grid.dim);
        let _ = writeln!(s, "mode = {}", self.grid.mode);
        let _ = writeln!(s, "L = {}", self.grid.half_length);
        let _ = writeln!(s, "n = {}", self.grid.nodes_per_axis);
        let _ = writeln!(s, "a = {}", self.a);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "mu = {}", self.mu);
        match self.omega {
            Shape::Ball { radius } => {
                let _ = writeln!(s, "omega.shape = ball\nomega.size = {radius}");
            }
            Shape::Cube { half_side } => {
                let _ = writeln!(s, "omega.shape = cube\nomega.size = {half_side}");
            }
        }
        match self.well {
            Well::Quadratic { scale } => {
                let _ = writeln!(s, "V.profile = quadratic\nV.scale = {scale}");
            }
            Well::Ramp { slope, cap } => {
                let _ = writeln!(s, "V.profile = ramp\nV.slope = {slope}\nV.cap = {cap}");
            }
            Well::Constant { value } => {
                let _ = writeln!(s, "V.profile = constant\nV.value = {value}");
            }
        }
        write_sampler(&mut s, "f", &self.f);
        write_sampler(&mut s, "g", &self.g);
        let _ = writeln!(s, "c0 = {}", self.c0);
        if let Some(c) = self.c_star {
            let _ = writeln!(s, "c_star = {c}");
        }
        if let Some(r) = self.r_star {
            let _ = writeln!(s, "R_star = {r}");
        }
        s
    }

    /// Parses the key-value config format. `problem.name`, if present, seeds
    /// the canonical defaults that the remaining keys override.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: idx + 1,
                detail: format!("expected `key = value`, got `{line}`"),
            })?;
            entries.push((idx + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let mut spec = match entries.iter().find(|(_, k, _)| k == "problem.name") {
            Some((line, _, v)) => {
                let which: Canonical = v.parse().map_err(|_| Error::Config {
                    line: *line,
                    detail: format!("unknown canonical problem `{v}`"),
                })?;
                ProblemSpec::canonical(which)
            }
            None => ProblemSpec {
                name: None,
                ..ProblemSpec::canonical(Canonical::BallP5)
            },
        };
        for (line, key, value) in &entries {
            spec.apply_key(key, value).map_err(|e| Error::Config {
                line: *line,
                detail: e.to_string(),
            })?;
        }
        spec.check_parameters()?;
        Ok(spec)
    }

    fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::param(format!("`{key}` expects a number, got `{value}`")))
        };
        let int = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::param(format!("`{key}` expects an integer, got `{value}`")))
        };
        match key {
            "problem.name" => self.name = Some(value.to_string()),
            "dim" => self.grid.dim = int()?,
            "mode" => self.grid.mode = value.parse::<Mode>()?,
            "L" => self.grid.half_length = num()?,
            "n" => self.grid.nodes_per_axis = int()?,
            "a" => self.a = num()?,
            "p" => self.p = num()?,
            "lambda" => self.lambda = num()?,
            "mu" => self.mu = num()?,
            "c0" => self.c0 = num()?,
            "c_star" => self.c_star = Some(num()?),
            "R_star" => self.r_star = Some(num()?),
            "omega.shape" => {
                let size = self.omega.extent();
                self.omega = match value {
                    "ball" => Shape::Ball { radius: size },
                    "cube" => Shape::Cube { half_side: size },
                    _ => return Err(Error::param(format!("unknown omega.shape `{value}`"))),
                }
            }
            "omega.size" => {
                let v = num()?;
                match &mut self.omega {
                    Shape::Ball { radius } => *radius = v,
                    Shape::Cube { half_side } => *half_side = v,
                }
            }
            "V.profile" => {
                self.well = match value {
                    "quadratic" => Well::Quadratic { scale: 1.0 },
                    "ramp" => Well::Ramp {
                        slope: 1.0e4,
                        cap: 1.0e3,
                    },
                    "constant" => Well::Constant { value: 0.0 },
                    _ => return Err(Error::param(format!("unknown V.profile `{value}`"))),
                }
            }
            "V.scale" | "V.slope" | "V.cap" | "V.value" => {
                let v = num()?;
                match (&mut self.well, key) {
                    (Well::Quadratic { scale }, "V.scale") => *scale = v,
                    (Well::Ramp { slope, .. }, "V.slope") => *slope = v,
                    (Well::Ramp { cap, .. }, "V.cap") => *cap = v,
                    (Well::Constant { value }, "V.value") => *value = v,
                    _ => return Err(Error::param(format!("`{key}` does not apply to the V profile"))),
                }
            }
            _ if key.starts_with("f.") => set_sampler(&mut self.f, &key[2..], value)?,
            _ if key.starts_with("g.") => set_sampler(&mut self.g, &key[2..], value)?,
            _ => return Err(Error::param(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

fn write_sampler(s: &mut String, prefix: &str, sampler: &Sampler) {
    match *sampler {
        Sampler::Constant { value } => {
            let _ = writeln!(s, "{prefix}.kind = constant\n{prefix}.value = {value}");
        }
        Sampler::Gaussian { amp, width } => {
            let _ = writeln!(
                s,
                "{prefix}.kind = gaussian\n{prefix}.amp = {amp}\n{prefix}.width = {width}"
            );
        }
        Sampler::Bump { amp, width, kappa } => {
            let _ = writeln!(
                s,
                "{prefix}.kind = bump\n{prefix}.amp = {amp}\n{prefix}.width = {width}\n{prefix}.kappa = {kappa}"
            );
        }
    }
}

fn set_sampler(sampler: &mut Sampler, field: &str, value: &str) -> Result<()> {
    if field == "kind" {
        let (amp, width) = match *sampler {
            Sampler::Constant { value } => (value, 1.0),
            Sampler::Gaussian { amp, width } | Sampler::Bump { amp, width, .. } => (amp, width),
        };
        *sampler = match value {
            "constant" => Sampler::Constant { value: amp },
            "gaussian" => Sampler::Gaussian { amp, width },
            "bump" => Sampler::Bump { amp, width, kappa: 1.0 },
            // exp(-|x|²)(1 - 2|x|²), the sign-changing weight.
            "sign_changing" => Sampler::Bump {
                amp: 2.0,
                width: 1.0,
                kappa: 0.5,
            },
            _ => return Err(Error::param(format!("unknown sampler kind `{value}`"))),
        };
        return Ok(());
    }
    let v: f64 = value
        .parse()
        .map_err(|_| Error::param(format!("`{field}` expects a number, got `{value}`")))?;
    match (sampler, field) {
        (Sampler::Constant { value }, "value") => *value = v,
        (Sampler::Gaussian { amp, .. } | Sampler::Bump { amp, .. }, "amp") => *amp = v,
        (Sampler::Gaussian { width, .. } | Sampler::Bump { width, .. }, "width") => *width = v,
        (Sampler::Bump { kappa, .. }, "kappa") => *kappa = v,
        _ => return Err(Error::param(format!("`{field}` does not apply to this sampler"))),
    }
    Ok(())
}

/// A problem sampled on its grid. Cloning is cheap; parameter changes that
/// leave the coefficient functions alone reuse the samples.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ProblemSpec,
    data: Arc<Sampled>,
}

#[derive(Debug)]
struct Sampled {
    grid: Grid,
    v: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    omega: Vec<bool>,
}

impl Model {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.check_parameters()?;
        let grid = Grid::new(spec.grid.clone())?;
        if let (Shape::Cube { half_side: s }, Mode::Tensor) | (Shape::Ball { radius: s }, Mode::Radial) =
            (spec.omega, grid.mode())
        {
            let k = s / grid.spacing();
            if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "Ω boundary at {s} is not aligned with grid spacing {}",
                    grid.spacing()
                )));
            }
        }
        Ok(Self::sample(spec, grid))
    }

    fn sample(spec: ProblemSpec, grid: Grid) -> Self {
        let n = grid.len();
        let mut v = Vec::with_capacity(n);
        let mut f = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        let mut omega = Vec::with_capacity(n);
        let mut buf = Vec::new();
        let h = grid.spacing();
        for i in 0..n {
            let x = grid.point(i);
            spec.omega.excess(x, &mut buf);
            v.push(buf.iter().map(|d| spec.well.profile(*d)).sum());
            f.push(spec.f.eval(x));
            g.push(spec.g.eval(x));
            omega.push(spec.omega.contains(x, h));
        }
        Model {
            spec,
            data: Arc::new(Sampled { grid, v, f, g, omega }),
        }
    }

    /// Same samples, different scalar parameters.
    pub fn with_params(&self, a: f64, lambda: f64, mu: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.a = a;
        spec.lambda = lambda;
        spec.mu = mu;
        spec.check_parameters()?;
        Ok(Model {
            spec,
            data: Arc::clone(&self.data),
        })
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        self.with_params(a, self.spec.lambda, self.spec.mu)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        self.with_params(self.spec.a, lambda, self.spec.mu)
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        self.with_params(self.spec.a, self.spec.lambda, mu)
    }

    /// Resamples `g` with a new κ; the grid is reused.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let spec = self.spec.clone().with_kappa(kappa)?;
        let grid = self.data.grid.clone();
        Ok(Self::sample(spec, grid))
    }

    pub fn with_g(&self, g: Sampler) -> Self {
        let mut spec = self.spec.clone();
        spec.g = g;
        Self::sample(spec, self.data.grid.clone())
    }

    pub fn with_f(&self, f: Sampler) -> Self {
        let mut spec = self.spec.clone();
        spec.f = f;
        Self::sample(spec, self.data.grid.clone())
    }

    pub fn grid(&self) -> &Grid {
        &self.data.grid
    }

    pub fn v(&self) -> &[f64] {
        &self.data.v
    }

    pub fn f(&self) -> &[f64] {
        &self.data.f
    }

    pub fn g(&self) -> &[f64] {
        &self.data.g
    }

    pub fn omega(&self) -> &[bool] {
        &self.data.omega
    }

    pub fn a(&self) -> f64 {
        self.spec.a
    }

    pub fn p(&self) -> f64 {
        self.spec.p
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn mu(&self) -> f64 {
        self.spec.mu
    }

    /// ‖g‖_∞ over the nodes.
    pub fn g_sup(&self) -> f64 {
        self.g().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Quadrature of the indicator of {V < c₀}.
    pub fn measure_v_below(&self, c0: f64) -> f64 {
        let w = self.grid().weights();
        self.grid().sum(|i| if self.v()[i] < c0 { w[i] } else { 0.0 })
    }

    /// `(∫|h|^q)^{1/q}` by nodal quadrature.
    pub fn lq_norm(&self, h: &[f64], q: f64) -> f64 {
        let w = self.grid().weights();
        self.grid().sum(|i| w[i] * h[i].abs().powf(q)).powf(1.0 / q)
    }

    /// Restricts a field to Ω nodes.
    pub fn restrict_to_omega(&self, u: &Field) -> Field {
        let vals = u
            .values()
            .iter()
            .zip(self.omega())
            .map(|(v, &m)| if m { *v } else { 0.0 })
            .collect();
        self.grid().wrap(vals)
    }
}

/// `⟨u, v⟩_μ = ∫∇u·∇v + μ∫V u v`.
pub fn inner_mu(model: &Model, u: &Field, v: &Field, mu: f64) -> Result<f64> {
    if mu < 0.0 || !mu.is_finite() {
        return Err(Error::param(format!("mu = {mu} must be nonnegative")));
    }
    let grid = model.grid();
    let d = crate::grid::inner_dirichlet(grid, u, v)?;
    let w = grid.weights();
    let (uv, vv, pot) = (u.values(), v.values(), model.v());
    Ok(d + mu * grid.sum(|i| w[i] * pot[i] * uv[i] * vv[i]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: String,
    pub pass: bool,
    /// Node index that witnesses the outcome (a violation or the extremal node).
    pub witness: Option<usize>,
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub measure_v_lt_c0: f64,
    /// Max of |x|^{p-2}g - c*V^{4-p} over nodes with |x| > R*, when checked.
    pub h3_max_violation: Option<f64>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, condition: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Nodewise checks of (V1), (V2), (D1), (D2) and, for N = 3 with p < 4, (H3).
pub fn validate_conditions(model: &Model) -> Result<ValidationReport> {
    let spec = &model.spec;
    let grid = model.grid();
    let (v, f, g, omega) = (model.v(), model.f(), model.g(), model.omega());
    let n = grid.len();
    let mut checks = Vec::new();

    let (vmin_i, vmin) = argmin(v.iter().copied());
    checks.push(ConditionCheck {
        condition: "V>=0".into(),
        pass: vmin >= 0.0,
        witness: Some(vmin_i),
        value: vmin,
        detail: "minimum of V over nodes".into(),
    });

    let measure = model.measure_v_below(spec.c0);
    let total: f64 = grid.weights().iter().sum();
    checks.push(ConditionCheck {
        condition: "V1".into(),
        pass: measure > 0.0 && measure < total,
        witness: (0..n).find(|&i| v[i] < spec.c0),
        value: measure,
        detail: format!("|{{V < {}}}| by quadrature", spec.c0),
    });

    let omega_nodes: Vec<usize> = (0..n).filter(|&i| omega[i]).collect();
    let bad = omega_nodes.iter().copied().find(|&i| v[i] != 0.0);
    checks.push(ConditionCheck {
        condition: "V2".into(),
        pass: !omega_nodes.is_empty() && bad.is_none(),
        witness: bad.or(omega_nodes.first().copied()),
        value: bad.map_or(0.0, |i| v[i]),
        detail: if omega_nodes.is_empty() {
            "Ω contains no grid nodes".into()
        } else if bad.is_some() {
            "V is nonzero at an Ω node".into()
        } else {
            format!("{} Ω nodes, V = 0 on all", omega_nodes.len())
        },
    });

    let (fi, fmax) = argmax(omega_nodes.iter().map(|&i| f[i]));
    checks.push(ConditionCheck {
        condition: "D1".into(),
        pass: fmax > 0.0,
        witness: omega_nodes.get(fi).copied(),
        value: fmax,
        detail: "max of f over Ω nodes".into(),
    });

    let (gi, gmax) = argmax(omega_nodes.iter().map(|&i| g[i]));
    checks.push(ConditionCheck {
        condition: "D2".into(),
        pass: gmax > 0.0,
        witness: omega_nodes.get(gi).copied(),
        value: gmax,
        detail: "max of g over Ω nodes".into(),
    });

    let mut h3 = None;
    if spec.dim() == 3 && spec.p < 4.0 {
        let (c_star, r_star) = match (spec.c_star, spec.r_star) {
            (Some(c), Some(r)) => (c, r),
            _ => {
                return Err(Error::Condition {
                    condition: "H3",
                    detail: "c_star and R_star are required when N = 3 and p < 4".into(),
                })
            }
        };
        let mut worst = f64::NEG_INFINITY;
        let mut witness = None;
        for i in 0..n {
            let r = grid.radius(i);
            if r > r_star {
                let lhs = r.powf(spec.p - 2.0) * g[i];
                let rhs = c_star * v[i].powf(4.0 - spec.p);
                if lhs - rhs > worst {
                    worst = lhs - rhs;
                    witness = Some(i);
                }
            }
        }
        checks.push(ConditionCheck {
            condition: "H3".into(),
            pass: worst <= 0.0,
            witness,
            value: worst,
            detail: format!("max of |x|^(p-2) g - c* V^(4-p) over |x| > {r_star}"),
        });
        h3 = Some(worst);
    }
    Ok(ValidationReport {
        checks,
        measure_v_lt_c0: measure,
        h3_max_violation: h3,
    })
}

fn argmax(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate().fold(
        (0, f64::NEG_INFINITY),
        |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
    )
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    let (i, v) = argmax(it.map(|v| -v));
    (i, -v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Negative,
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaChoice {
    /// κ* with ∫gφ₁^p = 0.
    pub threshold: f64,
    /// A κ on the requested side that keeps g⁺ ≢ 0 on Ω.
    pub kappa: f64,
}

/// κ* = ∫base·s·φ₁^p / ∫base·φ₁^p for `g = base·(κ - s)`.
pub fn kappa_threshold(grid: &Grid, base: &[f64], s: &[f64], phi: &[f64], p: f64) -> Result<f64> {
    let w = grid.weights();
    let pw = |i: usize| phi[i].abs().powf(p);
    let den = grid.sum(|i| w[i] * base[i] * pw(i));
    if !(den > 0.0) {
        return Err(Error::degenerate(
            "tune_g_sign",
            "∫base·φ₁^p is not positive; base must be positive on Ω",
        ));
    }
    Ok(grid.sum(|i| w[i] * base[i] * s[i] * pw(i)) / den)
}

/// Locates the sign threshold of κ ↦ ∫gφ₁^p for a bump-shaped `g` and picks
/// a κ on the requested side.
pub fn tune_g_sign(model: &Model, phi1: &Field, target: Sign) -> Result<KappaChoice> {
    let grid = model.grid();
    grid.check(phi1)?;
    let (base, _) = model
        .spec
        .g
        .bump_parts()
        .ok_or_else(|| Error::param("g is not of the form base·(kappa - |x|²)"))?;
    let b: Vec<f64> = (0..grid.len()).map(|i| base.eval(grid.point(i))).collect();
    let s: Vec<f64> = (0..grid.len()).map(|i| grid.radius(i).powi(2)).collect();
    let threshold = kappa_threshold(grid, &b, &s, phi1.values(), model.p())?;
    // g⁺ ≢ 0 on Ω needs κ above the smallest |x|² among Ω nodes.
    let floor = (0..grid.len())
        .filter(|&i| model.omega()[i])
        .map(|i| s[i])
        .fold(f64::INFINITY, f64::min);
    let kappa = match target {
        Sign::Negative => 0.5 * (threshold + floor),
        Sign::Positive => 2.0 * threshold - floor,
    };
    if !(kappa > floor) {
        return Err(Error::Condition {
            condition: "D2",
            detail: format!("no κ below κ* = {threshold} keeps g positive somewhere on Ω"),
        });
    }
    Ok(KappaChoice { threshold, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_names_round_trip() {
        for c in Canonical::ALL {
            assert_eq!(c.name().parse::<Canonical>().unwrap(), c);
        }
        assert!(matches!(canonical_problem("NOPE"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn canonical_problems_validate() {
        for c in Canonical::ALL {
            let model = Model::new(ProblemSpec::canonical(c)).unwrap();
            let report = validate_conditions(&model).unwrap();
            assert!(report.pass(), "{}: {report:?}", c.name());
            if let Some(v) = report.h3_max_violation {
                assert!(v <= 0.0);
            }
        }
    }

    #[test]
    fn d2_failure_has_witness() {
        let mut spec = ProblemSpec::canonical(Canonical::BallP5);
        spec.grid.nodes_per_axis = 121;
        spec.g = Sampler::Constant { value: -1.0 };
        let model = Model::new(spec).unwrap();
        let report = validate_conditions(&model).unwrap();
        let d2 = report.check("D2").unwrap();
        assert!(!d2.pass);
        assert!(d2.witness.is_some());
    }

    #[test]
    fn v2_failure_on_constant_well() {
        let mut spec = ProblemSpec::canonical(Canonical::BallP5);
        spec.grid.nodes_per_axis = 121;
        spec.well = Well::Constant { value: 1.0 };
        let model = Model::new(spec).unwrap();
        let report = validate_conditions(&model).unwrap();
        assert!(!report.check("V2").unwrap().pass);
    }

    #[test]
    fn h3_needs_constants() {
        let mut spec = ProblemSpec::canonical(Canonical::BallP3Neg);
        spec.grid.nodes_per_axis = 121;
        spec.c_star = None;
        let model = Model::new(spec).unwrap();
        assert!(matches!(
            validate_conditions(&model),
            Err(Error::Condition { condition: "H3", .. })
        ));
    }

    #[test]
    fn config_round_trip() {
        for c in Canonical::ALL {
            let spec = ProblemSpec::canonical(c);
            let text = spec.to_config();
            assert_eq!(ProblemSpec::from_config(&text).unwrap(), spec);
        }
        let spec = ProblemSpec::from_config("problem.name = TP-BALL-P3-NEG\ng.kappa = 0.1\nmu = 10 # shallow").unwrap();
        assert_eq!(spec.kappa(), Some(0.1));
        assert_eq!(spec.mu, 10.0);
        assert!(matches!(
            ProblemSpec::from_config("a = 1\nbogus = 2"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(ProblemSpec::from_config("a = -1").is_err());
        assert!(ProblemSpec::from_config("p = 6").is_err());
    }

    #[test]
    fn omega_alignment_enforced() {
        let mut spec = ProblemSpec::canonical(Canonical::CubeP5);
        spec.grid.nodes_per_axis = 31;
        assert!(matches!(Model::new(spec), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn inner_mu_properties() {
        let mut spec = ProblemSpec::canonical(Canonical::BallP5);
        spec.grid.nodes_per_axis = 121;
        let model = Model::new(spec).unwrap();
        let grid = model.grid();
        let u = grid.sample(|x| (-x[0] * x[0]).exp());
        let inside = model.restrict_to_omega(&u);
        let d = crate::grid::inner_dirichlet(grid, &u, &u).unwrap();
        assert_eq!(inner_mu(&model, &u, &u, 0.0).unwrap(), d);
        let a = inner_mu(&model, &inside, &inside, 1.0).unwrap();
        let b = inner_mu(&model, &inside, &inside, 1e3).unwrap();
        assert_eq!(a, b);
        let c = inner_mu(&model, &u, &u, 1.0).unwrap();
        let e = inner_mu(&model, &u, &u, 2.0).unwrap();
        assert!(e > c && c > d);
        assert!(inner_mu(&model, &u, &u, -1.0).is_err());
    }

    #[test]
    fn kappa_threshold_with_zero_s() {
        let grid = Grid::new(GridSpec::radial(3, 1.0, 51)).unwrap();
        let n = grid.len();
        let phi: Vec<f64> = (0..n).map(|i| 1.0 - grid.radius(i)).collect();
        let k = kappa_threshold(&grid, &vec![1.0; n], &vec![0.0; n], &phi, 3.0).unwrap();
        assert_eq!(k, 0.0);
        assert!(kappa_threshold(&grid, &vec![-1.0; n], &vec![0.0; n], &phi, 3.0).is_err());
    }
}
