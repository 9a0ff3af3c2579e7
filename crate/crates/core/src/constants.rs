//! Closed-form constants and thresholds of the existence theory, evaluated
//! with discrete surrogates: `‖g‖_∞` is the nodal maximum of `|g|`,
//! `|{V < c₀}|` is the quadrature of the indicator and Lebesgue norms use
//! nodal quadrature.
//!
//! `S` is normalized so that `‖u‖_{2*} ≤ S⁻¹‖∇u‖₂` (so `S(3) ≈ 2.3406`).
//! The Caffarelli–Kohn–Nirenberg constant is taken as the Hardy constant
//! `C̄₀ = (2/(N−2))²`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::eigen::{EigenOptions, EigenSet, Spectrum};
use crate::error::{Error, Result};
use crate::functional::abs_pow;
use crate::grid::Field;
use crate::linalg::Operator;
use crate::optim::{descend, Constraint, DescentOptions};
use crate::problem::Model;
use crate::rng;

pub const S_CONVENTION: &str = "||u||_{2*} <= S^{-1} ||grad u||_2";
pub const C_BAR_0_CHOICE: &str = "Hardy constant (2/(N-2))^2";

/// Best Sobolev constant in the normalization `‖u‖_{2*} ≤ S⁻¹‖∇u‖₂`.
pub fn sobolev_constant(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::param(format!("Sobolev constant needs N >= 3, got {n}")));
    }
    let nf = n as f64;
    Ok((PI * nf * (nf - 2.0)).sqrt() * (gamma(nf / 2.0) / gamma(nf)).powf(1.0 / nf))
}

pub fn hardy_constant(n: usize) -> f64 {
    (2.0 / (n as f64 - 2.0)).powi(2)
}

pub fn critical_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// Lower estimate of Γ_p with its maximizer (normalized to `∫|∇u|² = 1`).
#[derive(Clone, Debug)]
pub struct GammaEstimate {
    pub value: f64,
    /// Relative spread of the converged start values below the best one.
    pub spread: f64,
    pub starts: Vec<f64>,
    pub maximizer: Field,
}

#[derive(Clone, Debug)]
pub struct GammaOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions {
            starts: 10,
            seed: 0,
            max_iter: 3000,
        }
    }
}

/// Γ_p by ascent of `∫_Ω g|u|^p` on `{∫_Ω|∇u|² = 1}` over Ω-supported fields,
/// with a quadratic penalty on `∫f u² < 0`. One start is φ₁ when supplied.
pub fn gamma_p(model: &Model, phi1: Option<&Field>, opts: &GammaOptions) -> Result<GammaEstimate> {
    let grid = model.grid();
    let p = model.p();
    let omega = model.omega();
    let w = grid.weights();
    let (f, g) = (model.f(), model.g());
    let n = grid.len();
    let op = Operator::new(grid, 1.0, vec![0.0; n], true).masked(Some(omega));
    let penalty = 1e3;
    let objective = |u: &[f64]| -> (f64, Vec<f64>) {
        let fu: f64 = grid.sum(|i| if omega[i] { w[i] * f[i] * u[i] * u[i] } else { 0.0 });
        let gu: f64 = grid.sum(|i| if omega[i] { w[i] * g[i] * abs_pow(u[i], p) } else { 0.0 });
        let viol = (-fu).max(0.0);
        let grad = (0..n)
            .map(|i| {
                if !omega[i] {
                    return 0.0;
                }
                let dg = -p * w[i] * g[i] * crate::functional::signed_pow(u[i], p);
                let df = if viol > 0.0 {
                    -4.0 * penalty * viol * w[i] * f[i] * u[i]
                } else {
                    0.0
                };
                dg + df
            })
            .collect();
        (-gu + penalty * viol * viol, grad)
    };
    let reach = 0.5 * grid.spec().half_length;
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|s| {
            let mut x = match (s, phi1) {
                (0, Some(phi)) => phi.values().to_vec(),
                _ => {
                    let mut r = rng::stream(opts.seed, "gamma_p", s as u64);
                    rng::smooth_field(grid, &mut r, reach, true)
                }
            };
            x.iter_mut().zip(omega).for_each(|(v, &m)| {
                if !m {
                    *v = 0.0
                }
            });
            x
        })
        .collect();
    let dopts = DescentOptions {
        max_iter: opts.max_iter,
        grad_tol: 1e-10,
        abs_every: Some(10),
    };
    let results: Vec<Result<(f64, Vec<f64>)>> = starts
        .into_par_iter()
        .map(|x0| {
            let d = descend(&op, Constraint::Sphere(1.0), x0, objective, &dopts)?;
            Ok((-d.value, d.x))
        })
        .collect();
    let mut values = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in results {
        let (v, x) = r?;
        values.push(v);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, x));
        }
    }
    let (value, mut x) = best.expect("at least one start");
    if !(value > 0.0) {
        return Err(Error::Condition {
            condition: "D2",
            detail: format!("Γ_p ascent found no positive value (best {value:.3e})"),
        });
    }
    x.iter_mut().for_each(|v| *v = v.abs());
    let spread = values
        .iter()
        .filter(|v| **v >= 0.9 * value)
        .map(|v| (value - v) / value)
        .fold(0.0, f64::max);
    Ok(GammaEstimate {
        value,
        spread,
        starts: values,
        maximizer: grid.wrap(x),
    })
}

/// `∫_Ω g φ^p`.
pub fn g_phi_p(model: &Model, phi: &Field) -> Result<f64> {
    let grid = model.grid();
    grid.check(phi)?;
    let (w, g, om, u) = (grid.weights(), model.g(), model.omega(), phi.values());
    let p = model.p();
    Ok(grid.sum(|i| if om[i] { w[i] * g[i] * abs_pow(u[i], p) } else { 0.0 }))
}

/// Discrete inputs shared by all formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub n: usize,
    pub a: f64,
    pub p: f64,
    pub lambda: f64,
    pub s: f64,
    pub g_sup: f64,
    pub measure: f64,
    pub c0: f64,
    pub spectrum: Spectrum,
}

impl Inputs {
    pub fn from_model(model: &Model, spectrum: Spectrum) -> Result<Self> {
        Ok(Inputs {
            n: model.spec.dim(),
            a: model.a(),
            p: model.p(),
            lambda: model.lambda(),
            s: sobolev_constant(model.spec.dim())?,
            g_sup: model.g_sup(),
            measure: model.measure_v_below(model.spec.c0),
            c0: model.spec.c0,
            spectrum,
        })
    }

    fn two_star(&self) -> f64 {
        critical_exponent(self.n)
    }

    /// `‖g‖_∞|{V<c₀}|^{(2*−p)/2*} / (p S^p)`, the embedding coefficient of the g-term.
    fn embed(&self) -> f64 {
        let ts = self.two_star();
        self.g_sup * self.measure.powf((ts - self.p) / ts) / (self.p * self.s.powf(self.p))
    }

    pub fn lambda0(&self) -> f64 {
        let Spectrum { lambda1, lambda2, .. } = self.spectrum;
        (lambda2 - lambda1) / (2.0 * (lambda2 + lambda1))
    }

    /// ρ_λ (p > 4) or ρ̄_λ (p < 4); the formula is the same with 2* = 6 at N = 3.
    pub fn rho_lambda(&self) -> Option<f64> {
        let l1 = self.spectrum.lambda1;
        if !(self.lambda < l1) {
            return None;
        }
        let q = (l1 - self.lambda) / (l1 + self.lambda);
        Some((0.25 * q / self.embed()).powf(1.0 / (self.p - 2.0)))
    }

    pub fn theta(&self, eig: f64) -> f64 {
        0.5 * (1.0 - self.lambda / eig)
    }
}

/// Thresholds of the super-quartic geometry (N = 3, 4 < p < 6).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superquartic {
    pub rho_lambda: Option<f64>,
    pub lambda0: f64,
    pub rho_a: f64,
    pub rho_a_lambda: Option<f64>,
    pub delta_a_mu: f64,
    pub delta_a: f64,
    pub c1: f64,
    pub c2: f64,
    pub theta1_mu: f64,
    pub theta2_mu: f64,
}

pub fn thresholds_superquartic(inp: &Inputs) -> Result<Superquartic> {
    let p = inp.p;
    if inp.n != 3 || !(p > 4.0 && p < 6.0) {
        return Err(Error::regime(
            "thresholds_superquartic",
            format!("needs N = 3 and 4 < p < 6, got N = {} and p = {p}", inp.n),
        ));
    }
    let Spectrum {
        lambda1,
        lambda2,
        lambda1_mu,
        lambda2_mu,
    } = inp.spectrum;
    let a = inp.a;
    let lambda0 = inp.lambda0();
    // p S^p / (‖g‖_∞ |{V<c₀}|^{(6-p)/6}) = 1/embed.
    let k = 1.0 / inp.embed();
    let rho_a = (a * k / 128.0)
        .powf(1.0 / (p - 4.0))
        .min((32.0 * lambda0 / (137.0 * a)).sqrt());
    let delta_a_mu = lambda1_mu / 128.0 * a * rho_a * rho_a;
    let c1 = lambda1 / 4.0 * (1.0 / 128.0f64).powf((p - 2.0) / (p - 4.0)) * k.powf(2.0 / (p - 4.0));
    let c2 = lambda1 * (lambda2 - lambda1) / (4384.0 * (lambda2 + lambda1));
    let delta_a = (a.powf((p - 2.0) / (p - 4.0)) * c1).min(c2);
    let rho_lambda = inp.rho_lambda();
    let rho_a_lambda = if inp.lambda < lambda1 {
        rho_lambda
    } else if inp.lambda < lambda1 + delta_a_mu {
        Some(rho_a)
    } else {
        None
    };
    Ok(Superquartic {
        rho_lambda,
        lambda0,
        rho_a,
        rho_a_lambda,
        delta_a_mu,
        delta_a,
        c1,
        c2,
        theta1_mu: inp.theta(lambda1_mu),
        theta2_mu: inp.theta(lambda2_mu),
    })
}

/// Thresholds of the sub-quartic geometry (2 < p < min{4, 2*}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subquartic {
    pub gamma_p: f64,
    pub g_phi1_p: f64,
    pub a0_p: f64,
    pub lambda0: f64,
    pub rho_bar_lambda: Option<f64>,
    pub rho_bar_a: f64,
    pub rho_bar_a_lambda: Option<f64>,
    pub b: Option<f64>,
    pub rho0: Option<f64>,
    pub delta_bar_a_mu: Option<f64>,
    pub delta_bar_a: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub rho_hat_a: Option<f64>,
    pub rho_hat_a_lambda: Option<f64>,
    pub lambda_a_plus: Option<f64>,
    /// λ_a⁺ came out negative (a below the threshold for this g).
    pub lambda_a_plus_negative: bool,
    pub theta1_mu: f64,
    pub theta2_mu: f64,
}

pub fn a0(p: f64, gamma_p: f64) -> f64 {
    2.0 * (p - 2.0) * (4.0 - p).powf((4.0 - p) / (p - 2.0)) * (gamma_p / p).powf(2.0 / (p - 2.0))
}

/// λ_a⁺ for `∫gφ₁^p > 0`.
pub fn lambda_a_plus(a: f64, p: f64, lambda1: f64, g_phi1_p: f64) -> f64 {
    lambda1
        - (4.0 - p)
            * (g_phi1_p / p).powf(2.0 / (4.0 - p))
            * (2.0 * (p - 2.0) / (a * lambda1 * lambda1)).powf((p - 2.0) / (4.0 - p))
}

/// Scale `t_a` of the e₀ along φ₁ in the g-positive sub-quartic regime.
pub fn t_a(a: f64, p: f64, lambda1: f64, g_phi1_p: f64) -> f64 {
    (2.0 * (p - 2.0) * g_phi1_p / (a * p * lambda1 * lambda1)).powf(1.0 / (4.0 - p))
}

/// B and ρ₀ of the g-negative branch.
pub fn b_rho0(inp: &Inputs, g_phi1_p: f64) -> (f64, f64) {
    let p = inp.p;
    let ts = inp.two_star();
    let l1 = inp.spectrum.lambda1;
    let m = inp.measure.powf((ts - p) / ts);
    let gi = g_phi1_p.abs();
    let b = (inp.s.powf(p) * gi / (2f64.powf(p) * inp.g_sup * (p - 1.0) * m * l1.powf(p / 2.0))).powf((p - 1.0) / p);
    let bp = b.powf(p);
    let inner = gi / (4.0 * p * l1.powf(p / 2.0))
        + 2f64.powf(p - 2.0) * inp.g_sup * (1.0 + p * bp) * m / (p * bp * inp.s.powf(p));
    let rho0 = inp.lambda0().powf(1.0 / (p - 2.0)) * inner.powf(-1.0 / (p - 2.0));
    (b, rho0)
}

pub fn thresholds_subquartic(inp: &Inputs, gamma_p: f64, g_phi1_p: f64) -> Result<Subquartic> {
    let p = inp.p;
    let cap = 4.0f64.min(inp.two_star());
    if !(p > 2.0 && p < cap) {
        return Err(Error::regime(
            "thresholds_subquartic",
            format!("needs 2 < p < {cap}, got p = {p}"),
        ));
    }
    let Spectrum {
        lambda1,
        lambda1_mu,
        lambda2_mu,
        ..
    } = inp.spectrum;
    let a = inp.a;
    let rho_bar_lambda = inp.rho_lambda();
    let rho_bar_a = ((p - 2.0) * gamma_p / (a * p)).powf(1.0 / (4.0 - p));
    let mut out = Subquartic {
        gamma_p,
        g_phi1_p,
        a0_p: a0(p, gamma_p),
        lambda0: inp.lambda0(),
        rho_bar_lambda,
        rho_bar_a,
        rho_bar_a_lambda: rho_bar_lambda.map(|r| r.min(rho_bar_a)),
        b: None,
        rho0: None,
        delta_bar_a_mu: None,
        delta_bar_a: None,
        c3: None,
        c4: None,
        rho_hat_a: None,
        rho_hat_a_lambda: None,
        lambda_a_plus: None,
        lambda_a_plus_negative: false,
        theta1_mu: inp.theta(lambda1_mu),
        theta2_mu: inp.theta(lambda2_mu),
    };
    if g_phi1_p < 0.0 {
        let (b, rho0) = b_rho0(inp, g_phi1_p);
        let k = g_phi1_p.abs() / (2f64.powf((p + 6.0) / 2.0) * p * lambda1.powf((p - 2.0) / 2.0));
        let r = rho0.min(rho_bar_a);
        out.b = Some(b);
        out.rho0 = Some(rho0);
        out.delta_bar_a = Some(k * r.powf(p - 2.0));
        out.delta_bar_a_mu = Some(
            g_phi1_p.abs() * lambda1_mu / (2f64.powf((p + 2.0) / 2.0) * p * lambda1.powf(p / 2.0)) * r.powf(p - 2.0),
        );
        out.c3 = Some(k * ((p - 2.0) * gamma_p / p).powf((p - 2.0) / (4.0 - p)));
        out.c4 = Some(k * rho0.powf(p - 2.0));
        if inp.lambda >= lambda1 {
            out.rho_bar_a_lambda = Some(r);
        }
    } else if g_phi1_p > 0.0 {
        let rho_hat_a = ((p - 2.0) * g_phi1_p / (a * p * lambda1.powf(p / 2.0))).powf(1.0 / (4.0 - p));
        out.rho_hat_a = Some(rho_hat_a);
        out.rho_hat_a_lambda = rho_bar_lambda.map(|r| r.min(rho_hat_a));
        let lp = lambda_a_plus(a, p, lambda1, g_phi1_p);
        out.lambda_a_plus_negative = lp < 0.0;
        out.lambda_a_plus = Some(lp);
    }
    Ok(out)
}

/// Coercivity thresholds and offsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coercivity {
    /// μ₀ of the embedding estimate, `S²/(c₀|{V<c₀}|^{(2*−2)/2*})`.
    pub mu0: f64,
    pub mu0_n3: Option<f64>,
    pub mu1: Option<f64>,
    pub c_n_a_lambda: f64,
    pub c_bar_0: f64,
    /// Threshold that applies in this dimension.
    pub threshold: f64,
}

pub fn coercivity_constants(model: &Model) -> Result<Coercivity> {
    let spec = &model.spec;
    let n = spec.dim();
    let (a, p, lambda, c0) = (model.a(), model.p(), model.lambda(), spec.c0);
    let s = sobolev_constant(n)?;
    let ts = critical_exponent(n);
    let g = model.g_sup();
    let measure = model.measure_v_below(c0);
    let mu0 = s * s / (c0 * measure.powf((ts - 2.0) / ts));
    let c_bar_0 = hardy_constant(n);
    if !(p > 2.0 && p < 4.0f64.min(ts)) {
        return Err(Error::regime(
            "coercivity_constants",
            format!("needs 2 < p < min(4, 2*), got p = {p}"),
        ));
    }
    let f_norm = model.lq_norm(model.f(), n as f64 / 2.0);
    let f_term = 3.0 * lambda * lambda * f_norm * f_norm / (4.0 * a * s.powi(4));
    match n {
        3 => {
            let (c_star, r_star) = match (spec.c_star, spec.r_star) {
                (Some(c), Some(r)) => (c, r),
                _ => {
                    return Err(Error::Condition {
                        condition: "H3",
                        detail: "c_star and R_star are required for N = 3".into(),
                    })
                }
            };
            let mu0_n3 = 4.0
                * (4.0 - p)
                * (c_star * g / (p * p)).powf(1.0 / (4.0 - p))
                * (6.0 * 2f64.sqrt() * (p - 2.0) * c_bar_0 / (a * s.powi(3))).powf((p - 2.0) / (4.0 - p));
            let ball = 4.0 * PI * r_star.powi(3) / 3.0;
            let c = (4.0 - p) / p
                * 2f64.powf((p - 2.0) / (4.0 - p))
                * ball.powf((12.0 - 2.0 * p) / (12.0 - 3.0 * p))
                * (g / s.powf(p)).powf(4.0 / (4.0 - p))
                * (3.0 / a).powf(p / (4.0 - p))
                + f_term;
            Ok(Coercivity {
                mu0,
                mu0_n3: Some(mu0_n3),
                mu1: None,
                c_n_a_lambda: c,
                c_bar_0,
                threshold: mu0_n3,
            })
        }
        4 => {
            let mu1 = 4.0 * (4.0 - p) / c0
                * (g / p).powf(2.0 / (4.0 - p))
                * (6.0 * (p - 2.0) / (a * s.powi(4))).powf((p - 2.0) / (4.0 - p));
            let c = (4.0 - p) * measure / p * (g / s.powf(p)).powf(4.0 / (4.0 - p)) * (3.0 / a).powf(p / (4.0 - p))
                + f_term;
            Ok(Coercivity {
                mu0,
                mu0_n3: None,
                mu1: Some(mu1),
                c_n_a_lambda: c,
                c_bar_0,
                threshold: mu1,
            })
        }
        _ => {
            let mu1 = 8.0 * (ts - p) * g / ((ts - 2.0) * p * c0);
            let c = (4.0 - p) / (4.0 * p)
                * (2f64.powf((ts - p) / (ts - 2.0)) * measure.powf((ts - p) / ts) * g / s.powf(p))
                    .powf(4.0 / (4.0 - p))
                * (3.0 / a).powf(p / (4.0 - p))
                + (4.0 - ts) / 4.0
                    * ((p - 2.0) * g / ((ts - 2.0) * p * s.powf(ts))).powf(4.0 / (4.0 - ts))
                    * (3.0 * ts / a).powf(ts / (4.0 - ts))
                + f_term;
            Ok(Coercivity {
                mu0,
                mu0_n3: None,
                mu1: Some(mu1),
                c_n_a_lambda: c,
                c_bar_0,
                threshold: mu1,
            })
        }
    }
}

/// `max_{0≤s≤1} J(s e₀)` on a 1001-point grid in s.
pub fn d0(model: &Model, e0: &Field) -> Result<f64> {
    model.grid().check(e0)?;
    let u = e0.values();
    let mut best = f64::NEG_INFINITY;
    let mut buf = vec![0.0; u.len()];
    for k in 0..=1000 {
        let s = k as f64 / 1000.0;
        buf.iter_mut().zip(u).for_each(|(b, u)| *b = s * u);
        best = best.max(crate::functional::energy_parts(model, &buf).total);
    }
    Ok(best)
}

/// Every constant, with `None` where a formula does not apply to the
/// problem's dimension, exponent or sign regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    #[serde(rename = "S")]
    pub s: f64,
    pub s_convention: String,
    pub mu0: f64,
    pub mu1: Option<f64>,
    #[serde(rename = "mu0_N3")]
    pub mu0_n3: Option<f64>,
    #[serde(rename = "Gamma_p")]
    pub gamma_p: Option<f64>,
    pub gamma_p_is_lower_bound: bool,
    pub a0_p: Option<f64>,
    pub lambda_a_plus: Option<f64>,
    pub lambda_a_plus_negative: bool,
    pub rho_lambda: Option<f64>,
    pub rho_a: Option<f64>,
    pub rho_a_lambda: Option<f64>,
    pub delta_a_mu: Option<f64>,
    pub delta_a: Option<f64>,
    #[serde(rename = "C1")]
    pub c1: Option<f64>,
    #[serde(rename = "C2")]
    pub c2: Option<f64>,
    pub rho_bar_lambda: Option<f64>,
    pub rho_bar_a: Option<f64>,
    pub rho_bar_a_lambda: Option<f64>,
    pub rho0: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub delta_bar_a_mu: Option<f64>,
    pub delta_bar_a: Option<f64>,
    #[serde(rename = "C3")]
    pub c3: Option<f64>,
    #[serde(rename = "C4")]
    pub c4: Option<f64>,
    pub rho_hat_a: Option<f64>,
    pub rho_hat_a_lambda: Option<f64>,
    #[serde(rename = "Lambda0")]
    pub lambda0: f64,
    pub theta1_mu: f64,
    pub theta2_mu: f64,
    #[serde(rename = "C_N_a_lambda")]
    pub c_n_a_lambda: Option<f64>,
    #[serde(rename = "C_bar_0")]
    pub c_bar_0: f64,
    pub c_bar_0_choice: String,
    #[serde(rename = "D0")]
    pub d0: Option<f64>,
    /// Radius of the geometry sphere for the problem's regime.
    pub rho_geometry: Option<f64>,
    #[serde(rename = "measure_V_lt_c0")]
    pub measure_v_lt_c0: f64,
    pub g_sup: f64,
    #[serde(rename = "f_norm_N_over_2")]
    pub f_norm_n_over_2: f64,
    pub g_phi1_p: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda1_mu: f64,
    pub lambda2_mu: f64,
}

/// Everything that depends on the eigenproblems and Γ_p but not on a.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub eigen: EigenSet,
    pub gamma: Option<GammaEstimate>,
    pub g_phi1_p: f64,
}

pub fn prepare(model: &Model, eig: &EigenOptions, gopts: &GammaOptions) -> Result<Prepared> {
    let eigen = crate::eigen::eigen_set(model, eig)?;
    let g_phi1_p = g_phi_p(model, &eigen.omega1.field)?;
    let gamma = if model.p() < 4.0 {
        Some(gamma_p(model, Some(&eigen.omega1.field), gopts)?)
    } else {
        None
    };
    Ok(Prepared { eigen, gamma, g_phi1_p })
}

impl Prepared {
    pub fn a0(&self, p: f64) -> Option<f64> {
        self.gamma.as_ref().map(|g| a0(p, g.value))
    }
}

/// Assembles the report; `e0`, when given, fixes D₀.
pub fn constants_report(model: &Model, prep: &Prepared, e0: Option<&Field>) -> Result<ConstantsReport> {
    let spectrum = prep.eigen.spectrum();
    let inp = Inputs::from_model(model, spectrum)?;
    let n = model.spec.dim();
    let f_norm = model.lq_norm(model.f(), n as f64 / 2.0);
    let mut r = ConstantsReport {
        s: inp.s,
        s_convention: S_CONVENTION.into(),
        mu0: inp.s * inp.s / (inp.c0 * inp.measure.powf((inp.two_star() - 2.0) / inp.two_star())),
        mu1: None,
        mu0_n3: None,
        gamma_p: None,
        gamma_p_is_lower_bound: true,
        a0_p: None,
        lambda_a_plus: None,
        lambda_a_plus_negative: false,
        rho_lambda: None,
        rho_a: None,
        rho_a_lambda: None,
        delta_a_mu: None,
        delta_a: None,
        c1: None,
        c2: None,
        rho_bar_lambda: None,
        rho_bar_a: None,
        rho_bar_a_lambda: None,
        rho0: None,
        b: None,
        delta_bar_a_mu: None,
        delta_bar_a: None,
        c3: None,
        c4: None,
        rho_hat_a: None,
        rho_hat_a_lambda: None,
        lambda0: inp.lambda0(),
        theta1_mu: inp.theta(spectrum.lambda1_mu),
        theta2_mu: inp.theta(spectrum.lambda2_mu),
        c_n_a_lambda: None,
        c_bar_0: hardy_constant(n),
        c_bar_0_choice: C_BAR_0_CHOICE.into(),
        d0: None,
        rho_geometry: None,
        measure_v_lt_c0: inp.measure,
        g_sup: inp.g_sup,
        f_norm_n_over_2: f_norm,
        g_phi1_p: prep.g_phi1_p,
        lambda1: spectrum.lambda1,
        lambda2: spectrum.lambda2,
        lambda1_mu: spectrum.lambda1_mu,
        lambda2_mu: spectrum.lambda2_mu,
    };
    let p = model.p();
    if n == 3 && p > 4.0 && p < 6.0 {
        let s = thresholds_superquartic(&inp)?;
        r.rho_lambda = s.rho_lambda;
        r.rho_a = Some(s.rho_a);
        r.rho_a_lambda = s.rho_a_lambda;
        r.delta_a_mu = Some(s.delta_a_mu);
        r.delta_a = Some(s.delta_a);
        r.c1 = Some(s.c1);
        r.c2 = Some(s.c2);
        r.rho_geometry = s.rho_a_lambda;
    }
    if p < 4.0 {
        if let Some(gamma) = &prep.gamma {
            let s = thresholds_subquartic(&inp, gamma.value, prep.g_phi1_p)?;
            r.gamma_p = Some(gamma.value);
            r.a0_p = Some(s.a0_p);
            r.lambda_a_plus = s.lambda_a_plus;
            r.lambda_a_plus_negative = s.lambda_a_plus_negative;
            r.rho_bar_lambda = s.rho_bar_lambda;
            r.rho_bar_a = Some(s.rho_bar_a);
            r.rho_bar_a_lambda = s.rho_bar_a_lambda;
            r.rho0 = s.rho0;
            r.b = s.b;
            r.delta_bar_a_mu = s.delta_bar_a_mu;
            r.delta_bar_a = s.delta_bar_a;
            r.c3 = s.c3;
            r.c4 = s.c4;
            r.rho_hat_a = s.rho_hat_a;
            r.rho_hat_a_lambda = s.rho_hat_a_lambda;
            r.rho_geometry = if model.a() < s.a0_p {
                s.rho_bar_a_lambda
            } else {
                s.rho_hat_a_lambda
            };
        }
        match coercivity_constants(model) {
            Ok(c) => {
                r.mu0_n3 = c.mu0_n3;
                r.mu1 = c.mu1;
                r.c_n_a_lambda = Some(c.c_n_a_lambda);
            }
            Err(Error::Condition { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if let Some(e0) = e0 {
        r.d0 = Some(d0(model, e0)?);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(a: f64, p: f64, l1: f64, l2: f64) -> Inputs {
        Inputs {
            n: 3,
            a,
            p,
            lambda: l1,
            s: sobolev_constant(3).unwrap(),
            g_sup: 1.3,
            measure: 4.2,
            c0: 0.25,
            spectrum: Spectrum {
                lambda1: l1,
                lambda2: l2,
                lambda1_mu: 0.99 * l1,
                lambda2_mu: 0.99 * l2,
            },
        }
    }

    #[test]
    fn sobolev_values() {
        assert!((sobolev_constant(3).unwrap() - 2.3406).abs() < 1e-3);
        for n in 3..=8 {
            let s = sobolev_constant(n).unwrap();
            assert!(s.is_finite() && s > 0.0);
        }
        assert!(sobolev_constant(2).is_err());
    }

    #[test]
    fn lambda0_quarter() {
        let inp = inputs(1.0, 5.0, 10.0, 30.0);
        assert!((inp.lambda0() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn theta_vanishes_at_lambda1_mu() {
        let mut inp = inputs(1.0, 5.0, 10.0, 30.0);
        inp.lambda = inp.spectrum.lambda1_mu;
        let s = thresholds_superquartic(&inp).unwrap();
        assert_eq!(s.theta1_mu, 0.0);
    }

    #[test]
    fn small_a_uses_first_branch() {
        let inp = inputs(1e-6, 5.0, 10.0, 30.0);
        let s = thresholds_superquartic(&inp).unwrap();
        let first = (inp.a / (128.0 * inp.embed())).powf(1.0 / (inp.p - 4.0));
        assert_eq!(s.rho_a, first);
        assert_eq!(s.delta_a, inp.a.powf((inp.p - 2.0) / (inp.p - 4.0)) * s.c1);
        assert!(thresholds_superquartic(&inputs(1e-12, 5.0, 10.0, 30.0)).unwrap().rho_a < s.rho_a);
    }

    #[test]
    fn a0_at_p3() {
        let g = 0.7;
        assert!((a0(3.0, g) - 2.0 * g * g / 9.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_regimes_rejected() {
        assert!(thresholds_superquartic(&inputs(1.0, 3.0, 10.0, 30.0)).is_err());
        assert!(thresholds_subquartic(&inputs(1.0, 5.0, 10.0, 30.0), 1.0, 1.0).is_err());
    }
}
