//! Multiplicity census: every search the regime calls for, deduplicated,
//! with a μ-doubling ladder when fewer solutions than predicted are found.

use serde::{Deserialize, Serialize};

use super::{
    a_mu, ball_min_with, deflated_search_with, distance_mu, exterior_min_with, find_e0, finish, local_min,
    mountain_pass_with, Classification, DeflationOptions, MountainPassOptions, SearchOptions, SolveResult,
};
use crate::constants::{self, GammaOptions};
use crate::eigen::EigenOptions;
use crate::error::{Error, Result};
use crate::problem::Model;

/// Which existence statement the parameters fall under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// 4 < p < 6, 0 < λ ≤ λ₁: one positive solution.
    SuperquarticBelow,
    /// 4 < p < 6, λ₁ < λ < λ₁ + δ_a: two.
    SuperquarticWindow,
    /// p < 4, a < a₀, 0 < λ < λ₁: two.
    SubquarticBelow,
    /// p < 4, a < a₀, ∫gφ₁^p < 0, λ = λ₁: two.
    SubquarticAtLambda1,
    /// p < 4, a < a₀, ∫gφ₁^p < 0, λ₁ < λ < λ₁ + δ̄_a: three.
    SubquarticWindow,
    /// p < 4, a ≥ a₀, ∫gφ₁^p > 0, λ_a⁺ < λ < λ₁: two.
    SubquarticPositive,
    /// No statement applies.
    Outside,
}

impl Regime {
    pub fn expected(&self) -> usize {
        match self {
            Regime::SuperquarticBelow => 1,
            Regime::SuperquarticWindow
            | Regime::SubquarticBelow
            | Regime::SubquarticAtLambda1
            | Regime::SubquarticPositive => 2,
            Regime::SubquarticWindow => 3,
            Regime::Outside => 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CensusOptions {
    pub seed: u64,
    /// μ values tried in order until the predicted count is met.
    pub mu_ladder_max: f64,
    pub search: SearchOptions,
    pub deflation: DeflationOptions,
    pub mountain: MountainPassOptions,
    /// Deflation rounds after the structured searches.
    pub deflation_rounds: usize,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions {
            seed: 0,
            mu_ladder_max: 8000.0,
            search: SearchOptions::default(),
            deflation: DeflationOptions::default(),
            mountain: MountainPassOptions::default(),
            deflation_rounds: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Census {
    pub regime: Regime,
    pub expected: usize,
    /// Positive solutions sorted by decreasing energy.
    pub solutions: Vec<SolveResult>,
    pub mu_ladder: Vec<f64>,
    pub final_mu: f64,
    /// Radius used for the geometry searches.
    pub rho: Option<f64>,
    /// Notes on searches that found nothing.
    pub notes: Vec<String>,
}

impl Census {
    pub fn energy_signs(&self) -> Vec<i8> {
        self.solutions
            .iter()
            .map(|s| if s.energy > 0.0 { 1 } else { -1 })
            .collect()
    }
}

/// Census at the model's λ and μ.
pub fn multiplicity_census(model: &Model, lambda: f64) -> Result<Census> {
    multiplicity_census_with(model, lambda, &CensusOptions::default())
}

pub fn multiplicity_census_with(model: &Model, lambda: f64, opts: &CensusOptions) -> Result<Census> {
    let mut model = model.with_lambda(lambda)?;
    let mut ladder = vec![model.mu()];
    loop {
        let mut census = census_at(&model, opts)?;
        let mu = model.mu();
        if census.solutions.len() >= census.expected || 2.0 * mu > opts.mu_ladder_max {
            census.mu_ladder = ladder;
            census.final_mu = mu;
            return Ok(census);
        }
        model = model.with_mu(2.0 * mu)?;
        ladder.push(model.mu());
    }
}

fn regime_of(model: &Model, prep: &constants::Prepared, report: &constants::ConstantsReport) -> Regime {
    let p = model.p();
    let lambda = model.lambda();
    let l1 = prep.eigen.omega1.value;
    if lambda <= 0.0 {
        return Regime::Outside;
    }
    if p > 4.0 {
        if lambda <= l1 {
            return Regime::SuperquarticBelow;
        }
        if report.delta_a.is_some_and(|d| lambda < l1 + d) {
            return Regime::SuperquarticWindow;
        }
        return Regime::Outside;
    }
    let a0 = report.a0_p.unwrap_or(f64::NAN);
    let a = model.a();
    if a < a0 {
        if lambda < l1 {
            return Regime::SubquarticBelow;
        }
        if prep.g_phi1_p < 0.0 {
            if lambda == l1 {
                return Regime::SubquarticAtLambda1;
            }
            if report.delta_bar_a.is_some_and(|d| lambda < l1 + d) {
                return Regime::SubquarticWindow;
            }
        }
        return Regime::Outside;
    }
    if prep.g_phi1_p > 0.0 && report.lambda_a_plus.is_some_and(|lp| lp < lambda) && lambda < l1 {
        return Regime::SubquarticPositive;
    }
    Regime::Outside
}

fn census_at(model: &Model, opts: &CensusOptions) -> Result<Census> {
    let eig = EigenOptions {
        seed: opts.seed,
        ..Default::default()
    };
    let gopts = GammaOptions {
        seed: opts.seed,
        ..Default::default()
    };
    let prep = constants::prepare(model, &eig, &gopts)?;
    let report = constants::constants_report(model, &prep, None)?;
    let regime = regime_of(model, &prep, &report);
    let mut notes = Vec::new();
    let mut found: Vec<SolveResult> = Vec::new();
    let rho = report
        .rho_geometry
        .or(report.rho_bar_a)
        .or(report.rho_a)
        .filter(|r| r.is_finite() && *r > 0.0);
    let p = model.p();
    let search = SearchOptions {
        seed: opts.seed,
        ..opts.search.clone()
    };
    let mut note = |what: &str, e: &Error| notes.push(format!("{what}: {e}"));

    // Negative-energy minima.
    if let Some(rho) = rho {
        match ball_min_with(model, rho, &search) {
            Ok(r) => push(model, &mut found, r),
            Err(e @ (Error::Degenerate { .. } | Error::NoConvergence { .. })) => note("ball_min", &e),
            Err(e) => return Err(e),
        }
        if p < 4.0 {
            match exterior_min_with(model, rho, &search) {
                Ok(r) => push(model, &mut found, r),
                Err(e @ (Error::Degenerate { .. } | Error::NoConvergence { .. } | Error::Regime { .. })) => {
                    note("exterior_min", &e)
                }
                Err(e) => return Err(e),
            }
        }
    }
    if p < 4.0 {
        // Coercive: free descents from the structured directions at several scales.
        let op = a_mu(model);
        let phi = prep.eigen.mu1.field.values();
        let mut dirs: Vec<Vec<f64>> = vec![phi.to_vec()];
        if let Some(g) = &prep.gamma {
            dirs.push(g.maximizer.values().to_vec());
        }
        for d in dirs {
            let n = crate::optim::a_norm(&op, &d);
            for s in [0.01, 0.1, 1.0, 10.0] {
                let x0: Vec<f64> = d.iter().map(|v| v * s / n).collect();
                match local_min(model, x0, &search) {
                    Ok(r) if r.energy < 0.0 && !r.is_trivial() => push(model, &mut found, r),
                    Ok(_) => {}
                    Err(e @ (Error::Degenerate { .. } | Error::NoConvergence { .. })) => note("local_min", &e),
                    Err(e) => return Err(e),
                }
            }
        }
    }

    // Mountain pass from 0 to e₀, and to each negative minimum.
    let mut targets: Vec<crate::grid::Field> = Vec::new();
    match find_e0(model, rho.unwrap_or(1e-3)) {
        Ok(e0) => targets.push(e0),
        Err(e @ (Error::Regime { .. } | Error::Condition { .. })) => note("find_e0", &e),
        Err(e) => return Err(e),
    }
    targets.extend(found.iter().filter(|r| r.energy < 0.0).map(|r| r.field.clone()));
    for e0 in &targets {
        match mountain_pass_with(model, None, e0, &opts.mountain) {
            Ok(r) => {
                push(model, &mut found, r);
                break;
            }
            Err(e @ (Error::Degenerate { .. } | Error::NoConvergence { .. })) => note("mountain_pass", &e),
            Err(e) => return Err(e),
        }
    }

    // Deflation against everything found plus the trivial solution.
    let zero = finish(
        model,
        vec![0.0; model.grid().len()],
        Classification::Refined,
        0,
        vec![0.0],
        0.0,
    )?;
    let defl = DeflationOptions {
        seed: opts.seed,
        ..opts.deflation.clone()
    };
    for _ in 0..opts.deflation_rounds {
        let mut known: Vec<SolveResult> = vec![zero.clone()];
        known.extend(found.iter().cloned());
        match deflated_search_with(model, &known, &defl)? {
            Some(r) => push(model, &mut found, r),
            None => break,
        }
    }

    let mut solutions: Vec<SolveResult> = found.into_iter().filter(|r| r.positive).collect();
    solutions.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    Ok(Census {
        regime,
        expected: regime.expected(),
        solutions,
        mu_ladder: Vec::new(),
        final_mu: model.mu(),
        rho,
        notes,
    })
}

/// Adds `r` unless it duplicates a known solution: energies within 10⁻⁶
/// and fields within the separation rule.
fn push(model: &Model, found: &mut Vec<SolveResult>, r: SolveResult) {
    if r.is_trivial() {
        return;
    }
    let dup = found.iter().any(|k| {
        (k.energy - r.energy).abs() <= 1e-6
            && distance_mu(model, k.field.values(), r.field.values()) < 1e-3 * k.norm_mu.max(1.0)
    });
    if !dup {
        found.push(r);
    }
}
