//! Fixtures shared by the benchmarks.

use kirchhoff_core::constants::{self, GammaOptions};
use kirchhoff_core::{rng, Canonical, EigenOptions, Field, Model, ProblemSpec};

pub fn model(which: Canonical) -> Model {
    Model::new(ProblemSpec::canonical(which)).expect("canonical problems are valid")
}

/// TP-BALL-P3-POS at a = 2a₀ and λ = 0.8λ₁, where two positive solutions exist.
pub fn pos_pair_model() -> Model {
    let m = model(Canonical::BallP3Pos);
    let prep = constants::prepare(&m, &EigenOptions::default(), &GammaOptions::default()).expect("prepare");
    let a0 = prep.a0(m.p()).expect("p < 4");
    let l1 = prep.eigen.omega1.value;
    m.with_params(2.0 * a0, 0.8 * l1, m.mu()).expect("valid parameters")
}

/// Smooth random field on the model's grid.
pub fn field(m: &Model, index: u64) -> Field {
    let g = m.grid();
    let mut r = rng::stream(0, "bench", index);
    g.field(rng::smooth_field(g, &mut r, 1.0, true)).expect("finite values")
}
