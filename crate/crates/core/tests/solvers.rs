use kirchhoff_core::constants::{self, GammaOptions};
use kirchhoff_core::continuation::{bifurcation_diagram, diagram_csv, diagram_svg, trace_branch, StopReason};
use kirchhoff_core::solvers::{exterior_min, newton_refine, RESIDUAL_TOL};
use kirchhoff_core::{Canonical, EigenOptions, Model, ProblemSpec};

fn pos_model() -> Model {
    let m = Model::new(ProblemSpec::canonical(Canonical::BallP3Pos)).unwrap();
    let prep = constants::prepare(&m, &EigenOptions::default(), &GammaOptions::default()).unwrap();
    let a0 = prep.a0(m.p()).unwrap();
    let l1 = prep.eigen.omega1.value;
    m.with_params(2.0 * a0, 0.8 * l1, m.mu()).unwrap()
}

#[test]
fn exterior_minimizer_is_a_positive_solution() {
    let m = pos_model();
    let s = exterior_min(&m, 0.05).unwrap();
    assert!(s.positive && s.residual <= RESIDUAL_TOL && s.energy < 0.0);
    let again = newton_refine(&m, &s.field).unwrap();
    assert!((again.energy - s.energy).abs() <= 1e-10 * s.energy.abs());
}

#[test]
fn zero_length_range_returns_the_seed() {
    let m = pos_model();
    let s = exterior_min(&m, 0.05).unwrap();
    let b = trace_branch(&m, (m.lambda(), m.lambda()), &s).unwrap();
    assert_eq!(b.points.len(), 1);
    assert_eq!(b.stop, StopReason::RangeEnd);
    assert_eq!(b.points[0].lambda, m.lambda());
}

#[test]
fn short_trace_stays_on_the_solution_set() {
    let m = pos_model();
    let s = exterior_min(&m, 0.05).unwrap();
    let end = 1.05 * m.lambda();
    let b = trace_branch(&m, (m.lambda(), end), &s).unwrap();
    assert_eq!(b.stop, StopReason::RangeEnd);
    assert!(b.points.iter().all(|p| p.residual <= 1e-6));
    assert!((b.points.last().unwrap().lambda - end).abs() <= 1e-12 * end);
    assert!(b.folds().is_empty());
    // Lower branch: norm grows with λ.
    assert!(b.points.last().unwrap().norm_mu > b.points[0].norm_mu);
}

#[test]
fn empty_diagram() {
    let m = pos_model();
    let rows = bifurcation_diagram(&m, &[], &[m.a()]).unwrap();
    assert!(rows.is_empty());
    let csv = diagram_csv(&rows).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(diagram_svg(&rows, None).starts_with("<svg"));
}
