use kirchhoff_core::functional::{directional_derivative, energy, norm_mu};
use kirchhoff_core::grid::{integrate, unit_sphere_area};
use kirchhoff_core::{rng, Canonical, Grid, GridSpec, Model, ProblemSpec, Sampler, Shape};
use proptest::prelude::*;

fn interval(a: f64, lambda: f64, p: f64) -> Model {
    let mut spec = ProblemSpec::canonical(Canonical::BallP5);
    spec.name = None;
    spec.grid = GridSpec::tensor(1, 1.0, 161);
    spec.omega = Shape::Cube { half_side: 0.5 };
    spec.a = a;
    spec.lambda = lambda;
    spec.p = p;
    Model::new(spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radial_constant_integrates_to_ball_volume(dim in 3usize..6, radius in 0.5f64..4.0, n in 50usize..400) {
        let g = Grid::new(GridSpec::radial(dim, radius, n)).unwrap();
        let v = integrate(&g, &g.sample(|_| 1.0)).unwrap();
        let exact = unit_sphere_area(dim) * radius.powi(dim as i32) / dim as f64;
        prop_assert!((v - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn integration_is_linear(seed in any::<u64>(), s in -3.0f64..3.0) {
        let g = Grid::new(GridSpec::tensor(2, 1.0, 21)).unwrap();
        let mut r = rng::stream(seed, "prop", 0);
        let u = g.field(rng::smooth_field(&g, &mut r, 1.0, false)).unwrap();
        let v = g.field(rng::smooth_field(&g, &mut r, 1.0, false)).unwrap();
        let w = g.field(u.values().iter().zip(v.values()).map(|(a, b)| a + s * b).collect()).unwrap();
        let lhs = integrate(&g, &w).unwrap();
        let rhs = integrate(&g, &u).unwrap() + s * integrate(&g, &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn norm_is_homogeneous(seed in any::<u64>(), s in -5.0f64..5.0) {
        let m = interval(1.0, 5.0, 5.0);
        let mut r = rng::stream(seed, "prop", 1);
        let u = m.grid().field(rng::smooth_field(m.grid(), &mut r, 0.5, false)).unwrap();
        let lhs = norm_mu(&m, &u.scaled(s)).unwrap();
        let rhs = s.abs() * norm_mu(&m, &u).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn derivative_matches_central_difference(
        seed in any::<u64>(),
        a in 0.0f64..5.0,
        lambda in 0.0f64..20.0,
        p in 2.2f64..5.8,
    ) {
        let m = interval(a, lambda, p);
        let g = m.grid();
        let mut r = rng::stream(seed, "prop", 2);
        let u = g.field(rng::smooth_field(g, &mut r, 0.5, false)).unwrap();
        let phi = g.field(rng::smooth_field(g, &mut r, 0.5, false)).unwrap();
        let j = |t: f64| {
            let x = g.field(u.values().iter().zip(phi.values()).map(|(u, p)| u + t * p).collect()).unwrap();
            energy(&m, &x).unwrap().total
        };
        let h = 1e-3;
        let fd = (8.0 * (j(h) - j(-h)) - (j(2.0 * h) - j(-2.0 * h))) / (12.0 * h);
        let d = directional_derivative(&m, &u, &phi).unwrap();
        prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{d} vs {fd}");
    }

    #[test]
    fn energy_is_even(seed in any::<u64>()) {
        let m = interval(1.0, 3.0, 3.0);
        let mut r = rng::stream(seed, "prop", 3);
        let u = m.grid().field(rng::smooth_field(m.grid(), &mut r, 0.5, false)).unwrap();
        let e1 = energy(&m, &u).unwrap().total;
        let e2 = energy(&m, &u.scaled(-1.0)).unwrap().total;
        prop_assert!((e1 - e2).abs() <= 1e-12 * (1.0 + e1.abs()));
    }

    #[test]
    fn config_round_trip(a in 0.01f64..10.0, lambda in 0.0f64..30.0, mu in 1.0f64..1e4, which in 0usize..4) {
        let mut spec = ProblemSpec::canonical(Canonical::ALL[which]);
        spec.a = a;
        spec.lambda = lambda;
        spec.mu = mu;
        let back = ProblemSpec::from_config(&spec.to_config()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), index in 0u64..1000) {
        let g = Grid::new(GridSpec::tensor(1, 1.0, 31)).unwrap();
        let x = rng::smooth_field(&g, &mut rng::stream(seed, "op", index), 1.0, true);
        let y = rng::smooth_field(&g, &mut rng::stream(seed, "op", index), 1.0, true);
        prop_assert_eq!(&x, &y);
        prop_assert!(x.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn zero_field_has_zero_energy() {
    for c in Canonical::ALL {
        let m = Model::new(ProblemSpec::canonical(c)).unwrap();
        assert_eq!(energy(&m, &m.grid().zeros()).unwrap().total, 0.0);
    }
}

#[test]
fn fields_from_other_grids_are_rejected() {
    let m = interval(1.0, 1.0, 3.0);
    let other = Grid::new(GridSpec::tensor(1, 1.0, 163)).unwrap();
    assert!(energy(&m, &other.zeros()).is_err());
}

#[test]
fn constant_f_is_accepted() {
    let m = interval(1.0, 1.0, 3.0).with_f(Sampler::Constant { value: 1.0 });
    assert!(m.f().iter().all(|v| *v == 1.0));
}
