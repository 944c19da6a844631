use confint::dynamics::Particle;
use confint::series::{
    modified_altered_hamiltonian, modified_conformal_factor, modified_conformal_hamiltonian, proposed_integrator,
    solve_energy, SeriesPotential, SeriesTable, TruncationOrder,
};
use confint::variational::{
    discrete_lagrangian, reference_trajectory, symplectic_step, trajectory, LagrangianKind, ReferenceConfig,
    StepperConfig,
};
use confint::PhaseState;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn state() -> impl Strategy<Value = PhaseState> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64].prop_map(|[x, y, px, py]| PhaseState::planar(x, y, px, py))
}

fn particles() -> [Particle; 2] {
    [Particle::harmonic(), Particle::free()]
}

fn kind() -> impl Strategy<Value = LagrangianKind> {
    prop::sample::select(LagrangianKind::ALL.to_vec())
}

fn table() -> impl Strategy<Value = SeriesTable> {
    prop::sample::select(SeriesTable::all().collect::<Vec<_>>())
}

fn central(f: impl Fn(&PhaseState) -> f64, s: &PhaseState, i: usize, eps: f64) -> f64 {
    let mut e = [0.0; 4];
    e[i] = 1.0;
    (f(&s.displaced(&e, eps).unwrap()) - f(&s.displaced(&e, -eps).unwrap())) / (2.0 * eps)
}

fn ell(l: u8) -> TruncationOrder {
    TruncationOrder::new(l).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradients_match_finite_differences(s in state()) {
        for p in particles() {
            let sys = p.system();
            let gh = sys.grad_hamiltonian(&s).unwrap();
            let gn = sys.grad_conformal_factor(&s).unwrap();
            for i in 0..4 {
                let fh = central(|t| sys.hamiltonian(t).unwrap(), &s, i, 1e-5);
                let fn_ = central(|t| sys.conformal_factor(t).unwrap(), &s, i, 1e-5);
                prop_assert!((gh[i] - fh).abs() <= 1e-6 * gh[i].abs().max(1.0));
                prop_assert!((gn[i] - fn_).abs() <= 1e-6 * gn[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn altered_field_agrees_on_level_set(s in state()) {
        for p in particles() {
            let sys = p.system();
            let e = sys.hamiltonian(&s).unwrap();
            let a = sys.altered_vector_field(&s, e).unwrap().to_vec();
            let b = sys.vector_field(&s).unwrap().to_vec();
            let d = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d <= 1e-12, "{d:e}");
        }
    }

    #[test]
    fn conformal_factor_is_positive(s in state()) {
        for p in particles() {
            prop_assert!(p.system().conformal_factor(&s).unwrap() > 0.0);
        }
    }

    #[test]
    fn field_is_tangent_to_energy_levels(s in state()) {
        for p in particles() {
            let sys = p.system();
            let g = sys.grad_hamiltonian(&s).unwrap();
            let v = sys.vector_field(&s).unwrap().to_vec();
            let dot: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-12, "{dot:e}");
        }
    }

    #[test]
    fn discrete_lagrangians_are_symmetric(s in state(), k in kind(), e in 0.0..2.0f64) {
        let [x0, y0, x1, y1] = s.as_planar();
        for p in particles() {
            let a = discrete_lagrangian(k, &p, [x0, y0], [x1, y1], 0.25, e);
            let b = discrete_lagrangian(k, &p, [x1, y1], [x0, y0], 0.25, e);
            prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn modified_coefficients_are_consistent(s in state(), t in table(), e in 0.0..2.0f64) {
        let sys = t.particle().system();
        let h = sys.hamiltonian(&s).unwrap();
        let n = sys.conformal_factor(&s).unwrap();
        prop_assert!((t.e2(&s) - t.k2(&s, h) / n).abs() <= 1e-12);
        prop_assert!((t.n2(&s) + t.dk2_denergy(&s, h)).abs() <= 1e-12);
        // k2 is quadratic in E: its E-derivative is exact for any E
        let fd = (t.k2(&s, e + 0.5) - t.k2(&s, e - 0.5)) / 1.0;
        prop_assert!((t.dk2_denergy(&s, e) - fd).abs() <= 1e-12);
    }

    #[test]
    fn solve_energy_is_a_root_close_to_the_series(s in state(), t in table()) {
        let h = 0.1;
        let e = solve_energy(&t, ell(2), &s, h).unwrap();
        prop_assert!(modified_altered_hamiltonian(&t, ell(2), &s, h, e).unwrap().abs() <= 1e-13);
        let series = modified_conformal_hamiltonian(&t, ell(2), &s, h).unwrap();
        prop_assert!((e - series).abs() <= 1e-4, "{e} vs {series}");
    }
}

#[test]
fn appendix_factor_identities() {
    use LagrangianKind::*;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for pot in SeriesPotential::ALL {
        let n2 = |k: LagrangianKind, s: &PhaseState| SeriesTable::new(pot, k).n2(s);
        for _ in 0..100 {
            let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let s = PhaseState::planar(c[0], c[1], c[2], c[3]);
            assert!((n2(M, &s) - n2(MT, &s)).abs() <= 1e-12);
            assert!((n2(TM, &s) - n2(TT, &s)).abs() <= 1e-12);
            assert!((n2(TT, &s) - n2(T, &s)).abs() <= 1e-12);
        }
    }
}

#[test]
fn reference_conserves_energy() {
    let s0 = PhaseState::planar(0.2, -0.4, 0.9, 0.6);
    for p in particles() {
        let sys = p.system();
        let traj = reference_trajectory(sys, &s0, 0.5, 20, &ReferenceConfig::default()).unwrap();
        let h0 = sys.hamiltonian(&s0).unwrap();
        for s in &traj {
            assert!((sys.hamiltonian(s).unwrap() - h0).abs() <= 1e-8);
        }
    }
}

#[test]
fn steps_are_deterministic() {
    let cfg = StepperConfig::new(0.25).unwrap();
    let s = PhaseState::planar(0.1, 0.3, -0.5, 0.8);
    for k in LagrangianKind::ALL {
        let a = symplectic_step(k, &Particle::harmonic(), &s, &cfg, 0.7).unwrap();
        let b = symplectic_step(k, &Particle::harmonic(), &s, &cfg, 0.7).unwrap();
        assert_eq!(
            a.coords().iter().map(|c| c.to_bits()).collect::<Vec<_>>(),
            b.coords().iter().map(|c| c.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn odd_orders_alias_even_orders() {
    let cfg = StepperConfig::new(0.25).unwrap();
    let s = PhaseState::planar(0.0, 0.0, 1.0, 1.0);
    for t in SeriesTable::all() {
        for (odd, even) in [(1, 0), (3, 2)] {
            let a = proposed_integrator(&t, ell(odd), &s, &cfg, 20).unwrap();
            let b = proposed_integrator(&t, ell(even), &s, &cfg, 20).unwrap();
            assert_eq!(a, b);
        }
        let plain = trajectory(t.kind(), t.particle(), &s, &cfg, t.particle().system().hamiltonian(&s).unwrap(), 20).unwrap();
        assert_eq!(proposed_integrator(&t, ell(0), &s, &cfg, 20).unwrap(), plain);
    }
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo
}

#[test]
fn modified_quantities_are_better_conserved() {
    let h = 0.25;
    let cfg = StepperConfig::new(h).unwrap();
    let s0 = PhaseState::planar(0.0, 0.0, 1.0, 1.0);
    for kind in LagrangianKind::ALL {
        let t = SeriesTable::new(SeriesPotential::Harmonic, kind);
        let e0 = modified_conformal_hamiltonian(&t, ell(2), &s0, h).unwrap();
        let traj = proposed_integrator(&t, ell(2), &s0, &cfg, 200).unwrap();
        let kmod: Vec<f64> = traj.iter().map(|s| modified_altered_hamiltonian(&t, ell(2), s, h, e0).unwrap()).collect();
        let k0: Vec<f64> = traj
            .iter()
            .map(|s| t.particle().system().altered_hamiltonian(s, e0).unwrap())
            .collect();
        assert!(spread(&kmod) <= spread(&k0), "{kind}: {} vs {}", spread(&kmod), spread(&k0));
        // no secular drift: the two halves fluctuate alike
        let (a, b) = k0.split_at(100);
        assert!(spread(b) <= 1.5 * spread(a), "{kind}");
        for s in &traj {
            assert!(modified_conformal_factor(&t, ell(2), s, h).unwrap() > 0.0);
        }
    }
}
