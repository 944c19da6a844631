use confint::bea::{modified_field_coefficients, OneStepMap};
use confint::series::SeriesTable;
use confint::variational::LagrangianKind;
use confint::dynamics::Particle;
use confint::PhaseState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASE_H: f64 = 1e-2;
const LEVELS: usize = 8;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

fn random_states(seed: u64, n: usize) -> Vec<PhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            PhaseState::planar(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect()
}

#[test]
fn first_order_term_vanishes_for_symmetric_maps() {
    let x = PhaseState::planar(0.0, 0.0, 1.0, 1.0);
    for kind in LagrangianKind::ALL {
        let map = OneStepMap::variational(kind, Particle::harmonic(), 1.0);
        let m = modified_field_coefficients(&map, &x, BASE_H, LEVELS).unwrap();
        assert!(norm(&m.f[1]) <= 1e-4, "{kind}: |f1| = {:e}", norm(&m.f[1]));
    }
}

#[test]
fn leading_term_is_the_altered_vector_field() {
    let x = PhaseState::planar(0.3, -0.2, 0.7, 1.1);
    let p = Particle::harmonic();
    let map = OneStepMap::variational(LagrangianKind::TT, p.clone(), 1.0);
    let m = modified_field_coefficients(&map, &x, BASE_H, LEVELS).unwrap();
    let exact = p.system().altered_vector_field(&x, 1.0).unwrap().to_vec();
    assert!(rel_err(&m.f[0], &exact) < 1e-8);
}

#[test]
fn second_order_term_matches_closed_form_midpoint() {
    let x = PhaseState::planar(0.3, -0.2, 0.7, 1.1);
    let table = SeriesTable::new(confint::series::SeriesPotential::Harmonic, LagrangianKind::M);
    let map = OneStepMap::variational(LagrangianKind::M, table.particle().clone(), 1.0);
    let m = modified_field_coefficients(&map, &x, BASE_H, LEVELS).unwrap();
    let oracle = table.k2_vector_field(&x, 1.0);
    let err = rel_err(&m.f[2], &oracle);
    assert!(err <= 1e-3, "relative error {err:e}");
}

#[test]
fn second_order_term_matches_closed_form_all_tables() {
    let states = random_states(11, 5);
    for table in SeriesTable::all() {
        for energy in [0.5, 1.0] {
            let map = OneStepMap::variational(table.kind(), table.particle().clone(), energy);
            for x in &states {
                let m = modified_field_coefficients(&map, x, BASE_H, LEVELS).unwrap();
                let err = rel_err(&m.f[2], &table.k2_vector_field(x, energy));
                assert!(
                    err <= 1e-3,
                    "{} {} E={energy} at {:?}: relative error {err:e}",
                    table.potential(),
                    table.kind(),
                    x.coords()
                );
            }
        }
    }
}

#[test]
fn second_order_term_is_hamiltonian() {
    // f2 = J grad K implies Df2 J is symmetric
    let x = PhaseState::planar(0.2, 0.1, 0.6, -0.4);
    let map = OneStepMap::variational(LagrangianKind::MT, Particle::harmonic(), 1.0);
    let f2 = |s: &PhaseState| modified_field_coefficients(&map, s, BASE_H, LEVELS).unwrap().f[2].clone();
    let eps = 1e-3;
    let mut jac = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let plus = f2(&x.displaced(&e, eps).unwrap());
        let minus = f2(&x.displaced(&e, -eps).unwrap());
        for i in 0..4 {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * eps);
        }
    }
    // (Df2 J)_{ij} = sum_k Df2_{ik} J_{kj}, J = [[0, I], [-I, 0]]
    let mut s = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            s[i][j] = if j < 2 { -jac[i][j + 2] } else { jac[i][j - 2] };
        }
    }
    for i in 0..4 {
        for j in 0..i {
            assert!((s[i][j] - s[j][i]).abs() <= 1e-2, "asymmetry at ({i},{j}): {:e}", s[i][j] - s[j][i]);
        }
    }
}

#[test]
fn doubling_levels_is_stable() {
    let x = PhaseState::planar(-0.1, 0.35, 0.9, 0.2);
    for kind in LagrangianKind::ALL {
        let map = OneStepMap::variational(kind, Particle::free(), 0.5);
        let a = modified_field_coefficients(&map, &x, BASE_H, LEVELS).unwrap();
        let b = modified_field_coefficients(&map, &x, BASE_H, 2 * LEVELS).unwrap();
        let d1: Vec<f64> = a.f[1].iter().zip(&b.f[1]).map(|(p, q)| p - q).collect();
        assert!(norm(&d1) <= 1e-4, "{kind}: f1 moved {:e}", norm(&d1));
        assert!(rel_err(&a.f[2], &b.f[2]) <= 1e-3, "{kind}: f2 moved");
    }
}
