mod support;

use plap_core::fem::{triangle_density, triangle_j};
use plap_core::mesh::build_domain;
use plap_core::{DomainSpec, FeFunction, FeSpace, VariationalSpace};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{oracle_triangle_density, oracle_triangle_j, rel};

#[test]
fn oracle_reproduces_polynomial_moments() {
    // p = 2: the P1 mass matrix; p = 4 on a constant
    let v = [0.3, -0.8, 1.1];
    let mass = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[0] * v[1] + v[1] * v[2] + v[2] * v[0]) / 6.0;
    assert!(rel(oracle_triangle_j(v, 2.0), mass) < 1e-13);
    assert!(rel(oracle_triangle_j([0.5; 3], 4.0), 0.0625) < 1e-13);
}

#[test]
fn j_kernel_matches_quadrature_on_random_triangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let p = rng.gen_range(1.1..10.0);
        let mut v: [f64; 3] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if k % 4 == 0 {
            v[1] = v[0] * (1.0 + 1e-9);
        }
        if k % 4 == 1 {
            v[2] = v[1] + 1e-12;
        }
        worst = worst.max(rel(triangle_j(v, p), oracle_triangle_j(v, p)));
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn density_kernel_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..40 {
        let p = rng.gen_range(1.1..8.0);
        let mut v: [f64; 3] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if k % 3 == 0 {
            v[2] = v[0];
        }
        let got = triangle_density(v, p);
        let want = oracle_triangle_density(v, p);
        let scale = want.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() <= 1e-9 * scale, "{v:?} p={p}: {got:?} vs {want:?}");
        }
    }
}

fn square_space(n: usize) -> FeSpace {
    FeSpace::new(build_domain(&DomainSpec::square(1.0), n).unwrap()).unwrap()
}

fn random_function(space: &FeSpace, rng: &mut ChaCha8Rng) -> FeFunction {
    FeFunction::new((0..space.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn derivatives_match_central_differences() {
    let space = square_space(200);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for p in [1.5, 2.0, 3.3, 6.0] {
        let u = random_function(&space, &mut rng);
        let dir = random_function(&space, &mut rng);
        let di = space.eval_i_prime(&u, p).unwrap().pair(&dir);
        let dj = space.eval_j_prime(&u, p).unwrap().pair(&dir);
        let h = 1e-5;
        let fd = |f: &dyn Fn(&FeFunction) -> f64| (f(&u.add_scaled(h, &dir)) - f(&u.add_scaled(-h, &dir))) / (2.0 * h);
        let fdi = fd(&|v| space.eval_i(v, p).unwrap());
        let fdj = fd(&|v| space.eval_j(v, p).unwrap());
        assert!(rel(di, fdi) < 1e-4, "p={p}: {di} vs {fdi}");
        assert!(rel(dj, fdj) < 1e-4, "p={p}: {dj} vs {fdj}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn j_is_p_homogeneous(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, s in -4.0..4.0f64, p in 1.05..10.0f64) {
        let v = [a, b, c];
        let scaled = triangle_j([s * a, s * b, s * c], p);
        let expected = s.abs().powf(p) * triangle_j(v, p);
        prop_assert!((scaled - expected).abs() <= 1e-12 * expected.max(1e-300));
    }

    #[test]
    fn j_is_permutation_invariant_and_bounded(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, p in 1.05..10.0f64) {
        let j = triangle_j([a, b, c], p);
        prop_assert!((j - triangle_j([c, a, b], p)).abs() <= 1e-13 * j.max(1e-300));
        let m = a.abs().max(b.abs()).max(c.abs()).powf(p);
        prop_assert!(j >= 0.0 && j <= m * (1.0 + 1e-12));
    }

    #[test]
    fn density_pairs_to_j(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, p in 1.05..10.0f64) {
        let d = triangle_density([a, b, c], p);
        let pair = d[0] * a + d[1] * b + d[2] * c;
        let j = triangle_j([a, b, c], p);
        prop_assert!((pair - j).abs() <= 1e-11 * j.max(1e-300));
    }

    #[test]
    fn euler_identities_on_a_mesh(seed in 0u64..1000, p in 1.1..8.0f64) {
        let space = square_space(60);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_function(&space, &mut rng);
        let i = space.eval_i(&u, p).unwrap();
        let j = space.eval_j(&u, p).unwrap();
        prop_assert!((space.eval_i_prime(&u, p).unwrap().pair(&u) - p * i).abs() <= 1e-10 * p * i);
        prop_assert!((space.eval_j_prime(&u, p).unwrap().pair(&u) - p * j).abs() <= 1e-10 * p * j);
        let s = space.scale_to_s(&u, p).unwrap();
        prop_assert!((space.eval_j(&s, p).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((space.rayleigh(&s, p).unwrap() - i / j).abs() <= 1e-10 * i / j);
    }
}
