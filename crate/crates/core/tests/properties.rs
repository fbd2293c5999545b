mod common;

use common::*;
use cubelap::audit::{audit, SignSampler};
use cubelap::spectral::{
    apply_laplacian_cubed, apply_transport, build_propagator, build_propagator_with, forward, forward_with, inverse,
    inverse_with,
};
use cubelap::stepper::{run_with, RunConfig};
use cubelap::system::Monomial;
use cubelap::{load_system, serialize_system, Exec, Field, Grid, MatrixN, ReactionSpec, SpectrumField, SystemSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_grid() -> impl Strategy<Value = Grid> {
    (1usize..=3, 0usize..3, 1.0f64..20.0).prop_map(|(d, e, b)| {
        let n = if d == 3 { 8 } else { 8 << e };
        Grid::new(d, n, b).unwrap()
    })
}

fn field_on(grid: Grid, ncomp: usize) -> impl Strategy<Value = Field> {
    let len = grid.len() * ncomp;
    proptest::collection::vec(-10.0f64..10.0, len).prop_map(move |v| Field::new(grid.clone(), ncomp, v).unwrap())
}

fn grid_and_fields() -> impl Strategy<Value = (Field, Field, Field)> {
    (small_grid(), 1usize..=3).prop_flat_map(|(g, nc)| {
        (field_on(g.clone(), nc), field_on(g.clone(), nc), field_on(g, nc))
    })
}

fn max_rel(a: &Field, b: &Field) -> f64 {
    a.max_abs_diff(b).unwrap() / a.max_abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inner_product_symmetric_bilinear_positive((f, g, h) in grid_and_fields(), a in -3.0f64..3.0) {
        let fg = f.inner_product(&g).unwrap();
        let gf = g.inner_product(&f).unwrap();
        prop_assert!((fg - gf).abs() <= 1e-12 * (1.0 + fg.abs()));
        let combo = Field::new(
            f.grid().clone(),
            f.ncomp(),
            f.values().iter().zip(g.values()).map(|(x, y)| a * x + y).collect(),
        ).unwrap();
        let lhs = combo.inner_product(&h).unwrap();
        let rhs = a * f.inner_product(&h).unwrap() + g.inner_product(&h).unwrap();
        let scale = f.max_abs() * h.max_abs() * f.grid().box_len().powi(f.grid().d() as i32) * 10.0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + scale));
        prop_assert!(f.inner_product(&f).unwrap() >= 0.0);
        let z = Field::zeros(f.grid(), f.ncomp());
        prop_assert_eq!(z.inner_product(&z).unwrap(), 0.0);
    }

    #[test]
    fn transform_roundtrip_and_symmetry((f, _, _) in grid_and_fields()) {
        let s = forward(&f);
        prop_assert!(max_rel(&f, &inverse(&s)) < 1e-12);
        let scale = s.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(s.conjugate_symmetry_defect() <= 1e-12 * scale);
    }

    #[test]
    fn parseval((f, _, _) in grid_and_fields()) {
        let e = f.inner_product(&f).unwrap();
        let p = forward(&f).parseval_energy();
        prop_assert!((e - p).abs() <= 1e-10 * e.max(1e-300));
    }

    #[test]
    fn multipliers_keep_conjugate_symmetry((f, _, _) in grid_and_fields(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nc = f.ncomp();
        let s = forward(&f);
        let a = random_coercive(&mut rng, nc);
        let gammas: Vec<MatrixN> = (0..f.grid().d()).map(|_| random_matrix(&mut rng, nc, 1.0)).collect();
        for out in [apply_laplacian_cubed(&s, &a).unwrap(), apply_transport(&s, &gammas).unwrap()] {
            let scale = out.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(out.conjugate_symmetry_defect() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn config_roundtrip(seed in 0u64..10_000, d in 1usize..=3, nc in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_coercive(&mut rng, nc);
        let gammas: Vec<MatrixN> = (0..d).map(|_| random_matrix(&mut rng, nc, 2.0)).collect();
        let reaction = match seed % 3 {
            0 => ReactionSpec::Zero,
            1 => ReactionSpec::linear(random_matrix(&mut rng, nc, 1.0)),
            _ => ReactionSpec::Polynomial {
                terms: (0..nc)
                    .map(|k| vec![Monomial { coeff: 0.5 + k as f64, exponents: (0..nc).map(|j| (j + k) as u32 % 3).collect() }])
                    .collect(),
            },
        };
        let spec = SystemSpec::new(d, nc, a, gammas, reaction).unwrap();
        let back = load_system(&serialize_system(&spec, None)).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn validated_specs_are_coercive(entries in proptest::collection::vec(-2.0f64..2.0, 9)) {
        let a = MatrixN::new(3, entries).unwrap();
        if let Ok(spec) = SystemSpec::new(1, 3, a, vec![MatrixN::zeros(3)], ReactionSpec::Zero) {
            let s = spec.a().to_dmatrix();
            let sym = (&s + s.transpose()) * 0.5;
            prop_assert!(sym.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn propagator_semigroup(seed in 0u64..10_000, d in 1usize..=2, nc in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(d, 16, 8.0).unwrap();
        let spec = SystemSpec::new(
            d, nc,
            random_coercive(&mut rng, nc),
            (0..d).map(|_| random_matrix(&mut rng, nc, 1.0)).collect(),
            ReactionSpec::linear(random_matrix(&mut rng, nc, 1.0)),
        ).unwrap();
        let dt = 1e-3;
        let p1 = build_propagator(&spec, &grid, dt, true).unwrap();
        let p2 = build_propagator(&spec, &grid, 2.0 * dt, true).unwrap();
        for i in 0..grid.len() {
            let sq = p1.mode_matrix(i) * p1.mode_matrix(i);
            let diff = (sq - p2.mode_matrix(i)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-10, "mode {} differs by {}", i, diff);
        }
    }

    #[test]
    fn propagator_is_contractive(seed in 0u64..10_000, d in 1usize..=2, nc in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(d, 16, 8.0).unwrap();
        let spec = SystemSpec::new(
            d, nc,
            random_coercive(&mut rng, nc),
            (0..d).map(|_| random_symmetric(&mut rng, nc, 1.0)).collect(),
            ReactionSpec::Zero,
        ).unwrap();
        let p = build_propagator(&spec, &grid, 0.01, false).unwrap();
        for i in 0..grid.len() {
            let (_, t) = p.mode_matrix(i).schur().unpack();
            let radius = t.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(radius <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn audit_is_pure(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = SystemSpec::new(
            2, 2,
            random_coercive(&mut rng, 2),
            vec![random_matrix(&mut rng, 2, 1.0), MatrixN::zeros(2)],
            ReactionSpec::Polynomial {
                terms: vec![
                    vec![Monomial { coeff: 1.0, exponents: vec![1, 1] }, Monomial { coeff: -0.5, exponents: vec![0, 2] }],
                    vec![Monomial { coeff: 0.3, exponents: vec![1, 0] }],
                ],
            },
        ).unwrap();
        let s = SignSampler::with_seed(seed);
        prop_assert_eq!(audit(&spec, &s, 0.0).unwrap(), audit(&spec, &s, 0.0).unwrap());
    }
}

#[test]
fn plane_wave_symbol_identity() {
    let grid = Grid::new(2, 16, 5.0).unwrap();
    let len = grid.len();
    for i in (0..len).step_by(7) {
        let mut coeffs = vec![c(0.0, 0.0); len];
        coeffs[i] = c(1.0, 0.0);
        let s = SpectrumField::new(grid.clone(), 1, coeffs).unwrap();
        let out = apply_laplacian_cubed(&s, &MatrixN::identity(1)).unwrap();
        let (even, _) = wavevector(&grid, i);
        let q: f64 = even.iter().map(|k| k * k).sum();
        let expect = -q.powi(3);
        assert!((out.coeffs()[i].re - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        assert!(out.coeffs().iter().enumerate().all(|(j, z)| j == i || z.norm() == 0.0));
    }
}

#[test]
fn sequential_and_parallel_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = Grid::new(2, 32, 10.0).unwrap();
    let spec = SystemSpec::new(
        2,
        2,
        random_coercive(&mut rng, 2),
        vec![MatrixN::diagonal(&[0.5, -0.5]), MatrixN::zeros(2)],
        ReactionSpec::Polynomial {
            terms: vec![
                vec![Monomial { coeff: 1.0, exponents: vec![2, 0] }, Monomial { coeff: -1.0, exponents: vec![1, 0] }],
                vec![Monomial { coeff: 1.0, exponents: vec![1, 1] }],
            ],
        },
    )
    .unwrap();
    let u0 = random_smooth_field(&mut rng, &grid, 2, 1.0);
    assert_eq!(
        forward_with(&u0, Exec::Sequential).coeffs(),
        forward_with(&u0, Exec::Parallel).coeffs()
    );
    let s = forward(&u0);
    assert_eq!(inverse_with(&s, Exec::Sequential), inverse_with(&s, Exec::Parallel));
    let ps = build_propagator_with(&spec, &grid, 1e-3, false, Exec::Sequential).unwrap();
    let pp = build_propagator_with(&spec, &grid, 1e-3, false, Exec::Parallel).unwrap();
    for i in 0..grid.len() {
        assert_eq!(ps.mode(i), pp.mode(i));
    }
    let rc = RunConfig::new(0.01, 1e-3);
    let a = run_with(&spec, &u0, &rc, Exec::Sequential).unwrap();
    let b = run_with(&spec, &u0, &rc, Exec::Parallel).unwrap();
    let c2 = run_with(&spec, &u0, &rc, Exec::Parallel).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(b.records, c2.records);
    assert_eq!(a.final_state, b.final_state);
}
