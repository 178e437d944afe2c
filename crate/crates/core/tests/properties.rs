use honeycomb_edge::bulk::{assemble_bloch, BlochProblem, Flavor, Perturbation};
use honeycomb_edge::dirac1d::{bound_states, BoundStateOptions, DiracGrid};
use honeycomb_edge::edge::{BoundaryCondition, RibbonDiscretization};
use honeycomb_edge::lattice::{build_lattice, classify_edge, edge_frame, high_symmetry_points, EdgeClass, Valley};
use honeycomb_edge::linalg::dense::{eigvalsh, hermiticity_residual};
use honeycomb_edge::potentials::{default_a, default_honeycomb_v, default_w, tanh_wall, Symmetry};
use honeycomb_edge::{EdgeProblem, EffectiveDiracModel, FourierPotential, Vec2};
use num_complex::Complex;
use proptest::prelude::*;
use std::f64::consts::TAU;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn coprime() -> impl Strategy<Value = (i64, i64)> {
    (-20i64..=20, -20i64..=20).prop_filter("coprime", |&(a, b)| gcd(a, b) == 1)
}

fn potential(max_cutoff: i64) -> impl Strategy<Value = FourierPotential> {
    prop::collection::vec(((-max_cutoff..=max_cutoff, -max_cutoff..=max_cutoff), (-2.0f64..2.0, -2.0f64..2.0)), 1..12)
        .prop_map(|v| FourierPotential::from_coeffs(v.into_iter().map(|(k, (re, im))| (k, Complex::new(re, im)))))
}

/// distance from x to 2pi Z
fn dist_2pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    r.min(TAU - r)
}

#[test]
fn edge_class_follows_mod_three_rule() {
    for a in -20i64..=20 {
        for b in -20i64..=20 {
            match classify_edge(a, b) {
                Ok(c) => {
                    assert_eq!(gcd(a, b), 1);
                    let want = if (a - b) % 3 == 0 { EdgeClass::ArmchairType } else { EdgeClass::ZigzagType };
                    assert_eq!(c, want, "({a}, {b})");
                }
                Err(_) => assert_ne!(gcd(a, b), 1, "({a}, {b})"),
            }
        }
    }
}

proptest! {
    #[test]
    fn frame_is_dual((a, b) in coprime()) {
        let lat = build_lattice::<f64>();
        let f = edge_frame(&lat, a, b).unwrap();
        prop_assert_eq!(f.a1 * f.b2 - f.a2 * f.b1, 1);
        let k = [f.k_e1, f.k_e2];
        let v = [f.v_e1, f.v_e2];
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((k[i].dot(v[j]) - want).abs() < 1e-10);
            }
        }
        // ell: dual to v_e1, orthogonal to K2, same orientation as (K1, K2)
        prop_assert!((f.ell.dot(f.v_e1) - 1.0).abs() < 1e-10);
        prop_assert!(f.ell.dot(f.k_e2).abs() < 1e-10 * f.k_e2.norm_sqr().max(1.0));
        let d = f.k_e1.det(f.k_e2);
        prop_assert!((f.ell.det(f.k_e2) - d).abs() < 1e-9);
        prop_assert!((d + 1.0).abs() < 1e-9);
    }

    #[test]
    fn valley_kpar_is_k_dot_v1((a, b) in coprime()) {
        let lat = build_lattice::<f64>();
        let f = edge_frame(&lat, a, b).unwrap();
        let hs = high_symmetry_points(&lat);
        prop_assert!(dist_2pi(hs.k.dot(f.v_e1) - f.kpar(Valley::K)) < 1e-9);
        prop_assert!(dist_2pi(hs.kp.dot(f.v_e1) - f.kpar(Valley::Kp)) < 1e-9);
        let gap = hs.k - hs.kp;
        if f.edge_class == EdgeClass::ArmchairType {
            // valleys share k_par and sit 2pi/3 apart along K2
            prop_assert!(dist_2pi(gap.dot(f.v_e1)) < 1e-9);
            prop_assert!((dist_2pi(gap.dot(f.v_e2)) - TAU / 3.0).abs() < 1e-9);
        } else {
            prop_assert!(dist_2pi(gap.dot(f.v_e1)) > 1.0);
        }
    }

    #[test]
    fn grid_round_trip(p in potential(3)) {
        let back = FourierPotential::project_grid(&p.sample_grid(8), 8, 3);
        prop_assert!(back.distance(&p) < 1e-12 * p.l2_norm().max(1.0));
    }

    #[test]
    fn symmetry_operations_commute(p in potential(4)) {
        let pc = p.apply_symmetry(Symmetry::C).apply_symmetry(Symmetry::P);
        let cp = p.apply_symmetry(Symmetry::P).apply_symmetry(Symmetry::C);
        prop_assert!(pc.distance(&cp) < 1e-14);
        let r = p.apply_symmetry(Symmetry::R);
        prop_assert!((r.l2_norm() - p.l2_norm()).abs() < 1e-12);
        let r3 = r.apply_symmetry(Symmetry::R).apply_symmetry(Symmetry::R);
        prop_assert!(r3.distance(&p) < 1e-14);
        prop_assert!(p.apply_symmetry(Symmetry::P).apply_symmetry(Symmetry::P).distance(&p) < 1e-14);
    }

    #[test]
    fn rotation_acts_on_points(p in potential(2), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        // (R f)(x) = f(R* x) with R* the inverse rotation
        let lat = build_lattice::<f64>();
        let pt = Vec2::new(x, y);
        let lhs = p.apply_symmetry(Symmetry::R).evaluate(&lat, pt);
        let rhs = p.evaluate(&lat, pt.rotate().rotate());
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn bloch_matrix_is_hermitian(kx in -3.0f64..3.0, ky in -3.0f64..3.0, s in -0.5f64..0.5, c in proptest::bool::ANY) {
        let lat = build_lattice::<f64>();
        let (flavor, field) = if c {
            (Flavor::CBreaking, default_a(1.0).unwrap())
        } else {
            (Flavor::PBreaking, default_w(1.0).unwrap())
        };
        let prob = BlochProblem {
            potential: default_honeycomb_v(10.0).unwrap(),
            k: Vec2::new(kx, ky),
            cutoff: 3,
            perturbation: Some(Perturbation { flavor, field, strength: s }),
        };
        let h = assemble_bloch(&lat, &prob).unwrap();
        prop_assert!(hermiticity_residual(&h) < 1e-12);
    }
}

fn model(theta: f64, v: f64) -> EffectiveDiracModel {
    EffectiveDiracModel {
        v_f_valley: v,
        k2_norm: 1.0,
        theta_valley: theta,
        wall: tanh_wall(),
        valley: Valley::K,
        flavor: Flavor::PBreaking,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dirac_levels_follow_mass_law(
        g in (0.3f64..3.8).prop_filter("level near threshold", |g| (g.fract() - 0.5).abs() < 0.35),
        v in 0.5f64..2.0,
        neg_theta in proptest::bool::ANY,
        neg_v in proptest::bool::ANY,
        mu in -1.0f64..1.0,
    ) {
        let v = if neg_v { -v } else { v };
        let theta = g * v.abs() * if neg_theta { -1.0 } else { 1.0 };
        let m = model(theta, v);
        let grid = DiracGrid::for_model(&m);
        let opts = BoundStateOptions::default();
        let s0 = bound_states(&m, 0.0, &grid, &opts).unwrap();
        let s1 = bound_states(&m, mu, &grid, &opts).unwrap();
        // odd and independent of mu
        prop_assert!(s0.n_pairs().is_some());
        prop_assert_eq!(s0.bound_states.len(), s1.bound_states.len());
        let mass = m.mass(mu);
        for (z, t) in s0.values().iter().zip(s1.values()) {
            let want = z * z + mass * mass;
            prop_assert!((t * t - want).abs() < 1e-10 * want.max(1.0), "{} {}", t * t, want);
            prop_assert!(t.abs() < m.gap_edge(mu));
        }
    }
}

fn ribbon(flavor: Flavor, frame: (i64, i64), delta: f64, modes: usize, l_cells: usize, n_perp: usize) -> EdgeProblem {
    let lat = build_lattice();
    let field = match flavor {
        Flavor::PBreaking => default_w(1.0).unwrap(),
        Flavor::CBreaking => default_a(1.0).unwrap(),
    };
    EdgeProblem {
        lattice: lat,
        potential: default_honeycomb_v(10.0).unwrap(),
        flavor,
        field,
        wall: tanh_wall(),
        delta,
        frame: edge_frame(&lat, frame.0, frame.1).unwrap(),
        ribbon: RibbonDiscretization { modes, l_cells, n_perp, fd_order: 8, bc: BoundaryCondition::Dirichlet },
    }
}

fn flavor_of(c: bool) -> Flavor {
    if c {
        Flavor::CBreaking
    } else {
        Flavor::PBreaking
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ribbon_matrix_is_hermitian(
        k in -7.0f64..7.0,
        delta in 0.25f64..0.6,
        c in proptest::bool::ANY,
        frame in prop::sample::select(vec![(1i64, 0i64), (1, 1), (2, 1), (1, -2)]),
    ) {
        let p = ribbon(flavor_of(c), frame, delta, 3, 40, 8);
        prop_assert!(p.assemble(k).unwrap().hermiticity_residual() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn parity_breaking_ribbon_is_even_in_kpar(k in 0.1f64..3.0, frame in prop::sample::select(vec![(1i64, 0i64), (1, 1)])) {
        // complex conjugation maps k_par to -k_par when only parity is broken
        let p = ribbon(Flavor::PBreaking, frame, 0.3, 2, 34, 3);
        let a = eigvalsh(&p.assemble(k).unwrap().to_dense()).unwrap();
        let b = eigvalsh(&p.assemble(-k).unwrap().to_dense()).unwrap();
        let dev = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(dev < 1e-9, "{}", dev);
    }
}
