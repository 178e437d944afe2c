use honeycomb_edge::bulk::Flavor;
use honeycomb_edge::dirac1d::zero_branch_operator;
use honeycomb_edge::edge::{
    edge_states_at, gap_at, in_gap_interface_states, multiscale_kpar, multiscale_state, overlap, residual_order,
    MultiscaleModes, ZeroModeEnvelope, EIGEN_WIDTHS,
};
use honeycomb_edge::lattice::Valley;
use honeycomb_edge::validation::{ValidationConfig, ValidationContext};
use honeycomb_edge::{DomainWall, EdgeSetup};
use std::sync::OnceLock;

fn ctx() -> &'static ValidationContext {
    static CTX: OnceLock<ValidationContext> = OnceLock::new();
    CTX.get_or_init(|| ValidationContext::new(ValidationConfig::default()).unwrap())
}

fn zigzag() -> EdgeSetup {
    ctx().setup(Flavor::PBreaking, (1, 0)).unwrap()
}

fn solver() -> &'static honeycomb_edge::linalg::lanczos::InteriorOptions {
    &ctx().config.solver
}

#[test]
fn zero_branch_state_sits_on_the_interface() {
    let s = zigzag();
    let d = 0.4;
    let p = s.problem(d, EIGEN_WIDTHS);
    let pt = in_gap_interface_states(&p, &s.dirac, s.frame.kpar_k, &s.filter(d), solver()).unwrap();
    let states: Vec<_> = pt.in_gap_interface().collect();
    // N = 0 for the default parity-breaking setup: one state per valley
    assert_eq!(states.len(), 1, "{:?}", pt.states.iter().map(|x| x.energy).collect::<Vec<_>>());
    assert!(states[0].interface_mass > 0.9);
    let e_d = p.discrete_dirac_energy(Valley::K, s.dirac.b_star).unwrap();
    assert!((states[0].energy - e_d).abs() < 0.1 * d * s.theta_gap().unwrap());
}

#[test]
fn uniform_mass_has_no_interface_states() {
    let mut s = zigzag();
    s.wall = DomainWall::uniform(1.0);
    let d = 0.4;
    let p = s.problem(d, EIGEN_WIDTHS);
    let pt = in_gap_interface_states(&p, &s.dirac, s.frame.kpar_k, &s.filter(d), solver()).unwrap();
    assert_eq!(pt.in_gap_interface().count(), 0);
}

#[test]
fn interface_energies_do_not_move_with_ribbon_width() {
    let s = ctx().setup(Flavor::CBreaking, (1, 0)).unwrap();
    let d = 0.4;
    let p = s.problem(d, EIGEN_WIDTHS);
    let mut wide = p.clone();
    wide.ribbon = p.ribbon.with_width(2 * p.ribbon.l_cells);
    let f = s.filter(d);
    let e = |q| -> Vec<f64> {
        in_gap_interface_states(q, &s.dirac, s.frame.kpar_k, &f, solver()).unwrap().in_gap_interface().map(|x| x.energy).collect()
    };
    let (a, b) = (e(&p), e(&wide));
    assert_eq!(a.len(), 3);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-7, "{x} {y}");
    }
}

#[test]
fn continuum_stays_outside_the_gap() {
    let s = zigzag();
    let d = 0.4;
    let p = s.problem(d, EIGEN_WIDTHS);
    let k = s.frame.kpar_k + 0.1;
    let gap = gap_at(&p, &s.dirac, k, 64).unwrap();
    let w = 2.0 * d * s.theta_gap().unwrap();
    let window = (s.dirac.e_d - w, s.dirac.e_d + w);
    let f = s.filter(d);
    let pt = edge_states_at(&p, k, window, Some(gap), &f, solver()).unwrap();
    let bulk: Vec<f64> =
        pt.states.iter().filter(|x| !x.interface && x.boundary_mass <= f.boundary_mass).map(|x| x.energy).collect();
    assert!(!bulk.is_empty());
    for e in bulk {
        assert!(e <= gap.0 + 1e-4 || e >= gap.1 - 1e-4, "{e} in {gap:?}");
    }
}

#[test]
fn zero_branch_slope_follows_the_dirac_operator() {
    let s = zigzag();
    let d = 0.2;
    let p = s.problem(d, EIGEN_WIDTHS);
    let m = s.model(Valley::K);
    let mu = 0.2 * m.theta_gap() * m.k2_norm / m.v_f_valley.abs();
    let energy = |mu: f64| {
        let k = multiscale_kpar(&s.frame, Valley::K, d, mu);
        let pt = in_gap_interface_states(&p, &s.dirac, k, &s.filter(d), solver()).unwrap();
        let es: Vec<f64> = pt.in_gap_interface().map(|x| x.energy).collect();
        assert_eq!(es.len(), 1);
        es[0]
    };
    let slope = (energy(mu) - energy(-mu)) / (2.0 * d * mu);
    let want = (zero_branch_operator(m, mu) - zero_branch_operator(m, -mu)) / (2.0 * mu);
    assert!((slope - want).abs() < 0.1 * want.abs(), "{slope} {want}");
    // the sign -sgn(theta^K) v_F / |K2| is not what the ribbon shows
    let opposite = -m.theta_valley.signum() * m.v_f_valley / m.k2_norm;
    assert!(slope * opposite < 0.0);
}

#[test]
fn multiscale_state_matches_the_ribbon_eigenvector() {
    let s = zigzag();
    let d = 0.2;
    let p = s.problem(d, EIGEN_WIDTHS);
    let modes = MultiscaleModes::new(&p.lattice, &p.potential, &s.dirac, &p.frame, Valley::K, p.flavor, &p.field).unwrap();
    let env = ZeroModeEnvelope::new(s.model(Valley::K));
    let psi = multiscale_state(&p, &s.dirac, &modes, &env, 0.0, true);
    let pt = in_gap_interface_states(&p, &s.dirac, s.frame.kpar_k, &s.filter(d), solver()).unwrap();
    let exact = &pt.in_gap_interface().next().unwrap().vector;
    let o = overlap(&psi, exact);
    assert!(o > 0.99, "{o}");

    // envelope decay: mass outside |delta t2| <= 8 / g is negligible
    let prof = p.profile(&psi);
    let total: f64 = prof.iter().sum();
    let r = 8.0 / (d * env.rate);
    let outside: f64 = prof.iter().enumerate().filter(|(i, _)| p.ribbon.t::<f64>(*i).abs() > r).map(|(_, w)| w).sum();
    assert!(outside / total < 1e-6, "{}", outside / total);
}

#[test]
fn wrong_energy_spoils_the_residual() {
    let s = zigzag();
    let env = ZeroModeEnvelope::new(s.model(Valley::K));
    let good = residual_order(&s, Valley::K, &env, 0.0, 0.0, &[0.4, 0.2], 0.0).unwrap();
    assert!(good.order > 1.5, "{good:?}");
    match residual_order(&s, Valley::K, &env, 0.0, 0.0, &[0.4, 0.2], 0.1) {
        Err(_) => {}
        Ok(r) => {
            assert!(r.order < 1.0, "{r:?}");
            assert!(r.residuals.iter().all(|&x| x > 0.05), "{r:?}");
        }
    }
}
