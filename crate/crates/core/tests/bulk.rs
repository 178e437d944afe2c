//! Dirac point data against an independent plane-wave oracle built here from scratch.

use faer::Mat;
use honeycomb_edge::bulk::{dirac_point_data, DiracOptions};
use honeycomb_edge::potentials::{default_a, default_honeycomb_v, default_w};
use num_complex::Complex;

const CUTOFF: i64 = 12;

// frozen from the oracle below (V0 = 10, W0 = a0 = 1, cutoff 12)
const E_D: f64 = 9.257087526446;
const V_F: f64 = 3.8240434755;
const THETA_GAP: f64 = 1.032271142987;
const THETA_TILDE_GAP: f64 = 7.513591241582;

struct Oracle {
    kg: Vec<[f64; 2]>,
    index: Vec<(i64, i64)>,
}

impl Oracle {
    fn new() -> Self {
        let index: Vec<(i64, i64)> = (-CUTOFF..=CUTOFF).flat_map(|m| (-CUTOFF..=CUTOFF).map(move |n| (m, n))).collect();
        Self { kg: Vec::new(), index }
    }

    /// dual vectors 2pi (m k1 + n k2) with k1, k2 of the unit-area equilateral lattice
    fn dual(m: i64, n: i64) -> [f64; 2] {
        let a = (2.0 / 3f64.sqrt()).sqrt();
        let s3 = 3f64.sqrt() / 2.0;
        let t = std::f64::consts::TAU * a;
        [t * 0.5 * (m + n) as f64, t * s3 * (m - n) as f64]
    }

    fn k_point() -> [f64; 2] {
        let d = Self::dual(1, -1);
        [d[0] / 3.0, d[1] / 3.0]
    }

    fn at(&mut self, k: [f64; 2]) -> &mut Self {
        self.kg = self.index.iter().map(|&(m, n)| {
            let g = Self::dual(m, n);
            [k[0] + g[0], k[1] + g[1]]
        }).collect();
        self
    }

    /// sum over shell vectors g of c_g exp(i g.x) with the shell of the default potentials
    fn shell(&self, coeff: impl Fn(i64, i64) -> Complex<f64>, weight: impl Fn(usize, usize) -> Complex<f64>) -> Mat<Complex<f64>> {
        let d = self.index.len();
        let mut h = Mat::<Complex<f64>>::zeros(d, d);
        for (i, &(m, n)) in self.index.iter().enumerate() {
            for (j, &(p, q)) in self.index.iter().enumerate() {
                let c = coeff(m - p, n - q);
                if c != Complex::new(0.0, 0.0) {
                    h[(i, j)] = c * weight(i, j);
                }
            }
        }
        h
    }

    fn hamiltonian(&self) -> Mat<Complex<f64>> {
        let one = |_: usize, _: usize| Complex::new(1.0, 0.0);
        let mut h = self.shell(|m, n| cos_shell(m, n) * 10.0, one);
        for (i, q) in self.kg.iter().enumerate() {
            h[(i, i)] += Complex::new(q[0] * q[0] + q[1] * q[1], 0.0);
        }
        h
    }

    fn w(&self) -> Mat<Complex<f64>> {
        self.shell(sin_shell, |_, _| Complex::new(1.0, 0.0))
    }

    /// div(a sigma_2 grad) in plane waves: i a(G - G') (k+G) x (k+G')
    fn divergence(&self) -> Mat<Complex<f64>> {
        let kg = &self.kg;
        self.shell(cos_shell, |i, j| Complex::new(0.0, kg[i][0] * kg[j][1] - kg[i][1] * kg[j][0]))
    }
}

fn cos_shell(m: i64, n: i64) -> Complex<f64> {
    match (m, n) {
        (1, 0) | (-1, 0) | (0, 1) | (0, -1) | (1, 1) | (-1, -1) => Complex::new(0.5, 0.0),
        _ => Complex::new(0.0, 0.0),
    }
}

fn sin_shell(m: i64, n: i64) -> Complex<f64> {
    // sin(g.x) = (e^{ig.x} - e^{-ig.x}) / 2i, with the (1, 1) term entering negatively
    let h = Complex::new(0.0, -0.5);
    match (m, n) {
        (1, 0) | (0, 1) | (-1, -1) => h,
        (-1, 0) | (0, -1) | (1, 1) => -h,
        _ => Complex::new(0.0, 0.0),
    }
}

fn eigh(h: &Mat<Complex<f64>>) -> (Vec<f64>, Mat<Complex<f64>>) {
    let e = h.self_adjoint_eigen(faer::Side::Lower).unwrap();
    let s = e.S().column_vector();
    let vals = (0..h.nrows()).map(|i| s[i].re).collect();
    (vals, e.U().to_owned())
}

/// Index of the lowest degenerate pair among the first bands.
fn degenerate_pair(e: &[f64]) -> usize {
    (1..12).find(|&b| e[b] - e[b - 1] < 1e-7).expect("degenerate pair")
}

/// Eigenvalues of the compression of `op` onto columns b-1, b of `u`.
fn compressed(u: &Mat<Complex<f64>>, b: usize, op: &Mat<Complex<f64>>) -> [f64; 2] {
    let mut m = [[Complex::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let (x, y) = (b - 1 + r, b - 1 + c);
            let n = u.nrows();
            m[r][c] = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| u[(i, x)].conj() * op[(i, j)] * u[(j, y)])
                .sum();
        }
    }
    let tr = (m[0][0].re + m[1][1].re) / 2.0;
    let d = ((m[0][0].re - m[1][1].re).powi(2) / 4.0 + m[0][1].norm_sqr()).sqrt();
    [tr - d, tr + d]
}

#[test]
fn dirac_point_matches_independent_plane_waves() {
    let mut o = Oracle::new();
    let k = Oracle::k_point();
    let h = o.at(k).hamiltonian();
    let (e, u) = eigh(&h);
    let b = degenerate_pair(&e);
    let e_d = (e[b - 1] + e[b]) / 2.0;

    // cone slope from a symmetric difference along two directions
    let r = 1e-4;
    let mut slope = 0.0;
    for phi in [0.3f64, 1.9] {
        let (ep, _) = eigh(&o.at([k[0] + r * phi.cos(), k[1] + r * phi.sin()]).hamiltonian());
        slope += (ep[b] - ep[b - 1]) / (2.0 * r) / 2.0;
    }

    // W and div(a sigma_2 grad) are odd on the pair: eigenvalues +-|coupling|
    o.at(k);
    let th = compressed(&u, b, &o.w());
    let tt = compressed(&u, b, &o.divergence());
    assert!((th[0] + th[1]).abs() < 1e-9 && (tt[0] + tt[1]).abs() < 1e-9);

    let lat = honeycomb_edge::lattice::build_lattice::<f64>();
    let v = default_honeycomb_v(10.0).unwrap();
    let d = dirac_point_data(&lat, &v, Some(&default_w(1.0).unwrap()), Some(&default_a(1.0).unwrap()), CUTOFF as usize, &DiracOptions::default()).unwrap();
    assert_eq!(d.b_star, b);
    assert!((d.e_d - e_d).abs() < 1e-9, "{} {}", d.e_d, e_d);
    assert!((d.v_f - slope).abs() < 1e-5 * slope, "{} {}", d.v_f, slope);
    assert!((d.theta_gap().unwrap() - th[1]).abs() < 1e-9);
    assert!((d.theta_tilde_gap().unwrap() - tt[1]).abs() < 1e-9);

    assert!((e_d - E_D).abs() < 1e-9, "{e_d}");
    assert!((d.v_f - V_F).abs() < 1e-9 * V_F, "{}", d.v_f);
    assert!((th[1] - THETA_GAP).abs() < 1e-9);
    assert!((tt[1] - THETA_TILDE_GAP).abs() < 1e-9);
}
