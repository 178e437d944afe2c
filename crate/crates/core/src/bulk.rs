//! Plane-wave Floquet-Bloch solver, Dirac points, gauge-fixed modes and effective couplings.

use crate::error::{Error, Result};
use crate::lattice::{high_symmetry_points, EdgeFrame, LatticeBasis, Valley, Vec2};
use crate::linalg::dense::{column, eigh, eigvalsh};
use crate::potentials::{FourierPotential, Symmetry};
use crate::scalar::{cis, cz, vdot, vnorm, Real};
use faer::Mat;
use num_complex::Complex;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// odd perturbation W, breaks parity
    PBreaking,
    /// divergence-form perturbation div(a sigma_2 grad), breaks conjugation
    CBreaking,
}

/// Plane waves exp(i (k + 2pi(m k1 + n k2)) . x) with |m|, |n| <= cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWaveBasis {
    pub cutoff: usize,
    pub indices: Vec<(i64, i64)>,
}

impl PlaneWaveBasis {
    pub fn new(cutoff: usize) -> Self {
        let c = cutoff as i64;
        let indices = (-c..=c).flat_map(|m| (-c..=c).map(move |n| (m, n))).collect();
        Self { cutoff, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, m: i64, n: i64) -> Option<usize> {
        let c = self.cutoff as i64;
        if m.abs() > c || n.abs() > c {
            return None;
        }
        Some(((m + c) * (2 * c + 1) + (n + c)) as usize)
    }
}

/// Strength-scaled perturbation added to H0: `strength * W` or `strength * div(a sigma_2 grad)`.
#[derive(Clone, Debug)]
pub struct Perturbation<T> {
    pub flavor: Flavor,
    pub field: FourierPotential<T>,
    pub strength: T,
}

#[derive(Clone, Debug)]
pub struct BlochProblem<T> {
    pub potential: FourierPotential<T>,
    pub k: Vec2<T>,
    pub cutoff: usize,
    pub perturbation: Option<Perturbation<T>>,
}

/// Convolution entries sum_{G'} f(G - G') u(G') restricted to the basis.
fn convolution_pairs<'a, T: Real>(
    basis: &'a PlaneWaveBasis,
    f: &'a FourierPotential<T>,
) -> impl Iterator<Item = (usize, usize, Complex<T>)> + 'a {
    let coeffs: Vec<_> = f.iter().filter(|(_, c)| c.norm_sqr() > T::zero()).collect();
    basis.indices.iter().enumerate().flat_map(move |(i, &(m, n))| {
        coeffs
            .clone()
            .into_iter()
            .filter_map(move |((dm, dn), c)| basis.position(m - dm, n - dn).map(|j| (i, j, c)))
    })
}

pub fn assemble_bloch<T: Real>(lat: &LatticeBasis<T>, problem: &BlochProblem<T>) -> Result<Mat<Complex<T>>> {
    let needed = problem
        .potential
        .cutoff()
        .max(problem.perturbation.as_ref().map(|p| p.field.cutoff()).unwrap_or(0));
    if problem.cutoff < needed {
        return Err(Error::CutoffTooSmall { cutoff: problem.cutoff, needed });
    }
    let basis = PlaneWaveBasis::new(problem.cutoff);
    let kg: Vec<Vec2<T>> = basis.indices.iter().map(|&(m, n)| problem.k + lat.dual(m, n)).collect();
    let dim = basis.len();
    let mut h = Mat::<Complex<T>>::zeros(dim, dim);
    for (i, q) in kg.iter().enumerate() {
        h[(i, i)] = Complex::new(q.norm_sqr(), T::zero());
    }
    for (i, j, c) in convolution_pairs(&basis, &problem.potential) {
        h[(i, j)] = h[(i, j)] + c;
    }
    if let Some(p) = &problem.perturbation {
        for (i, j, c) in convolution_pairs(&basis, &p.field) {
            let v = match p.flavor {
                Flavor::PBreaking => c,
                // -(k+G)^T (a sigma_2) (k+G') = i a (k+G) x (k+G')
                Flavor::CBreaking => c * Complex::new(T::zero(), kg[i].det(kg[j])),
            };
            h[(i, j)] = h[(i, j)] + v * p.strength;
        }
    }
    Ok(h)
}

fn problem_at<T: Real>(
    potential: &FourierPotential<T>,
    perturbation: Option<&Perturbation<T>>,
    k: Vec2<T>,
    cutoff: usize,
) -> BlochProblem<T> {
    BlochProblem { potential: potential.clone(), k, cutoff, perturbation: perturbation.cloned() }
}

/// Lowest `n_bands` eigenvalues at each k, in input order.
pub fn band_structure<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    perturbation: Option<&Perturbation<T>>,
    k_list: &[Vec2<T>],
    n_bands: usize,
    cutoff: usize,
) -> Result<Vec<Vec<T>>> {
    let dim = PlaneWaveBasis::new(cutoff).len();
    if n_bands > dim {
        return Err(Error::SolverFailure(format!("{n_bands} bands requested from a {dim}-dimensional basis")));
    }
    k_list
        .par_iter()
        .map(|&k| {
            let h = assemble_bloch(lat, &problem_at(potential, perturbation, k, cutoff))?;
            let mut e = eigvalsh(&h)?;
            e.truncate(n_bands);
            Ok(e)
        })
        .collect()
}

/// Tolerances for Dirac point detection.
#[derive(Clone, Debug)]
pub struct DiracOptions {
    pub tol_deg: f64,
    pub anisotropy_tol: f64,
    pub max_band: usize,
    pub cone_radii: Vec<f64>,
    pub n_dirs: usize,
    pub symmetry_tol: f64,
}

impl Default for DiracOptions {
    fn default() -> Self {
        Self {
            tol_deg: 1e-7,
            anisotropy_tol: 0.05,
            max_band: 12,
            cone_radii: vec![1e-2, 5e-3],
            n_dirs: 8,
            symmetry_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiracLocation<T> {
    pub e_d: T,
    /// 1-based index of the lower band of the touching pair
    pub b_star: usize,
    pub splitting: T,
    pub anisotropy: T,
    pub energies_at_k: Vec<T>,
}

pub fn direction<T: Real>(j: usize, n: usize) -> Vec2<T> {
    let phi = T::TAU() * (T::from_int(j as i64) + T::lit(0.25)) / T::from_int(n as i64);
    Vec2::new(phi.cos(), phi.sin())
}

/// Half-separation (E_{b+1} - E_b)/2 at K + r u for each direction u, per radius.
fn cone_half_gaps<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    cutoff: usize,
    b_star: usize,
    radii: &[T],
    n_dirs: usize,
) -> Result<Vec<Vec<T>>> {
    let kpt = high_symmetry_points(lat).k;
    let ks: Vec<Vec2<T>> = radii
        .iter()
        .flat_map(|&r| (0..n_dirs).map(move |j| kpt + direction::<T>(j, n_dirs) * r))
        .collect();
    let bands = band_structure(lat, potential, None, &ks, b_star + 1, cutoff)?;
    Ok(bands
        .chunks(n_dirs)
        .map(|ch| ch.iter().map(|e| (e[b_star] - e[b_star - 1]) / T::lit(2.0)).collect())
        .collect())
}

fn check_honeycomb<T: Real>(potential: &FourierPotential<T>, tol: f64) -> Result<()> {
    for (op, name) in [(Symmetry::C, "C"), (Symmetry::P, "P"), (Symmetry::R, "R")] {
        let r = potential.symmetry_residual(op).as_f64();
        if r > tol {
            return Err(Error::NotHoneycomb { op: name, residual: r });
        }
    }
    Ok(())
}

pub fn find_dirac_point<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    cutoff: usize,
    opts: &DiracOptions,
) -> Result<DiracLocation<T>> {
    check_honeycomb(potential, opts.symmetry_tol)?;
    let kpt = high_symmetry_points(lat).k;
    let h = assemble_bloch(lat, &problem_at(potential, None, kpt, cutoff))?;
    let e = eigvalsh(&h)?;
    let tol = T::lit(opts.tol_deg);
    let mut not_conical = None;
    for b in 1..opts.max_band.min(e.len()) {
        let split = e[b] - e[b - 1];
        let simple_below = b == 1 || e[b - 1] - e[b - 2] >= tol;
        let simple_above = b + 1 >= e.len() || e[b + 1] - e[b] >= tol;
        if split >= tol || !simple_below || !simple_above {
            continue;
        }
        let radii: Vec<T> = opts.cone_radii.iter().map(|&r| T::lit(r)).collect();
        let gaps = cone_half_gaps(lat, potential, cutoff, b, &radii, opts.n_dirs)?;
        let mut aniso = T::zero();
        for (g, &r) in gaps.iter().zip(&radii) {
            let s: Vec<T> = g.iter().map(|&x| x / r).collect();
            let mean = s.iter().fold(T::zero(), |a, &x| a + x) / T::from_int(s.len() as i64);
            let (lo, hi) = s.iter().fold((T::infinity(), T::neg_infinity()), |(l, h), &x| (l.min(x), h.max(x)));
            aniso = aniso.max(if mean > T::zero() { (hi - lo) / mean } else { T::infinity() });
        }
        if aniso < T::lit(opts.anisotropy_tol) {
            return Ok(DiracLocation {
                e_d: (e[b] + e[b - 1]) / T::lit(2.0),
                b_star: b,
                splitting: split,
                anisotropy: aniso,
                energies_at_k: e,
            });
        }
        not_conical.get_or_insert((b, aniso.as_f64()));
    }
    match not_conical {
        Some((band, anisotropy)) => Err(Error::NotConical { band, anisotropy }),
        None => Err(Error::NoDiracPoint { max_band: opts.max_band }),
    }
}

#[derive(Clone, Debug)]
pub struct FermiVelocityFit<T> {
    pub v_f: T,
    pub per_direction: Vec<T>,
    pub max_deviation: T,
}

/// Least-squares slope of the half-separation against r, averaged over directions.
pub fn fit_fermi_velocity<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    b_star: usize,
    cutoff: usize,
    radii: &[T],
    n_dirs: usize,
) -> Result<FermiVelocityFit<T>> {
    let gaps = cone_half_gaps(lat, potential, cutoff, b_star, radii, n_dirs)?;
    let rr = radii.iter().fold(T::zero(), |s, &r| s + r * r);
    let per_direction: Vec<T> = (0..n_dirs)
        .map(|d| radii.iter().zip(&gaps).fold(T::zero(), |s, (&r, g)| s + r * g[d]) / rr)
        .collect();
    let v_f = per_direction.iter().fold(T::zero(), |s, &x| s + x) / T::from_int(n_dirs as i64);
    let max_deviation = per_direction.iter().fold(T::zero(), |m, &x| m.max((x - v_f).abs() / v_f));
    if max_deviation > T::lit(0.05) {
        return Err(Error::AnisotropyTooLarge(max_deviation.as_f64()));
    }
    Ok(FermiVelocityFit { v_f, per_direction, max_deviation })
}

/// Degenerate Bloch pair at one valley, as plane-wave coefficients on a shared basis.
#[derive(Clone, Debug)]
pub struct ValleyModes<T> {
    pub valley: Valley,
    pub k: Vec2<T>,
    pub phi: [Vec<Complex<T>>; 2],
}

type Mat2<T> = [[Complex<T>; 2]; 2];

impl<T: Real> ValleyModes<T> {
    /// < Phi_m, -2i r . grad Phi_j >
    pub fn pairing_matrix(&self, lat: &LatticeBasis<T>, basis: &PlaneWaveBasis, r: Vec2<T>) -> Mat2<T> {
        let w: Vec<T> = basis.indices.iter().map(|&(m, n)| T::lit(2.0) * r.dot(self.k + lat.dual(m, n))).collect();
        self.sandwich(|i, u| u[i] * w[i], basis)
    }

    /// < Phi_m, f Phi_j > for a multiplication operator f
    pub fn potential_matrix(&self, basis: &PlaneWaveBasis, f: &FourierPotential<T>) -> Mat2<T> {
        let pairs: Vec<_> = convolution_pairs(basis, f).collect();
        let mut out = [[cz(); 2]; 2];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, o) in row.iter_mut().enumerate() {
                *o = pairs
                    .iter()
                    .fold(cz(), |s, &(i, j, c)| s + self.phi[a][i].conj() * c * self.phi[b][j]);
            }
        }
        out
    }

    /// < Phi_m, div(a sigma_2 grad) Phi_j >
    pub fn divergence_matrix(&self, lat: &LatticeBasis<T>, basis: &PlaneWaveBasis, a: &FourierPotential<T>) -> Mat2<T> {
        let kg: Vec<Vec2<T>> = basis.indices.iter().map(|&(m, n)| self.k + lat.dual(m, n)).collect();
        let pairs: Vec<_> = convolution_pairs(basis, a).collect();
        let mut out = [[cz(); 2]; 2];
        for (x, row) in out.iter_mut().enumerate() {
            for (y, o) in row.iter_mut().enumerate() {
                *o = pairs.iter().fold(cz(), |s, &(i, j, c)| {
                    s + self.phi[x][i].conj() * c * Complex::new(T::zero(), kg[i].det(kg[j])) * self.phi[y][j]
                });
            }
        }
        out
    }

    fn sandwich(&self, op: impl Fn(usize, &[Complex<T>]) -> Complex<T>, basis: &PlaneWaveBasis) -> Mat2<T> {
        let mut out = [[cz(); 2]; 2];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, o) in row.iter_mut().enumerate() {
                *o = (0..basis.len()).fold(cz(), |s, i| s + self.phi[a][i].conj() * op(i, &self.phi[b]));
            }
        }
        out
    }

    /// Parity image: coefficient at -G, quasimomentum -k.
    pub fn parity(&self, basis: &PlaneWaveBasis, valley: Valley) -> Self {
        let flip = |u: &Vec<Complex<T>>| -> Vec<Complex<T>> {
            basis.indices.iter().map(|&(m, n)| u[basis.position(-m, -n).unwrap()]).collect()
        };
        Self { valley, k: -self.k, phi: [flip(&self.phi[0]), flip(&self.phi[1])] }
    }

    /// Phi_1 -> w Phi_1, Phi_2 -> conj(w) Phi_2
    pub fn rephased(&self, w: Complex<T>) -> Self {
        let s = |u: &Vec<Complex<T>>, z: Complex<T>| u.iter().map(|x| *x * z).collect();
        Self { valley: self.valley, k: self.k, phi: [s(&self.phi[0], w), s(&self.phi[1], w.conj())] }
    }

    /// Evaluate Phi_j at x.
    pub fn evaluate(&self, lat: &LatticeBasis<T>, basis: &PlaneWaveBasis, j: usize, x: Vec2<T>) -> Complex<T> {
        basis
            .indices
            .iter()
            .zip(&self.phi[j])
            .fold(cz(), |s, (&(m, n), c)| s + *c * cis((self.k + lat.dual(m, n)).dot(x)))
    }
}

/// Index map of the rotation on K + G: R(K + G(m, n)) = K + G(map(m, n)).
fn rotation_index_map<T: Real>(lat: &LatticeBasis<T>, k: Vec2<T>) -> impl Fn(i64, i64) -> (i64, i64) {
    let (_, (sm, sn)) = lat.reduce_dual(k.rotate() - k);
    move |m, n| {
        let (rm, rn) = crate::lattice::rotate_dual_index(m, n);
        (rm + sm, rn + sn)
    }
}

/// Coefficients of R[f](x) = f(R* x) for f = sum c_G exp(i (k+G) . x).
pub fn rotate_modes<T: Real>(lat: &LatticeBasis<T>, basis: &PlaneWaveBasis, k: Vec2<T>, u: &[Complex<T>]) -> Vec<Complex<T>> {
    let map = rotation_index_map(lat, k);
    let mut out = vec![cz(); u.len()];
    for (i, &(m, n)) in basis.indices.iter().enumerate() {
        let (a, b) = map(m, n);
        if let Some(j) = basis.position(a, b) {
            out[j] = u[i];
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct GaugeDiagnostics<T> {
    pub rotation_residual: T,
    pub rotation_residual_phi2: T,
    pub gauge_residual: T,
    pub grad_diag_residual: T,
    pub kp_gauge_residual: T,
}

#[derive(Clone, Debug)]
pub struct GaugedModes<T> {
    pub v_f: T,
    pub k: ValleyModes<T>,
    pub kp: ValleyModes<T>,
    pub diagnostics: GaugeDiagnostics<T>,
}

/// The target direction g / v_F of < Phi_1, -2i grad Phi_2 > under the counterclockwise rotation.
pub fn gauge_direction<T: Real>() -> [Complex<T>; 2] {
    [Complex::new(T::one(), T::zero()), Complex::new(T::zero(), -T::one())]
}

/// (x, y) components of the (1, 2) entry of the pairing matrix.
fn pairing_vector<T: Real>(mx: &Mat2<T>, my: &Mat2<T>) -> [Complex<T>; 2] {
    [mx[0][1], my[0][1]]
}

/// Fix the phases of a degenerate pair at K: R Phi_1 = tau Phi_1, Phi_2 = PC Phi_1,
/// < Phi_1, -2i grad Phi_2 > = v_F (1, -i); K' modes are parity images.
pub fn gauge_fix_modes<T: Real>(
    lat: &LatticeBasis<T>,
    basis: &PlaneWaveBasis,
    u1: &[Complex<T>],
    u2: &[Complex<T>],
) -> Result<GaugedModes<T>> {
    let hs = high_symmetry_points(lat);
    let k = hs.k;
    let tau = hs.tau;
    let ru = [rotate_modes(lat, basis, k, u1), rotate_modes(lat, basis, k, u2)];
    let us = [u1, u2];
    // 2x2 matrix of the rotation in the degenerate space
    let mut r = [[cz::<T>(); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            r[a][b] = vdot(us[a], &ru[b]);
        }
    }
    let tr = r[0][0] + r[1][1];
    let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    let disc = (tr * tr - det * T::lit(4.0)).sqrt();
    let eigs = [(tr + disc) / T::lit(2.0), (tr - disc) / T::lit(2.0)];
    let (lam, other) = if (eigs[0] - tau).norm() < (eigs[1] - tau).norm() { (eigs[0], eigs[1]) } else { (eigs[1], eigs[0]) };
    let sort_tol = T::lit(1e-6);
    if (lam - tau).norm() > sort_tol || (other - tau.conj()).norm() > sort_tol {
        return Err(Error::RotationSortFailure(format!(
            "rotation eigenvalues {:?}, {:?} are not (tau, conj tau)",
            eigs[0], eigs[1]
        )));
    }
    // eigenvector (x, y) of r for lam
    let (x, y) = if (r[0][1]).norm() > (r[1][0]).norm() {
        (r[0][1], lam - r[0][0])
    } else {
        (lam - r[1][1], r[1][0])
    };
    let mut phi1: Vec<Complex<T>> = u1.iter().zip(u2).map(|(a, b)| *a * x + *b * y).collect();
    let nrm = vnorm(&phi1);
    phi1.iter_mut().for_each(|c| *c = *c / nrm);

    let raw = ValleyModes { valley: Valley::K, k, phi: [phi1.clone(), phi1.iter().map(|c| c.conj()).collect()] };
    let ex = raw.pairing_matrix(lat, basis, Vec2::new(T::one(), T::zero()));
    let ey = raw.pairing_matrix(lat, basis, Vec2::new(T::zero(), T::one()));
    let g = pairing_vector(&ex, &ey);
    // Phi_1 -> e^{i phi} Phi_1 multiplies g by e^{-2 i phi}
    let phase = g[0].arg() / T::lit(2.0);
    let mut modes = raw.rephased(cis(phase));
    // remaining sign: largest coefficient of Phi_1 has nonnegative real part
    let big = modes.phi[0]
        .iter()
        .copied()
        .fold(cz::<T>(), |b, c| if c.norm_sqr() > b.norm_sqr() { c } else { b });
    if big.re < T::zero() {
        modes = modes.rephased(Complex::new(-T::one(), T::zero()));
    }
    let ex = modes.pairing_matrix(lat, basis, Vec2::new(T::one(), T::zero()));
    let ey = modes.pairing_matrix(lat, basis, Vec2::new(T::zero(), T::one()));
    let g = [ex[0][1], ey[0][1]];
    let v_f = g[0].re;
    let dir = gauge_direction::<T>();
    let gauge_residual = (g[0] - dir[0] * v_f).norm().max((g[1] - dir[1] * v_f).norm());
    let grad_diag_residual = [ex[0][0], ey[0][0], ex[1][1], ey[1][1]].iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let rot_res = |u: &Vec<Complex<T>>, ev: Complex<T>| {
        let ru = rotate_modes(lat, basis, k, u);
        ru.iter().zip(u).fold(T::zero(), |s, (a, b)| s + (*a - *b * ev).norm_sqr()).sqrt()
    };
    let rotation_residual = rot_res(&modes.phi[0], tau);
    let rotation_residual_phi2 = rot_res(&modes.phi[1], tau.conj());
    let kp = modes.parity(basis, Valley::Kp);
    let px = kp.pairing_matrix(lat, basis, Vec2::new(T::one(), T::zero()));
    let py = kp.pairing_matrix(lat, basis, Vec2::new(T::zero(), T::one()));
    let kp_gauge_residual = (px[0][1] + dir[0] * v_f).norm().max((py[0][1] + dir[1] * v_f).norm());
    Ok(GaugedModes {
        v_f,
        k: modes,
        kp,
        diagnostics: GaugeDiagnostics {
            rotation_residual,
            rotation_residual_phi2,
            gauge_residual,
            grad_diag_residual,
            kp_gauge_residual,
        },
    })
}

/// Frame-adapted gauge: Phi_1 -> w Phi_1, Phi_2 -> conj(w) Phi_2 with conj(w)^2 chosen so that
/// < Phi_1, -2i K2 . grad Phi_2 > is real positive at K.
pub fn frame_phase<T: Real>(lat: &LatticeBasis<T>, basis: &PlaneWaveBasis, modes_k: &ValleyModes<T>, frame: &EdgeFrame<T>) -> Complex<T> {
    let c = modes_k.pairing_matrix(lat, basis, frame.k_e2)[0][1];
    let wbar_sq = c.conj() / c.norm();
    wbar_sq.sqrt().conj()
}

/// Per-valley coupling with its sigma_3-structure residual.
#[derive(Clone, Copy, Debug)]
pub struct Coupling<T> {
    pub value: T,
    pub offdiag_residual: T,
}

fn sigma3_part<T: Real>(m: &Mat2<T>) -> Coupling<T> {
    let value = m[0][0].re;
    let res = m[0][1]
        .norm()
        .max(m[1][0].norm())
        .max((m[0][0] + m[1][1]).norm())
        .max(m[0][0].im.abs());
    Coupling { value, offdiag_residual: res }
}

pub fn coupling_theta<T: Real>(basis: &PlaneWaveBasis, modes: &ValleyModes<T>, w: &FourierPotential<T>) -> Result<Coupling<T>> {
    let c = sigma3_part(&modes.potential_matrix(basis, w));
    if c.value.abs() < T::lit(1e-8) {
        return Err(Error::NondegeneracyFailure { which: "theta", value: c.value.as_f64() });
    }
    Ok(c)
}

pub fn coupling_theta_tilde<T: Real>(
    lat: &LatticeBasis<T>,
    basis: &PlaneWaveBasis,
    modes: &ValleyModes<T>,
    a: &FourierPotential<T>,
) -> Result<Coupling<T>> {
    let c = sigma3_part(&modes.divergence_matrix(lat, basis, a));
    if c.value.abs() < T::lit(1e-8) {
        return Err(Error::NondegeneracyFailure { which: "theta_tilde", value: c.value.as_f64() });
    }
    Ok(c)
}

/// Everything downstream needs about the Dirac point at K (and K' by parity).
#[derive(Clone, Debug)]
pub struct DiracPointData<T> {
    pub cutoff: usize,
    pub e_d: T,
    pub b_star: usize,
    pub v_f: T,
    pub splitting: T,
    pub anisotropy: T,
    pub basis: PlaneWaveBasis,
    pub modes: GaugedModes<T>,
    /// (theta^K, theta^K') if W was supplied
    pub theta: Option<[Coupling<T>; 2]>,
    /// (theta~^K, theta~^K') if a was supplied
    pub theta_tilde: Option<[Coupling<T>; 2]>,
}

impl<T: Real> DiracPointData<T> {
    pub fn theta_gap(&self) -> Option<T> {
        self.theta.map(|t| t[0].value.abs())
    }

    pub fn theta_tilde_gap(&self) -> Option<T> {
        self.theta_tilde.map(|t| t[0].value.abs())
    }

    pub fn valley_modes(&self, valley: Valley) -> &ValleyModes<T> {
        match valley {
            Valley::K => &self.modes.k,
            Valley::Kp => &self.modes.kp,
        }
    }

    /// Signed Fermi velocity of a valley: +v_F at K, -v_F at K'.
    pub fn v_f_valley(&self, valley: Valley) -> T {
        self.v_f * valley.sign::<T>()
    }

    pub fn coupling(&self, flavor: Flavor, valley: Valley) -> Option<T> {
        let i = match valley {
            Valley::K => 0,
            Valley::Kp => 1,
        };
        match flavor {
            Flavor::PBreaking => self.theta.map(|t| t[i].value),
            Flavor::CBreaking => self.theta_tilde.map(|t| t[i].value),
        }
    }

    /// Modes of a valley in the frame-adapted gauge.
    pub fn frame_modes(&self, lat: &LatticeBasis<T>, frame: &EdgeFrame<T>, valley: Valley) -> ValleyModes<T> {
        let w = frame_phase(lat, &self.basis, &self.modes.k, frame);
        let k = self.modes.k.rephased(w);
        match valley {
            Valley::K => k,
            Valley::Kp => k.parity(&self.basis, Valley::Kp),
        }
    }
}

/// Analytic pairing matrix in the frame gauge: (v/|K2|) [(K2 . r) sigma_1 + det[K2, r] sigma_2].
pub fn pairing_model<T: Real>(v_signed: T, frame: &EdgeFrame<T>, r: Vec2<T>) -> Mat2<T> {
    let k2 = frame.k_e2;
    let s = v_signed / k2.norm();
    let a = k2.dot(r) * s;
    let b = k2.det(r) * s;
    [[cz(), Complex::new(a, -b)], [Complex::new(a, b), cz()]]
}

pub fn mat2_distance<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> T {
    let mut s = T::zero();
    for i in 0..2 {
        for j in 0..2 {
            s = s + (a[i][j] - b[i][j]).norm_sqr();
        }
    }
    s.sqrt()
}

pub fn dirac_point_data<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    w: Option<&FourierPotential<T>>,
    a: Option<&FourierPotential<T>>,
    cutoff: usize,
    opts: &DiracOptions,
) -> Result<DiracPointData<T>> {
    let loc = find_dirac_point(lat, potential, cutoff, opts)?;
    let basis = PlaneWaveBasis::new(cutoff);
    let kpt = high_symmetry_points(lat).k;
    let h = assemble_bloch(lat, &problem_at(potential, None, kpt, cutoff))?;
    let (_, u) = eigh(&h)?;
    let b = loc.b_star;
    let modes = gauge_fix_modes(lat, &basis, &column(&u, b - 1), &column(&u, b))?;
    let theta = match w {
        Some(w) => Some([coupling_theta(&basis, &modes.k, w)?, coupling_theta(&basis, &modes.kp, w)?]),
        None => None,
    };
    let theta_tilde = match a {
        Some(a) => Some([
            coupling_theta_tilde(lat, &basis, &modes.k, a)?,
            coupling_theta_tilde(lat, &basis, &modes.kp, a)?,
        ]),
        None => None,
    };
    Ok(DiracPointData {
        cutoff,
        e_d: loc.e_d,
        b_star: b,
        v_f: modes.v_f,
        splitting: loc.splitting,
        anisotropy: loc.anisotropy,
        basis,
        modes,
        theta,
        theta_tilde,
    })
}

#[derive(Clone, Debug)]
pub struct NoFoldReport<T> {
    pub passed: bool,
    pub offending_t: Vec<T>,
    pub n_t: usize,
}

/// Sample the two Dirac bands along K + t K2, t in [-pi, pi], and flag touches of E_D away
/// from the valley points. Sign changes between samples are refined by bisection.
pub fn check_no_fold<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    frame: &EdgeFrame<T>,
    dirac: &DiracPointData<T>,
    n_t: usize,
    tol_fold: T,
) -> Result<NoFoldReport<T>> {
    let hs = high_symmetry_points(lat);
    let exclusion = T::lit(0.05);
    let pt = |t: T| hs.k + frame.k_e2 * t;
    let far = |t: T| lat.dual_distance(pt(t), hs.k) > exclusion && lat.dual_distance(pt(t), hs.kp) > exclusion;
    let b = dirac.b_star;
    let ts: Vec<T> = if n_t <= 1 {
        vec![T::zero()]
    } else {
        (0..n_t).map(|i| -T::PI() + T::TAU() * T::from_int(i as i64) / T::from_int(n_t as i64 - 1)).collect()
    };
    let ks: Vec<Vec2<T>> = ts.iter().map(|&t| pt(t)).collect();
    let bands = band_structure(lat, potential, None, &ks, b + 1, dirac.cutoff)?;
    let dev = |e: &Vec<T>| [e[b - 1] - dirac.e_d, e[b] - dirac.e_d];
    let mut offending = Vec::new();
    for (i, e) in bands.iter().enumerate() {
        if far(ts[i]) && dev(e).iter().any(|d| d.abs() < tol_fold) {
            offending.push(ts[i]);
        }
    }
    for i in 0..ts.len().saturating_sub(1) {
        if !(far(ts[i]) && far(ts[i + 1])) {
            continue;
        }
        let (d0, d1) = (dev(&bands[i]), dev(&bands[i + 1]));
        for band in 0..2 {
            if d0[band].signum() == d1[band].signum() || d0[band].abs() < tol_fold || d1[band].abs() < tol_fold {
                continue;
            }
            let (mut lo, mut hi, mut flo) = (ts[i], ts[i + 1], d0[band]);
            for _ in 0..60 {
                let mid = (lo + hi) / T::lit(2.0);
                let e = &band_structure(lat, potential, None, &[pt(mid)], b + 1, dirac.cutoff)?[0];
                let fm = dev(e)[band];
                if fm.abs() < tol_fold {
                    if far(mid) {
                        offending.push(mid);
                    }
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
        }
    }
    offending.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(NoFoldReport { passed: offending.is_empty(), offending_t: offending, n_t })
}

/// Gap edges (a, b) of H0 + strength * perturbation along k_par K1 + t K2.
pub fn bulk_gap<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    perturbation: Option<&Perturbation<T>>,
    frame: &EdgeFrame<T>,
    kpar: T,
    b_star: usize,
    cutoff: usize,
    n_t: usize,
) -> Result<(T, T)> {
    let line = |t: T| frame.k_e1 * kpar + frame.k_e2 * t;
    let ts: Vec<T> = (0..n_t).map(|i| T::TAU() * T::from_int(i as i64) / T::from_int(n_t as i64)).collect();
    let ks: Vec<Vec2<T>> = ts.iter().map(|&t| line(t)).collect();
    let bands = band_structure(lat, potential, perturbation, &ks, b_star + 1, cutoff)?;
    let eval = |t: T, band: usize| -> Result<T> {
        Ok(band_structure(lat, potential, perturbation, &[line(t)], b_star + 1, cutoff)?[0][band])
    };
    let h = T::TAU() / T::from_int(n_t as i64);
    // golden-section refinement of the extremum around the best sample
    let refine = |t0: T, band: usize, maximize: bool| -> Result<T> {
        let sgn = if maximize { -T::one() } else { T::one() };
        let f = |t: T| eval(t, band).map(|e| e * sgn);
        let gr = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
        let (mut a, mut b) = (t0 - h, t0 + h);
        let mut c = b - (b - a) * gr;
        let mut d = a + (b - a) * gr;
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        let mut best = f(t0)?.min(fc).min(fd);
        while (b - a).abs() > T::lit(1e-9) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - (b - a) * gr;
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + (b - a) * gr;
                fd = f(d)?;
            }
            best = best.min(fc).min(fd);
        }
        Ok(best * sgn)
    };
    let (imax, _) = bands
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, e)| if e[b_star - 1] > bv { (i, e[b_star - 1]) } else { (bi, bv) });
    let (imin, _) = bands
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |(bi, bv), (i, e)| if e[b_star] < bv { (i, e[b_star]) } else { (bi, bv) });
    let lower = refine(ts[imax], b_star - 1, true)?;
    let upper = refine(ts[imin], b_star, false)?;
    if upper <= lower {
        return Err(Error::GapClosed { lower: lower.as_f64(), upper: upper.as_f64() });
    }
    Ok((lower, upper))
}

/// Action of the perturbation (unit strength) on plane-wave coefficients at quasimomentum k.
pub fn apply_perturbation<T: Real>(
    lat: &LatticeBasis<T>,
    basis: &PlaneWaveBasis,
    k: Vec2<T>,
    flavor: Flavor,
    field: &FourierPotential<T>,
    u: &[Complex<T>],
) -> Vec<Complex<T>> {
    let kg: Vec<Vec2<T>> = basis.indices.iter().map(|&(m, n)| k + lat.dual(m, n)).collect();
    let mut out = vec![cz(); u.len()];
    for (i, j, c) in convolution_pairs(basis, field) {
        let v = match flavor {
            Flavor::PBreaking => c,
            Flavor::CBreaking => c * Complex::new(T::zero(), kg[i].det(kg[j])),
        };
        out[i] = out[i] + v * u[j];
    }
    out
}

/// Coefficients of 2 r . grad u for u = sum c_G exp(i (k+G) . x).
pub fn apply_directional<T: Real>(lat: &LatticeBasis<T>, basis: &PlaneWaveBasis, k: Vec2<T>, r: Vec2<T>, u: &[Complex<T>]) -> Vec<Complex<T>> {
    basis
        .indices
        .iter()
        .zip(u)
        .map(|(&(m, n), c)| *c * Complex::new(T::zero(), T::lit(2.0) * r.dot(k + lat.dual(m, n))))
        .collect()
}

/// (H_k - E_D)^+ on the orthogonal complement of the Dirac pair.
#[derive(Clone, Debug)]
pub struct PseudoInverse<T> {
    pub k: Vec2<T>,
    pub e_d: T,
    values: Vec<T>,
    vectors: Mat<Complex<T>>,
    skip: [usize; 2],
}

impl<T: Real> PseudoInverse<T> {
    pub fn new(lat: &LatticeBasis<T>, potential: &FourierPotential<T>, k: Vec2<T>, cutoff: usize, e_d: T, b_star: usize) -> Result<Self> {
        let h = assemble_bloch(lat, &problem_at(potential, None, k, cutoff))?;
        let (values, vectors) = eigh(&h)?;
        Ok(Self { k, e_d, values, vectors, skip: [b_star - 1, b_star] })
    }

    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = x.len();
        let mut out = vec![cz(); n];
        for (b, &e) in self.values.iter().enumerate() {
            if self.skip.contains(&b) {
                continue;
            }
            let col = column(&self.vectors, b);
            let c = vdot(&col, x) / (e - self.e_d);
            for (o, v) in out.iter_mut().zip(&col) {
                *o = *o + *v * c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::potentials::default_honeycomb_v;

    #[test]
    fn free_laplacian_at_gamma() {
        let lat = build_lattice::<f64>();
        let p = BlochProblem { potential: FourierPotential::zero(), k: Vec2::zero(), cutoff: 3, perturbation: None };
        let e = eigvalsh(&assemble_bloch(&lat, &p).unwrap()).unwrap();
        assert!(e[0].abs() < 1e-12);
        let g = lat.dual(1, 0).norm_sqr();
        assert!((e[1] - g).abs() < 1e-10);
    }

    #[test]
    fn free_degeneracy_at_k() {
        let lat = build_lattice::<f64>();
        let k = high_symmetry_points(&lat).k;
        let cutoff = 4;
        let p = BlochProblem { potential: FourierPotential::zero(), k, cutoff, perturbation: None };
        let e = eigvalsh(&assemble_bloch(&lat, &p).unwrap()).unwrap();
        let basis = PlaneWaveBasis::new(cutoff);
        let vals: Vec<f64> = basis.indices.iter().map(|&(m, n)| (k + lat.dual(m, n)).norm_sqr()).collect();
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        let mult = vals.iter().filter(|&&v| (v - min).abs() < 1e-9).count();
        assert_eq!(mult, 3);
        assert!((e[0] - min).abs() < 1e-10);
        assert_eq!(e.iter().filter(|&&v| (v - min).abs() < 1e-9).count(), mult);
    }

    #[test]
    fn cutoff_must_cover_potential() {
        let lat = build_lattice::<f64>();
        let v = default_honeycomb_v(1.0).unwrap().sum(&FourierPotential::from_coeffs([((3, 0), Complex::new(0.1, 0.0)), ((-3, 0), Complex::new(0.1, 0.0))]));
        let p = BlochProblem { potential: v, k: Vec2::zero(), cutoff: 2, perturbation: None };
        assert_eq!(assemble_bloch(&lat, &p).unwrap_err(), Error::CutoffTooSmall { cutoff: 2, needed: 3 });
    }

    #[test]
    fn divergence_block_is_hermitian() {
        let lat = build_lattice::<f64>();
        let a = crate::potentials::default_a(1.0).unwrap();
        let p = BlochProblem {
            potential: default_honeycomb_v(10.0).unwrap(),
            k: Vec2::new(0.3, -0.8),
            cutoff: 4,
            perturbation: Some(Perturbation { flavor: Flavor::CBreaking, field: a, strength: 0.4 }),
        };
        let h = assemble_bloch(&lat, &p).unwrap();
        assert!(crate::linalg::dense::hermiticity_residual(&h) < 1e-12);
    }
}
