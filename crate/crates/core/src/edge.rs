//! Edge-state eigenvalue problem on a ribbon transverse to a rational edge.
//!
//! Coordinates x = t1 v_e1 + t2 v_e2. States are pseudo-periodic in t1 with quasimomentum
//! k_par and expanded in Fourier modes exp(i (k_par + 2 pi m) t1), |m| <= M; in t2 they are
//! sampled on a uniform grid over [-L, L] with Dirichlet ends and centered finite differences.
//! Unknowns are ordered grid point outer, Fourier mode inner, which makes the matrix banded.

use crate::bulk::{apply_directional, apply_perturbation, bulk_gap, DiracPointData, Flavor, Perturbation, PseudoInverse, ValleyModes};
use crate::dirac1d::EffectiveDiracModel;
use crate::error::{Error, Result};
use crate::lattice::{high_symmetry_points, EdgeFrame, LatticeBasis, Valley, Vec2};
use crate::linalg::banded::BandMatrix;
use crate::linalg::lanczos::{interior_eigenpairs, InteriorOptions};
use crate::potentials::{DomainWall, FourierPotential};
use crate::scalar::{cis, cr, cz, vdot, vnorm, Real};
use crate::tracking::{link, Sample};
use num_complex::Complex;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundaryCondition {
    Dirichlet,
}

/// Fourier modes |m| <= 5 along the edge resolve the Dirac modes of the default potential to
/// about 1e-8 on both frame types.
pub const DEFAULT_MODES: usize = 5;
/// Ribbon half-width in decay lengths for eigenvalue runs.
pub const EIGEN_WIDTHS: f64 = 9.0;
/// Ribbon half-width in decay lengths for residual studies, which need the Dirichlet ends far
/// enough away that the truncated tail is below the O(delta^2) residual.
pub const RESIDUAL_WIDTHS: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RibbonDiscretization {
    /// Fourier modes |m| <= modes along v_e1
    pub modes: usize,
    /// half-width in v_e2 cells
    pub l_cells: usize,
    /// grid points per cell in t2
    pub n_perp: usize,
    /// finite-difference order in t2: 2, 4, 6 or 8
    pub fd_order: usize,
    pub bc: BoundaryCondition,
}

impl RibbonDiscretization {
    /// Half-width covering `widths` decay lengths 1/(delta g) of the slowest interface mode
    /// (g is the zero-mode decay rate of the effective Dirac operator) and at least 10/delta.
    pub fn for_delta(delta: f64, decay_rate: f64, modes: usize, widths: f64) -> Self {
        let reach = (widths / (delta * decay_rate.min(1.0))).max(10.0 / delta);
        Self { modes, l_cells: reach.ceil() as usize, n_perp: 16, fd_order: 8, bc: BoundaryCondition::Dirichlet }
    }

    pub fn n_modes(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn n_points(&self) -> usize {
        2 * self.l_cells * self.n_perp - 1
    }

    pub fn dim(&self) -> usize {
        self.n_points() * self.n_modes()
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::one() / T::from_int(self.n_perp as i64)
    }

    pub fn t<T: Real>(&self, i: usize) -> T {
        -T::from_int(self.l_cells as i64) + self.spacing::<T>() * T::from_int(i as i64 + 1)
    }

    pub fn index(&self, i: usize, m: i64) -> usize {
        i * self.n_modes() + (m + self.modes as i64) as usize
    }

    pub fn mode(&self, local: usize) -> i64 {
        local as i64 - self.modes as i64
    }

    pub fn with_width(&self, l_cells: usize) -> Self {
        Self { l_cells, ..*self }
    }
}

/// Centered difference weights for offsets 1..=order/2: (first derivative, second derivative,
/// second-derivative center weight).
fn fd_weights(order: usize) -> (&'static [f64], &'static [f64], f64) {
    match order {
        2 => (&[0.5], &[1.0], -2.0),
        4 => (&[2.0 / 3.0, -1.0 / 12.0], &[4.0 / 3.0, -1.0 / 12.0], -2.5),
        6 => (&[0.75, -0.15, 1.0 / 60.0], &[1.5, -0.15, 1.0 / 90.0], -49.0 / 18.0),
        _ => (&[0.8, -0.2, 4.0 / 105.0, -1.0 / 280.0], &[1.6, -0.2, 8.0 / 315.0, -1.0 / 560.0], -205.0 / 72.0),
    }
}

/// Edge Hamiltonian data: H0 = -Laplacian + V plus delta times a wall-modulated perturbation.
#[derive(Clone, Debug)]
pub struct EdgeProblem<T> {
    pub lattice: LatticeBasis<T>,
    pub potential: FourierPotential<T>,
    pub flavor: Flavor,
    /// W for P-breaking, a for C-breaking
    pub field: FourierPotential<T>,
    pub wall: DomainWall<T>,
    pub delta: T,
    pub frame: EdgeFrame<T>,
    pub ribbon: RibbonDiscretization,
}

/// Coefficients grouped by mode offset p: p -> [(q, c)] for c exp(2 pi i (p t1 + q t2)).
fn by_offset<T: Real>(f: &FourierPotential<T>, frame: &EdgeFrame<T>) -> BTreeMap<i64, Vec<(i64, Complex<T>)>> {
    let mut out: BTreeMap<i64, Vec<(i64, Complex<T>)>> = BTreeMap::new();
    for (p, q, c) in f.in_frame(frame) {
        out.entry(p).or_default().push((q, c));
    }
    out
}

fn eval_offset<T: Real>(terms: Option<&Vec<(i64, Complex<T>)>>, t: T) -> Complex<T> {
    terms
        .map(|v| v.iter().fold(cz(), |s, &(q, c)| s + c * cis(T::TAU() * T::from_int(q) * t)))
        .unwrap_or_else(cz)
}

impl<T: Real> EdgeProblem<T> {
    fn check_width(&self) -> Result<()> {
        let w = T::from_int(self.ribbon.l_cells as i64) * self.delta;
        if self.delta > T::zero() && w < T::lit(10.0) {
            return Err(Error::RibbonTooNarrow(w.as_f64()));
        }
        if ![2, 4, 6, 8].contains(&self.ribbon.fd_order) {
            return Err(Error::Config(format!("finite-difference order {} not in {{2, 4, 6, 8}}", self.ribbon.fd_order)));
        }
        Ok(())
    }

    /// Banded Hermitian matrix of the edge Hamiltonian at k_par.
    pub fn assemble(&self, kpar: T) -> Result<BandMatrix<T>> {
        self.check_width()?;
        let rb = &self.ribbon;
        let (nm, np) = (rb.n_modes(), rb.n_points());
        let r = rb.fd_order / 2;
        let h = rb.spacing::<T>();
        let (d1, d2, d2c) = fd_weights(rb.fd_order);
        let k1 = self.frame.k_e1;
        let k2 = self.frame.k_e2;
        let (g11, g12, g22) = (k1.norm_sqr(), k1.dot(k2), k2.norm_sqr());
        let det12 = k1.det(k2);
        let kappa_m: Vec<T> = (0..nm).map(|l| kpar + T::TAU() * T::from_int(rb.mode(l))).collect();
        let v_terms = by_offset(&self.potential, &self.frame);
        let f_terms = by_offset(&self.field, &self.frame);
        let delta = self.delta;
        let wall = |t: T| self.wall.kappa(delta * t);
        let mut a = BandMatrix::zeros(rb.dim(), r * nm + nm - 1);

        // mode-coupling blocks at each grid point: V and, for P-breaking, delta kappa W
        let f_block = |t: T| -> Vec<Complex<T>> {
            let mut blk = vec![cz::<T>(); nm * nm];
            for a_ in 0..nm {
                for b_ in 0..nm {
                    let p = rb.mode(a_) - rb.mode(b_);
                    blk[a_ * nm + b_] = eval_offset(f_terms.get(&p), t) * wall(t);
                }
            }
            blk
        };
        let mut f_cache: Vec<Vec<Complex<T>>> = Vec::new();
        if self.flavor == Flavor::CBreaking && delta != T::zero() {
            f_cache = (0..np).map(|i| f_block(rb.t(i))).collect();
        }
        for i in 0..np {
            let t = rb.t::<T>(i);
            for a_ in 0..nm {
                let row = i * nm + a_;
                let km = kappa_m[a_];
                a.add(row, row, cr(g11 * km * km - g22 * T::lit(d2c) / (h * h)));
                for b_ in 0..nm {
                    let p = rb.mode(a_) - rb.mode(b_);
                    let mut v = eval_offset(v_terms.get(&p), t);
                    if self.flavor == Flavor::PBreaking && delta != T::zero() {
                        v = v + eval_offset(f_terms.get(&p), t) * (delta * wall(t));
                    }
                    if v.norm_sqr() > T::zero() {
                        a.add(row, i * nm + b_, v);
                    }
                }
                for k in 1..=r {
                    for (j, sgn) in [(i as i64 + k as i64, T::one()), (i as i64 - k as i64, -T::one())] {
                        if j < 0 || j as usize >= np {
                            continue;
                        }
                        let col = j as usize * nm + a_;
                        let lap = -g22 * T::lit(d2[k - 1]) / (h * h);
                        let cross = Complex::new(T::zero(), -T::lit(2.0) * g12 * km * sgn * T::lit(d1[k - 1]) / h);
                        a.add(row, col, cr(lap) + cross);
                    }
                }
            }
        }
        if self.flavor == Flavor::CBreaking && delta != T::zero() {
            // -i det12 delta (X - X^H), X = diag(i kappa_m) F D; entries
            // delta det12 D_ij [kappa_m F_mm'(t_i) - kappa_m' F_mm'(t_j)]
            for i in 0..np {
                for k in 1..=r {
                    for (j, sgn) in [(i as i64 + k as i64, T::one()), (i as i64 - k as i64, -T::one())] {
                        if j < 0 || j as usize >= np {
                            continue;
                        }
                        let j = j as usize;
                        let dij = sgn * T::lit(d1[k - 1]) / h;
                        for a_ in 0..nm {
                            for b_ in 0..nm {
                                let fi = f_cache[i][a_ * nm + b_];
                                let fj = f_cache[j][a_ * nm + b_];
                                let v = (fi * kappa_m[a_] - fj * kappa_m[b_]) * (delta * det12 * dij);
                                if v.norm_sqr() > T::zero() {
                                    a.add(i * nm + a_, j * nm + b_, v);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(a)
    }

    /// Unperturbed one-cell operator with Bloch phase exp(i phase) across t2 -> t2 + 1, in the
    /// same transverse discretization and Fourier truncation as the ribbon. Its spectrum at a
    /// valley gives the Dirac energy seen by the discretized ribbon.
    pub fn cell_energies(&self, kpar: T, phase: T) -> Result<Vec<T>> {
        let rb = &self.ribbon;
        let (nm, np) = (rb.n_modes(), rb.n_perp);
        let r = rb.fd_order / 2;
        let h = rb.spacing::<T>();
        let (d1, d2, d2c) = fd_weights(rb.fd_order);
        let k1 = self.frame.k_e1;
        let k2 = self.frame.k_e2;
        let (g11, g12, g22) = (k1.norm_sqr(), k1.dot(k2), k2.norm_sqr());
        let v_terms = by_offset(&self.potential, &self.frame);
        let n = np * nm;
        let mut a = faer::Mat::<Complex<T>>::zeros(n, n);
        for i in 0..np {
            let t = h * T::from_int(i as i64);
            for a_ in 0..nm {
                let km = kpar + T::TAU() * T::from_int(rb.mode(a_));
                let row = i * nm + a_;
                a[(row, row)] = a[(row, row)] + cr(g11 * km * km - g22 * T::lit(d2c) / (h * h));
                for b_ in 0..nm {
                    let v = eval_offset(v_terms.get(&(rb.mode(a_) - rb.mode(b_))), t);
                    a[(row, i * nm + b_)] = a[(row, i * nm + b_)] + v;
                }
                for k in 1..=r {
                    for (j, sgn) in [(i as i64 + k as i64, T::one()), (i as i64 - k as i64, -T::one())] {
                        let wraps = j.div_euclid(np as i64);
                        let jj = j.rem_euclid(np as i64) as usize;
                        let ph = cis(phase * T::from_int(wraps));
                        let lap = -g22 * T::lit(d2[k - 1]) / (h * h);
                        let cross = Complex::new(T::zero(), -T::lit(2.0) * g12 * km * sgn * T::lit(d1[k - 1]) / h);
                        let col = jj * nm + a_;
                        a[(row, col)] = a[(row, col)] + (cr(lap) + cross) * ph;
                    }
                }
            }
        }
        crate::linalg::dense::eigvalsh(&a)
    }

    /// Dirac energy of the discretized unperturbed operator at a valley: mean of the two bands
    /// b*, b*+1 of the one-cell problem.
    pub fn discrete_dirac_energy(&self, valley: Valley, b_star: usize) -> Result<T> {
        let hs = high_symmetry_points(&self.lattice);
        let k = match valley {
            Valley::K => hs.k,
            Valley::Kp => hs.kp,
        };
        let e = self.cell_energies(reduce_kpar(self.frame.kpar(valley)), k.dot(self.frame.v_e2))?;
        Ok((e[b_star - 1] + e[b_star]) / T::lit(2.0))
    }

    /// Mass per grid point of a ribbon vector.
    pub fn profile(&self, x: &[Complex<T>]) -> Vec<T> {
        let nm = self.ribbon.n_modes();
        x.chunks(nm).map(|c| c.iter().fold(T::zero(), |s, v| s + v.norm_sqr())).collect()
    }
}

/// Localization thresholds for edge states.
#[derive(Clone, Copy, Debug)]
pub struct FilterOptions<T> {
    /// outer fraction of the window counted as boundary
    pub boundary_zone: T,
    /// states with more boundary mass than this are boundary modes
    pub boundary_mass: T,
    /// |t2| radius of the interface zone
    pub interface_radius: T,
    /// states need at least this much mass in the interface zone
    pub interface_mass: T,
}

impl<T: Real> FilterOptions<T> {
    /// Interface zone |t2| <= 2 / (delta min(1, g)), g the zero-mode decay rate.
    pub fn for_delta(delta: T, decay_rate: T) -> Self {
        Self {
            boundary_zone: T::lit(0.1),
            boundary_mass: T::lit(0.1),
            interface_radius: T::lit(2.0) / (delta * decay_rate.min(T::one())),
            interface_mass: T::lit(0.5),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeState<T> {
    pub energy: T,
    pub interface_mass: T,
    pub boundary_mass: T,
    pub in_gap: bool,
    /// passes both localization filters
    pub interface: bool,
    #[serde(skip)]
    pub vector: Vec<Complex<T>>,
}

#[derive(Clone, Debug)]
pub struct EdgeSpectrumPoint<T> {
    pub kpar: T,
    pub states: Vec<EdgeState<T>>,
    pub gap: Option<(T, T)>,
}

impl<T: Real> EdgeSpectrumPoint<T> {
    pub fn interface_states(&self) -> impl Iterator<Item = &EdgeState<T>> {
        self.states.iter().filter(|s| s.interface)
    }

    pub fn in_gap_interface(&self) -> impl Iterator<Item = &EdgeState<T>> {
        self.states.iter().filter(|s| s.interface && s.in_gap)
    }
}

#[derive(Clone, Debug)]
pub struct EdgeSpectrum<T> {
    pub delta: T,
    pub flavor: Flavor,
    pub frame: (i64, i64),
    pub points: Vec<EdgeSpectrumPoint<T>>,
}

pub fn classify_states<T: Real>(
    problem: &EdgeProblem<T>,
    values: Vec<T>,
    vectors: Vec<Vec<Complex<T>>>,
    gap: Option<(T, T)>,
    filter: &FilterOptions<T>,
) -> Vec<EdgeState<T>> {
    let rb = &problem.ribbon;
    let l = T::from_int(rb.l_cells as i64);
    let edge = l * (T::one() - filter.boundary_zone);
    values
        .into_iter()
        .zip(vectors)
        .map(|(energy, vector)| {
            let prof = problem.profile(&vector);
            let total = prof.iter().fold(T::zero(), |s, &x| s + x);
            let (mut bnd, mut mid) = (T::zero(), T::zero());
            for (i, &w) in prof.iter().enumerate() {
                let t = rb.t::<T>(i).abs();
                if t >= edge {
                    bnd = bnd + w;
                }
                if t <= filter.interface_radius {
                    mid = mid + w;
                }
            }
            let boundary_mass = bnd / total;
            let interface_mass = mid / total;
            let in_gap = gap.map(|(a, b)| energy > a && energy < b).unwrap_or(false) && boundary_mass < filter.boundary_mass;
            let interface = boundary_mass <= filter.boundary_mass && interface_mass >= filter.interface_mass;
            EdgeState { energy, interface_mass, boundary_mass, in_gap, interface, vector }
        })
        .collect()
}

/// Eigenpairs of the edge Hamiltonian at one k_par in [lo, hi], tagged with localization data.
pub fn edge_states_at<T: Real>(
    problem: &EdgeProblem<T>,
    kpar: T,
    window: (T, T),
    gap: Option<(T, T)>,
    filter: &FilterOptions<T>,
    solver: &InteriorOptions,
) -> Result<EdgeSpectrumPoint<T>> {
    let a = problem.assemble(kpar)?;
    let res = interior_eigenpairs(&a, window.0, window.1, solver)?;
    let states = classify_states(problem, res.values, res.vectors, gap, filter);
    Ok(EdgeSpectrumPoint { kpar, states, gap })
}

/// Bulk gap (a_delta, b_delta) of the perturbed bulk operator along k_par K1 + t K2.
pub fn gap_at<T: Real>(problem: &EdgeProblem<T>, dirac: &DiracPointData<T>, kpar: T, n_t: usize) -> Result<(T, T)> {
    let pert = Perturbation { flavor: problem.flavor, field: problem.field.clone(), strength: problem.delta };
    bulk_gap(&problem.lattice, &problem.potential, Some(&pert), &problem.frame, kpar, dirac.b_star, dirac.cutoff, n_t)
}

/// Edge spectrum over a k_par grid: eigenvalues in E_D +/- 2 delta theta_gap.
pub fn edge_spectrum<T: Real>(
    problem: &EdgeProblem<T>,
    dirac: &DiracPointData<T>,
    kpar_grid: &[T],
    filter: &FilterOptions<T>,
    solver: &InteriorOptions,
) -> Result<EdgeSpectrum<T>> {
    let theta = coupling_gap(dirac, problem.flavor)?;
    let w = T::lit(2.0) * problem.delta * theta;
    let window = (dirac.e_d - w, dirac.e_d + w);
    let points = kpar_grid
        .iter()
        .map(|&k| {
            let gap = gap_at(problem, dirac, k, 64).ok();
            edge_states_at(problem, k, window, gap, filter, solver)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EdgeSpectrum { delta: problem.delta, flavor: problem.flavor, frame: (problem.frame.a1, problem.frame.b1), points })
}

pub fn coupling_gap<T: Real>(dirac: &DiracPointData<T>, flavor: Flavor) -> Result<T> {
    match flavor {
        Flavor::PBreaking => dirac.theta_gap(),
        Flavor::CBreaking => dirac.theta_tilde_gap(),
    }
    .ok_or_else(|| Error::PrerequisiteFailure(format!("H3: no coupling computed for {flavor:?}")))
}

/// Drop boundary modes and keep interface modes.
pub fn filter_boundary_modes<T: Real>(states: &[EdgeState<T>]) -> Vec<EdgeState<T>> {
    states.iter().filter(|s| s.interface).cloned().collect()
}

/// Envelope amplitudes and their s-derivatives for the multiscale state.
pub trait Envelope<T> {
    fn alpha(&self, s: T) -> [Complex<T>; 2];
    fn alpha_prime(&self, s: T) -> [Complex<T>; 2];
}

/// Closed-form zero mode exp(-g int_0^s kappa) chi, chi the sigma_2 eigenvector.
#[derive(Clone, Debug)]
pub struct ZeroModeEnvelope<T> {
    pub rate: T,
    pub spinor: [Complex<T>; 2],
    pub wall: DomainWall<T>,
}

impl<T: Real> ZeroModeEnvelope<T> {
    pub fn new(model: &EffectiveDiracModel<T>) -> Self {
        Self { rate: model.decay_rate(), spinor: crate::dirac1d::sigma2_spinor(model.chirality()), wall: model.wall.clone() }
    }
}

impl<T: Real> Envelope<T> for ZeroModeEnvelope<T> {
    fn alpha(&self, s: T) -> [Complex<T>; 2] {
        let f = (-self.rate * self.wall.integral(s)).exp();
        [self.spinor[0] * f, self.spinor[1] * f]
    }

    fn alpha_prime(&self, s: T) -> [Complex<T>; 2] {
        let f = (-self.rate * self.wall.integral(s)).exp() * (-self.rate * self.wall.kappa(s));
        [self.spinor[0] * f, self.spinor[1] * f]
    }
}

/// Plane-wave pieces of the first-order multiscale state at one valley.
#[derive(Clone, Debug)]
pub struct MultiscaleModes<T> {
    pub valley: Valley,
    pub k: Vec2<T>,
    pub phi: [Vec<Complex<T>>; 2],
    /// R(2 K2 . grad Phi_j)
    pub chi_k2: [Vec<Complex<T>>; 2],
    /// R(2 i ell . grad Phi_j)
    pub chi_ell: [Vec<Complex<T>>; 2],
    /// R(P Phi_j), P the perturbation
    pub chi_p: [Vec<Complex<T>>; 2],
}

impl<T: Real> MultiscaleModes<T> {
    pub fn new(
        lat: &LatticeBasis<T>,
        potential: &FourierPotential<T>,
        dirac: &DiracPointData<T>,
        frame: &EdgeFrame<T>,
        valley: Valley,
        flavor: Flavor,
        field: &FourierPotential<T>,
    ) -> Result<Self> {
        let modes: ValleyModes<T> = dirac.frame_modes(lat, frame, valley);
        let pinv = PseudoInverse::new(lat, potential, modes.k, dirac.cutoff, dirac.e_d, dirac.b_star)?;
        let basis = &dirac.basis;
        let i = Complex::new(T::zero(), T::one());
        let f = |j: usize| {
            let k2 = pinv.apply(&apply_directional(lat, basis, modes.k, frame.k_e2, &modes.phi[j]));
            let el: Vec<Complex<T>> =
                pinv.apply(&apply_directional(lat, basis, modes.k, frame.ell, &modes.phi[j])).into_iter().map(|c| c * i).collect();
            let p = pinv.apply(&apply_perturbation(lat, basis, modes.k, flavor, field, &modes.phi[j]));
            (k2, el, p)
        };
        let (a0, b0, c0) = f(0);
        let (a1, b1, c1) = f(1);
        Ok(Self { valley, k: modes.k, phi: modes.phi, chi_k2: [a0, a1], chi_ell: [b0, b1], chi_p: [c0, c1] })
    }
}

/// Sample exp(i delta mu ell . x) [Psi_0 + delta Psi_1] on the ribbon, with
/// Psi_0 = Phi^T alpha(delta t2) and Psi_1 the first-order corrector. Returns the ribbon vector
/// for k_par = K* . v_e1 + delta mu (mod 2 pi).
pub fn multiscale_state<T: Real>(
    problem: &EdgeProblem<T>,
    dirac: &DiracPointData<T>,
    modes: &MultiscaleModes<T>,
    envelope: &dyn Envelope<T>,
    mu: T,
    with_corrector: bool,
) -> Vec<Complex<T>> {
    let rb = &problem.ribbon;
    let frame = &problem.frame;
    let delta = problem.delta;
    let k = modes.k;
    let kv1 = k.dot(frame.v_e1);
    let kpar = multiscale_kpar(frame, modes.valley, delta, mu) - delta * mu;
    let wind = ((kv1 - kpar) / T::TAU()).round().to_i64().unwrap();
    let kv2 = k.dot(frame.v_e2);
    let ell2 = frame.ell.dot(frame.v_e2);
    // (ribbon mode, q) for every plane wave
    let targets: Vec<(i64, i64)> = dirac
        .basis
        .indices
        .iter()
        .map(|&(m, n)| {
            let (p, q) = frame.edge_index(m, n);
            (p + wind, q)
        })
        .collect();
    let mut out = vec![cz::<T>(); rb.dim()];
    for i in 0..rb.n_points() {
        let t = rb.t::<T>(i);
        let s = delta * t;
        let al = envelope.alpha(s);
        let ap = envelope.alpha_prime(s);
        let kap = problem.wall.kappa(s);
        let phase_env = cis(delta * mu * ell2 * t);
        for (g, &(m, q)) in targets.iter().enumerate() {
            if m.unsigned_abs() as usize > rb.modes {
                continue;
            }
            let mut c = modes.phi[0][g] * al[0] + modes.phi[1][g] * al[1];
            if with_corrector {
                let mut c1 = cz::<T>();
                for j in 0..2 {
                    c1 = c1 + modes.chi_k2[j][g] * ap[j] + modes.chi_ell[j][g] * (al[j] * mu) - modes.chi_p[j][g] * (al[j] * kap);
                }
                c = c + c1 * delta;
            }
            let ph = cis((kv2 + T::TAU() * T::from_int(q)) * t);
            let idx = rb.index(i, m);
            out[idx] = out[idx] + c * ph * phase_env;
        }
    }
    out
}

/// Representative of k_par in (-pi, pi]; the Fourier window |m| <= M is centered on it.
pub fn reduce_kpar<T: Real>(k: T) -> T {
    let r = k - T::TAU() * (k / T::TAU()).round();
    if r <= -T::PI() {
        r + T::TAU()
    } else {
        r
    }
}

/// k_par of the multiscale state, reduced to (-pi, pi].
pub fn multiscale_kpar<T: Real>(frame: &EdgeFrame<T>, valley: Valley, delta: T, mu: T) -> T {
    reduce_kpar(frame.kpar(valley) + delta * mu)
}

/// Relative residual ||(H - E) psi|| / ||psi||.
pub fn relative_residual<T: Real>(a: &BandMatrix<T>, psi: &[Complex<T>], e: T) -> T {
    let mut r = a.matvec(psi);
    for (ri, p) in r.iter_mut().zip(psi) {
        *ri = *ri - *p * e;
    }
    vnorm(&r) / vnorm(psi)
}

/// Slope of log y against log x.
pub fn fit_order<T: Real>(x: &[T], y: &[T]) -> T {
    let n = T::from_int(x.len() as i64);
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().fold(T::zero(), |s, &v| s + v) / n;
    let my = ly.iter().fold(T::zero(), |s, &v| s + v) / n;
    let sxy = lx.iter().zip(&ly).fold(T::zero(), |s, (&a, &b)| s + (a - mx) * (b - my));
    let sxx = lx.iter().fold(T::zero(), |s, &a| s + (a - mx) * (a - mx));
    sxy / sxx
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualStudy {
    pub deltas: Vec<f64>,
    pub residuals: Vec<f64>,
    pub order: f64,
}

/// Residual of the first-order multiscale state at E_D + delta theta + energy_offset for each
/// delta, on ribbons of RESIDUAL_WIDTHS decay lengths. E_D is the discrete Dirac energy of the
/// ribbon discretization.
pub fn residual_order<T: Real>(
    setup: &EdgeSetup<T>,
    valley: Valley,
    envelope: &dyn Envelope<T>,
    theta: T,
    mu: T,
    deltas: &[T],
    energy_offset: T,
) -> Result<ResidualStudy> {
    let mut res = Vec::new();
    for &d in deltas {
        let p = setup.problem(d, RESIDUAL_WIDTHS);
        let modes = MultiscaleModes::new(&p.lattice, &p.potential, &setup.dirac, &p.frame, valley, p.flavor, &p.field)?;
        let psi = multiscale_state(&p, &setup.dirac, &modes, envelope, mu, true);
        let a = p.assemble(multiscale_kpar(&p.frame, valley, d, mu))?;
        let e_d = p.discrete_dirac_energy(valley, setup.dirac.b_star)?;
        res.push(relative_residual(&a, &psi, e_d + d * theta + energy_offset));
    }
    let mut order: Vec<(T, T)> = deltas.iter().copied().zip(res.iter().copied()).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if order.windows(2).any(|w| w[1].1 <= w[0].1) {
        return Err(Error::NonMonotoneResiduals(res.iter().map(|r| r.as_f64()).collect()));
    }
    let p = fit_order(deltas, &res);
    Ok(ResidualStudy {
        deltas: deltas.iter().map(|d| d.as_f64()).collect(),
        residuals: res.iter().map(|r| r.as_f64()).collect(),
        order: p.as_f64(),
    })
}

/// Overlap |<a, b>| / (|a| |b|).
pub fn overlap<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    vdot(a, b).norm() / (vnorm(a) * vnorm(b))
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowReport {
    pub flow: i32,
    pub kpar: Vec<f64>,
    pub branches: Vec<Vec<(f64, f64)>>,
    pub refinements: usize,
    pub min_overlap: f64,
}

/// Signed crossings of E_D by interface-state branches over one period of k_par.
///
/// Branches are continued by eigenvector overlap; when a branch near E_D cannot be continued
/// the k_par step is bisected (up to `max_refine` levels) before giving up.
pub fn edge_spectral_flow<T: Real>(
    problem: &EdgeProblem<T>,
    dirac: &DiracPointData<T>,
    kpar_grid: &[T],
    half_window: T,
    filter: &FilterOptions<T>,
    solver: &InteriorOptions,
    max_refine: usize,
) -> Result<FlowReport> {
    let window = (dirac.e_d - half_window, dirac.e_d + half_window);
    // solve at the representative in (-pi, pi]; the state keeps the unreduced k_par
    let solve = |k: T| -> Result<EdgeSpectrumPoint<T>> {
        let mut p = edge_states_at(problem, reduce_kpar(k), window, None, filter, solver)?;
        p.kpar = k;
        p.states.retain(|s| s.interface);
        Ok(p)
    };
    let winding = |k: T| ((k - reduce_kpar(k)) / T::TAU()).round().to_i64().unwrap();
    let min_ov = T::lit(0.7);
    let cluster = half_window * T::lit(1e-3);
    let mut pts: Vec<EdgeSpectrumPoint<T>> = vec![solve(kpar_grid[0])?];
    let mut refinements = 0;
    let mut worst = T::one();
    // branch id per state of the last point, and per-branch samples
    let mut ids: Vec<usize> = (0..pts[0].states.len()).collect();
    let mut branches: Vec<Vec<(T, T)>> = pts[0].states.iter().map(|s| vec![(pts[0].kpar, s.energy - dirac.e_d)]).collect();
    let mut queue: Vec<(T, usize)> = kpar_grid[1..].iter().map(|&k| (k, 0)).collect();
    queue.reverse();
    while let Some((k, depth)) = queue.pop() {
        let next = solve(k)?;
        let prev = pts.last().unwrap();
        let shift = winding(prev.kpar) - winding(k);
        let moved: Vec<Vec<Complex<T>>> = prev.states.iter().map(|s| shift_modes(&problem.ribbon, &s.vector, shift)).collect();
        let ps: Vec<Sample<T>> = prev.states.iter().zip(&moved).map(|(s, v)| Sample { value: s.energy, vector: v }).collect();
        let ns: Vec<Sample<T>> = next.states.iter().map(|s| Sample { value: s.energy, vector: &s.vector }).collect();
        let l = link(&ps, &ns, min_ov, cluster);
        let lost = l.iter().zip(&prev.states).any(|(x, s)| x.is_none() && (s.energy - dirac.e_d).abs() < half_window / T::lit(2.0));
        let taken: Vec<bool> = (0..next.states.len()).map(|b| l.iter().any(|x| x.map(|y| y.0) == Some(b))).collect();
        let born = next
            .states
            .iter()
            .enumerate()
            .any(|(b, s)| !taken[b] && (s.energy - dirac.e_d).abs() < half_window / T::lit(2.0));
        if lost || born {
            if depth < max_refine {
                refinements += 1;
                queue.push((k, depth + 1));
                queue.push(((prev.kpar + k) / T::lit(2.0), depth + 1));
                continue;
            }
            return Err(Error::TrackingAmbiguity { at: k.as_f64(), overlap: worst.as_f64() });
        }
        let mut new_ids = vec![usize::MAX; next.states.len()];
        for (a, x) in l.iter().enumerate() {
            if let Some((b, o)) = x {
                worst = worst.min(*o);
                new_ids[*b] = ids[a];
                branches[ids[a]].push((k, next.states[*b].energy - dirac.e_d));
            }
        }
        for (b, id) in new_ids.iter_mut().enumerate() {
            if *id == usize::MAX {
                branches.push(vec![(k, next.states[b].energy - dirac.e_d)]);
                *id = branches.len() - 1;
            }
        }
        ids = new_ids;
        pts.push(next);
    }
    let zero_tol = half_window * T::lit(1e-10);
    let flow = branches
        .iter()
        .map(|b| crate::dirac1d::signed_crossings(&b.iter().map(|x| x.1).collect::<Vec<_>>(), zero_tol))
        .sum();
    Ok(FlowReport {
        flow,
        kpar: pts.iter().map(|p| p.kpar.as_f64()).collect(),
        branches: branches.iter().map(|b| b.iter().map(|(k, e)| (k.as_f64(), e.as_f64())).collect()).collect(),
        refinements,
        min_overlap: worst.as_f64(),
    })
}

/// Re-expresses a ribbon vector at k_par in the mode labels of k_par - 2 pi shift:
/// mode m becomes m + shift. Modes pushed out of the window are dropped.
pub fn shift_modes<T: Real>(ribbon: &RibbonDiscretization, x: &[Complex<T>], shift: i64) -> Vec<Complex<T>> {
    if shift == 0 {
        return x.to_vec();
    }
    let nm = ribbon.n_modes();
    let mut out = vec![cz::<T>(); x.len()];
    for i in 0..ribbon.n_points() {
        for l in 0..nm {
            let m = ribbon.mode(l) + shift;
            if m.unsigned_abs() as usize <= ribbon.modes {
                out[ribbon.index(i, m)] = x[i * nm + l];
            }
        }
    }
    out
}

/// Default k_par loop: a coarse uniform grid plus dense samples around each valley, starting
/// at the point of the circle farthest from both valleys.
pub fn default_kpar_loop<T: Real>(frame: &EdgeFrame<T>, dense_half_width: T, n_coarse: usize, n_dense: usize) -> Vec<T> {
    let valleys = [frame.kpar_k, frame.kpar_kp];
    let start = if frame.is_armchair() { frame.kpar_k + T::PI() } else { T::zero() };
    let wrap = |k: T| {
        let x = (k - start) / T::TAU();
        start + T::TAU() * (x - x.floor())
    };
    let mut ks: Vec<T> = (0..n_coarse).map(|i| start + T::TAU() * T::from_int(i as i64) / T::from_int(n_coarse as i64)).collect();
    for (vi, &v) in valleys.iter().enumerate() {
        if vi == 1 && frame.is_armchair() {
            break;
        }
        for j in 0..n_dense {
            let f = T::from_int(j as i64) / T::from_int(n_dense as i64 - 1) * T::lit(2.0) - T::one();
            ks.push(wrap(v + dense_half_width * f));
        }
    }
    ks.push(start + T::TAU());
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ks.dedup_by(|a, b| (*a - *b).abs() < T::lit(1e-12));
    ks
}

#[derive(Clone, Debug, Serialize)]
pub struct CountCheck {
    pub valley: String,
    pub delta: f64,
    pub mu: f64,
    pub kpar: f64,
    pub expected: usize,
    pub found: usize,
    pub energies: Vec<f64>,
}

/// In-gap interface states at the k_par of a valley.
pub fn in_gap_interface_states<T: Real>(
    problem: &EdgeProblem<T>,
    dirac: &DiracPointData<T>,
    kpar: T,
    filter: &FilterOptions<T>,
    solver: &InteriorOptions,
) -> Result<EdgeSpectrumPoint<T>> {
    let gap = gap_at(problem, dirac, kpar, 64)?;
    edge_states_at(problem, kpar, gap, Some(gap), filter, solver)
}

#[derive(Clone, Debug, Serialize)]
pub struct PairSplitting {
    pub delta: f64,
    pub energies: [f64; 2],
    pub splitting: f64,
    /// weight of each state in span{multiscale K, multiscale K'}
    pub valley_weight: [f64; 2],
}

/// Splitting of the armchair pair seeded by the two zero modes at k_par = delta mu.
pub fn armchair_pair_splitting<T: Real>(
    problem: &EdgeProblem<T>,
    dirac: &DiracPointData<T>,
    envelopes: [&dyn Envelope<T>; 2],
    mu: T,
    filter: &FilterOptions<T>,
    solver: &InteriorOptions,
) -> Result<PairSplitting> {
    if !problem.frame.is_armchair() {
        return Err(Error::PairIdentificationFailure("frame is not armchair-type".into()));
    }
    let kpar = multiscale_kpar(&problem.frame, Valley::K, problem.delta, mu);
    let lat = &problem.lattice;
    let mk = MultiscaleModes::new(lat, &problem.potential, dirac, &problem.frame, Valley::K, problem.flavor, &problem.field)?;
    let mkp = MultiscaleModes::new(lat, &problem.potential, dirac, &problem.frame, Valley::Kp, problem.flavor, &problem.field)?;
    let mut qk = multiscale_state(problem, dirac, &mk, envelopes[0], mu, true);
    let mut qkp = multiscale_state(problem, dirac, &mkp, envelopes[1], mu, true);
    // orthonormalize the trial pair
    let n = vnorm(&qk);
    qk.iter_mut().for_each(|c| *c = *c / n);
    let c = vdot(&qk, &qkp);
    for (b, a) in qkp.iter_mut().zip(&qk) {
        *b = *b - *a * c;
    }
    let n = vnorm(&qkp);
    qkp.iter_mut().for_each(|c| *c = *c / n);
    let theta = coupling_gap(dirac, problem.flavor)?;
    let w = problem.delta * theta;
    let pt = edge_states_at(problem, kpar, (dirac.e_d - w, dirac.e_d + w), None, filter, solver)?;
    let mut scored: Vec<(T, &EdgeState<T>)> = pt
        .interface_states()
        .map(|s| {
            let nv = vnorm(&s.vector);
            let a = vdot(&qk, &s.vector).norm() / nv;
            let b = vdot(&qkp, &s.vector).norm() / nv;
            ((a * a + b * b).sqrt(), s)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    if scored.len() < 2 || scored[1].0 < T::lit(0.9) {
        return Err(Error::PairIdentificationFailure(format!(
            "{} candidate states, weights {:?}",
            scored.len(),
            scored.iter().map(|s| s.0.as_f64()).collect::<Vec<_>>()
        )));
    }
    let (e0, e1) = (scored[0].1.energy, scored[1].1.energy);
    Ok(PairSplitting {
        delta: problem.delta.as_f64(),
        energies: [e0.as_f64(), e1.as_f64()],
        splitting: (e0 - e1).abs().as_f64(),
        valley_weight: [scored[0].0.as_f64(), scored[1].0.as_f64()],
    })
}

/// Bulk consistency gate for edge runs: Dirac point, nondegeneracy, and no-fold.
pub fn check_prerequisites<T: Real>(
    lat: &LatticeBasis<T>,
    potential: &FourierPotential<T>,
    dirac: &DiracPointData<T>,
    frame: &EdgeFrame<T>,
    flavor: Flavor,
) -> Result<()> {
    coupling_gap(dirac, flavor)?;
    let nf = crate::bulk::check_no_fold(lat, potential, frame, dirac, 201, T::lit(1e-3))?;
    if !nf.passed {
        return Err(Error::PrerequisiteFailure(format!("H2: no-fold fails at t = {:?}", nf.offending_t)));
    }
    Ok(())
}

/// Everything needed to build edge problems for one potential, perturbation, wall and frame.
#[derive(Clone, Debug)]
pub struct EdgeSetup<T> {
    pub lattice: LatticeBasis<T>,
    pub potential: FourierPotential<T>,
    pub flavor: Flavor,
    pub field: FourierPotential<T>,
    pub wall: DomainWall<T>,
    pub frame: EdgeFrame<T>,
    pub dirac: DiracPointData<T>,
    /// effective Dirac models at K and K'
    pub models: [EffectiveDiracModel<T>; 2],
    pub modes: usize,
    pub n_perp: usize,
    pub fd_order: usize,
}

impl<T: Real> EdgeSetup<T> {
    pub fn new(
        lattice: LatticeBasis<T>,
        potential: FourierPotential<T>,
        flavor: Flavor,
        field: FourierPotential<T>,
        wall: DomainWall<T>,
        frame: EdgeFrame<T>,
        dirac: DiracPointData<T>,
    ) -> Result<Self> {
        let models = [
            EffectiveDiracModel::from_dirac_point(&dirac, &frame, flavor, Valley::K, wall.clone())?,
            EffectiveDiracModel::from_dirac_point(&dirac, &frame, flavor, Valley::Kp, wall.clone())?,
        ];
        Ok(Self { lattice, potential, flavor, field, wall, frame, dirac, models, modes: DEFAULT_MODES, n_perp: 16, fd_order: 8 })
    }

    pub fn model(&self, valley: Valley) -> &EffectiveDiracModel<T> {
        match valley {
            Valley::K => &self.models[0],
            Valley::Kp => &self.models[1],
        }
    }

    /// Slowest zero-mode decay rate over both valleys, per unit s.
    pub fn decay_rate(&self) -> T {
        self.models[0].decay_rate().min(self.models[1].decay_rate())
    }

    pub fn theta_gap(&self) -> Result<T> {
        coupling_gap(&self.dirac, self.flavor)
    }

    pub fn ribbon(&self, delta: T, widths: f64) -> RibbonDiscretization {
        let rb = RibbonDiscretization::for_delta(delta.as_f64(), self.decay_rate().as_f64(), self.modes, widths);
        RibbonDiscretization { n_perp: self.n_perp, fd_order: self.fd_order, ..rb }
    }

    pub fn problem(&self, delta: T, widths: f64) -> EdgeProblem<T> {
        EdgeProblem {
            lattice: self.lattice.clone(),
            potential: self.potential.clone(),
            flavor: self.flavor,
            field: self.field.clone(),
            wall: self.wall.clone(),
            delta,
            frame: self.frame,
            ribbon: self.ribbon(delta, widths),
        }
    }

    pub fn filter(&self, delta: T) -> FilterOptions<T> {
        FilterOptions::for_delta(delta, self.decay_rate())
    }

    /// Valleys whose k_par is sampled separately: both for zigzag-type frames, only K for
    /// armchair-type frames where they share k_par.
    pub fn valleys(&self) -> Vec<Valley> {
        if self.frame.is_armchair() {
            vec![Valley::K]
        } else {
            vec![Valley::K, Valley::Kp]
        }
    }

    /// Number N of bound-state pairs of the effective Dirac operator at mu = 0 (from the
    /// discretized operator), checked equal at both valleys.
    pub fn dirac_pairs(&self) -> Result<usize> {
        let opts = crate::dirac1d::BoundStateOptions::default();
        let mut n = Vec::new();
        for m in &self.models {
            let sp = crate::dirac1d::bound_states(m, T::zero(), &crate::dirac1d::DiracGrid::for_model(m), &opts)?;
            n.push(sp.n_pairs().ok_or_else(|| Error::CountMismatch { expected: 0, found: sp.bound_states.len() })?);
        }
        if n[0] != n[1] {
            return Err(Error::CountMismatch { expected: n[0], found: n[1] });
        }
        Ok(n[0])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchSample {
    pub valley: String,
    pub delta: f64,
    pub mu: f64,
    pub kpar: f64,
    /// E_j - E_D
    pub shift: f64,
    /// delta theta_j(mu)
    pub predicted: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchOrder {
    pub valley: String,
    pub mu: f64,
    pub theta: f64,
    pub errors: Vec<f64>,
    pub order: f64,
    /// (E - E_D)/delta extrapolated to delta = 0 through a quadratic in delta
    pub extrapolated: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrespondenceReport {
    pub frame: (i64, i64),
    pub flavor: String,
    pub n_pairs: usize,
    pub counts: Vec<CountCheck>,
    pub samples: Vec<BranchSample>,
    pub orders: Vec<BranchOrder>,
    pub counts_match: bool,
    pub min_order: f64,
}

fn valley_name(v: Valley) -> &'static str {
    match v {
        Valley::K => "K",
        Valley::Kp => "K'",
    }
}

/// Quadratic extrapolation to x = 0 through three points.
fn extrapolate_quadratic(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != 3 {
        return None;
    }
    let mut v = 0.0;
    for i in 0..3 {
        let mut l = 1.0;
        for j in 0..3 {
            if j != i {
                l *= x[j] / (x[j] - x[i]);
            }
        }
        v += y[i] * l;
    }
    Some(v)
}

/// Compares in-gap edge states with the effective Dirac spectrum: the count 2N+1 per valley
/// (zigzag) or 4N+2 (armchair) at k_par = K* . v_e1 + delta mu, and the zero-branch error
/// |E - E_D - delta theta_0(mu)| over the delta sequence. E_D is the Dirac energy of the
/// discretized one-cell operator, so that the comparison does not pick up the O(h^8) shift of
/// the transverse discretization.
pub fn correspondence_check<T: Real>(
    setup: &EdgeSetup<T>,
    deltas: &[T],
    mus: &[T],
    solver: &InteriorOptions,
) -> Result<CorrespondenceReport> {
    let n = setup.dirac_pairs()?;
    let armchair = setup.frame.is_armchair();
    let per_point = if armchair { 4 * n + 2 } else { 2 * n + 1 };
    let mut counts = Vec::new();
    let mut samples = Vec::new();
    for &d in deltas {
        let p = setup.problem(d, EIGEN_WIDTHS);
        let e_d = p.discrete_dirac_energy(Valley::K, setup.dirac.b_star)?;
        let filter = setup.filter(d);
        for &mu in mus {
            for v in setup.valleys() {
                let kpar = multiscale_kpar(&setup.frame, v, d, mu);
                let pt = in_gap_interface_states(&p, &setup.dirac, kpar, &filter, solver)?;
                let energies: Vec<T> = pt.in_gap_interface().map(|s| s.energy).collect();
                counts.push(CountCheck {
                    valley: if armchair { "K+K'".into() } else { valley_name(v).into() },
                    delta: d.as_f64(),
                    mu: mu.as_f64(),
                    kpar: kpar.as_f64(),
                    expected: per_point,
                    found: energies.len(),
                    energies: energies.iter().map(|e| e.as_f64()).collect(),
                });
                let branch_valleys = if armchair { vec![Valley::K, Valley::Kp] } else { vec![v] };
                let mut used = vec![false; energies.len()];
                for bv in branch_valleys {
                    let pred = d * crate::dirac1d::zero_branch_operator(setup.model(bv), mu);
                    let best = energies
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !used[*i])
                        .min_by(|a, b| (*a.1 - e_d - pred).abs().partial_cmp(&(*b.1 - e_d - pred).abs()).unwrap());
                    if let Some((i, &e)) = best {
                        used[i] = true;
                        samples.push(BranchSample {
                            valley: valley_name(bv).into(),
                            delta: d.as_f64(),
                            mu: mu.as_f64(),
                            kpar: kpar.as_f64(),
                            shift: (e - e_d).as_f64(),
                            predicted: pred.as_f64(),
                            error: (e - e_d - pred).abs().as_f64(),
                        });
                    }
                }
            }
        }
    }
    let mut orders = Vec::new();
    for v in [Valley::K, Valley::Kp] {
        for &mu in mus {
            let s: Vec<&BranchSample> = samples.iter().filter(|x| x.valley == valley_name(v) && x.mu == mu.as_f64()).collect();
            if s.len() != deltas.len() || s.len() < 2 {
                continue;
            }
            let x: Vec<f64> = s.iter().map(|b| b.delta).collect();
            let y: Vec<f64> = s.iter().map(|b| b.error).collect();
            let slopes: Vec<f64> = s.iter().map(|b| b.shift / b.delta).collect();
            orders.push(BranchOrder {
                valley: valley_name(v).into(),
                mu: mu.as_f64(),
                theta: crate::dirac1d::zero_branch_operator(setup.model(v), mu).as_f64(),
                order: fit_order(&x, &y),
                errors: y,
                extrapolated: extrapolate_quadratic(&x, &slopes),
            });
        }
    }
    let counts_match = counts.iter().all(|c| c.found == c.expected);
    let min_order = orders.iter().map(|o| o.order).fold(f64::INFINITY, f64::min);
    Ok(CorrespondenceReport {
        frame: (setup.frame.a1, setup.frame.b1),
        flavor: format!("{:?}", setup.flavor),
        n_pairs: n,
        counts,
        samples,
        orders,
        counts_match,
        min_order,
    })
}

/// Spectral flow of the edge curves over one period of k_par at the default grid: dense
/// sampling over |k_par - K* . v_e1| <= delta theta_gap |K2| / v_F, where the zero branches
/// cross E_D, and an energy window of half the bulk gap.
pub fn spectral_flow_default<T: Real>(setup: &EdgeSetup<T>, delta: T, solver: &InteriorOptions) -> Result<FlowReport> {
    let theta = setup.theta_gap()?;
    let p = setup.problem(delta, EIGEN_WIDTHS);
    let reach = delta * theta * setup.frame.k_e2.norm() / setup.dirac.v_f;
    // an even dense count keeps the valley point itself off the grid: for armchair frames the
    // two valley branches meet there and the eigenvectors are equal mixtures
    let grid = default_kpar_loop(&setup.frame, reach.min(T::lit(0.5)), 16, 16);
    let e_d = p.discrete_dirac_energy(Valley::K, setup.dirac.b_star)?;
    let mut dirac = setup.dirac.clone();
    dirac.e_d = e_d;
    edge_spectral_flow(&p, &dirac, &grid, T::lit(0.5) * delta * theta, &setup.filter(delta), solver, 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, edge_frame};
    use crate::linalg::dense::eigvalsh;
    use crate::potentials::{default_a, default_honeycomb_v, default_w, tanh_wall};

    fn small(flavor: Flavor, frame: (i64, i64), delta: f64, wall: DomainWall<f64>) -> EdgeProblem<f64> {
        let lat = build_lattice();
        let fr = edge_frame(&lat, frame.0, frame.1).unwrap();
        let field = match flavor {
            Flavor::PBreaking => default_w(1.0).unwrap(),
            Flavor::CBreaking => default_a(1.0).unwrap(),
        };
        EdgeProblem {
            lattice: lat,
            potential: default_honeycomb_v(10.0).unwrap(),
            flavor,
            field,
            wall,
            delta,
            frame: fr,
            ribbon: RibbonDiscretization { modes: 3, l_cells: 40, n_perp: 8, fd_order: 8, bc: BoundaryCondition::Dirichlet },
        }
    }

    #[test]
    fn ribbon_matrix_is_hermitian() {
        for flavor in [Flavor::PBreaking, Flavor::CBreaking] {
            for frame in [(1, 0), (1, 1), (2, 1)] {
                let p = small(flavor, frame, 0.3, tanh_wall());
                let a = p.assemble(0.7).unwrap();
                assert!(a.hermiticity_residual() < 1e-10, "{flavor:?} {frame:?}");
            }
        }
    }

    #[test]
    fn narrow_ribbon_is_rejected() {
        let mut p = small(Flavor::PBreaking, (1, 0), 0.3, tanh_wall());
        p.ribbon.l_cells = 20;
        assert!(matches!(p.assemble(0.0), Err(Error::RibbonTooNarrow(_))));
    }

    #[test]
    fn fd_weights_are_consistent() {
        for order in [2, 4, 6, 8] {
            let (d1, d2, c) = fd_weights(order);
            // first derivative of x, second derivative of x^2 and constants
            let s1: f64 = d1.iter().enumerate().map(|(k, w)| 2.0 * w * (k + 1) as f64).sum();
            assert!((s1 - 1.0).abs() < 1e-14);
            let s0: f64 = c + 2.0 * d2.iter().sum::<f64>();
            assert!(s0.abs() < 1e-14);
            let s2: f64 = d2.iter().enumerate().map(|(k, w)| 2.0 * w * ((k + 1) as f64).powi(2)).sum();
            assert!((s2 - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn conjugation_maps_kpar_to_minus_kpar() {
        let p = small(Flavor::PBreaking, (1, 0), 0.3, tanh_wall());
        let mut q = p.clone();
        q.ribbon = RibbonDiscretization { modes: 2, l_cells: 34, n_perp: 3, ..q.ribbon };
        let a = eigvalsh(&q.assemble(0.9).unwrap().to_dense()).unwrap();
        let b = eigvalsh(&q.assemble(-0.9).unwrap().to_dense()).unwrap();
        let dev = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(dev < 1e-9, "{dev}");
    }

    #[test]
    fn kpar_loop_is_sorted_and_periodic() {
        let lat = build_lattice::<f64>();
        let fr = edge_frame(&lat, 1, 0).unwrap();
        let ks = default_kpar_loop(&fr, 0.2, 12, 9);
        assert!(ks.windows(2).all(|w| w[1] > w[0]));
        assert!((ks.last().unwrap() - ks[0] - std::f64::consts::TAU).abs() < 1e-12);
        let fa = edge_frame(&lat, 1, 1).unwrap();
        let ka = default_kpar_loop(&fa, 0.2, 12, 9);
        assert!((ka[0] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn order_fit_recovers_power() {
        let x = [0.4, 0.2, 0.1];
        let y: Vec<f64> = x.iter().map(|d: &f64| 3.0 * d * d).collect();
        assert!((fit_order(&x, &y) - 2.0).abs() < 1e-12);
    }
}
