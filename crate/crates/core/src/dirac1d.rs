//! One-dimensional Dirac operators with a domain-wall mass
//!
//! ```text
//! D(mu) = a sigma_1 (1/i) d/ds + m(mu) sigma_2 + theta kappa(s) sigma_3,
//! a = v |K2|,  m(mu) = v mu / |K2|
//! ```
//!
//! The discretization works in the eigenbasis of sigma_2, where D(0) is off-diagonal with
//! blocks `theta kappa -/+ a d/ds`. One chirality lives on grid nodes and the other on cell
//! midpoints (a staggered grid), so the first-order blocks are rectangular. This keeps the
//! chiral symmetry exact, has no fermion doublers, and the dimension mismatch pins an exact
//! zero mode.

use crate::bulk::{DiracPointData, Flavor};
use crate::error::{Error, Result};
use crate::lattice::{EdgeFrame, Valley};
use crate::linalg::banded::BandMatrix;
use crate::linalg::lanczos::{interior_eigenpairs, InteriorOptions};
use crate::potentials::DomainWall;
use crate::scalar::{cr, cz, vdot, vnorm, Real};
use num_complex::Complex;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct EffectiveDiracModel<T> {
    /// signed Fermi velocity of the valley
    pub v_f_valley: T,
    pub k2_norm: T,
    /// signed coupling of the valley (theta or theta tilde)
    pub theta_valley: T,
    pub wall: DomainWall<T>,
    pub valley: Valley,
    pub flavor: Flavor,
}

impl<T: Real> EffectiveDiracModel<T> {
    pub fn from_dirac_point(
        data: &DiracPointData<T>,
        frame: &EdgeFrame<T>,
        flavor: Flavor,
        valley: Valley,
        wall: DomainWall<T>,
    ) -> Result<Self> {
        let theta = data
            .coupling(flavor, valley)
            .ok_or_else(|| Error::Config(format!("no coupling computed for {flavor:?}")))?;
        Ok(Self { v_f_valley: data.v_f_valley(valley), k2_norm: frame.k_e2.norm(), theta_valley: theta, wall, valley, flavor })
    }

    /// Coefficient of sigma_1 (1/i) d/ds.
    pub fn a(&self) -> T {
        self.v_f_valley * self.k2_norm
    }

    /// Coefficient of sigma_2.
    pub fn mass(&self, mu: T) -> T {
        self.v_f_valley * mu / self.k2_norm
    }

    pub fn theta_gap(&self) -> T {
        self.theta_valley.abs()
    }

    pub fn gap_edge(&self, mu: T) -> T {
        let m = self.mass(mu);
        (self.theta_valley * self.theta_valley + m * m).sqrt()
    }

    /// Decay rate of the zero mode far from the wall, in units of s.
    pub fn decay_rate(&self) -> T {
        (self.theta_valley / self.a()).abs()
    }

    /// sigma_2 eigenvalue carried by the zero mode.
    pub fn chirality(&self) -> T {
        (self.theta_valley / self.a()).signum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracGrid<T> {
    pub half_length: T,
    /// number of nodes
    pub n: usize,
    /// accuracy order of the staggered stencils: 2, 4 or 6
    pub order: usize,
}

impl<T: Real> DiracGrid<T> {
    /// Window of at least 30 and 30 zero-mode decay lengths; node spacing 0.03 per unit of
    /// the faster of the wall width and the decay length.
    pub fn for_model(model: &EffectiveDiracModel<T>) -> Self {
        let g = model.decay_rate();
        let l = T::lit(30.0).max(T::lit(30.0) / g);
        let h = T::lit(0.03) / T::one().max(g);
        let n = ((l + l) / h).ceil().to_usize().unwrap_or(2048).max(2048) + 1;
        Self { half_length: l, n, order: 6 }
    }

    pub fn spacing(&self) -> T {
        (self.half_length + self.half_length) / T::from_int(self.n as i64 - 1)
    }

    pub fn node(&self, i: usize) -> T {
        -self.half_length + self.spacing() * T::from_int(i as i64)
    }

    pub fn midpoint(&self, j: usize) -> T {
        -self.half_length + self.spacing() * (T::from_int(j as i64) + T::lit(0.5))
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, ..*self }
    }

    pub fn widened(&self) -> Self {
        Self { half_length: self.half_length + self.half_length, n: 2 * self.n - 1, ..*self }
    }

    fn validate(&self, model: &EffectiveDiracModel<T>) -> Result<()> {
        if ![2, 4, 6].contains(&self.order) {
            return Err(Error::Config(format!("stencil order {} not in {{2, 4, 6}}", self.order)));
        }
        if self.n < 512 {
            return Err(Error::GridTooCoarse(format!("{} nodes, need at least 512", self.n)));
        }
        let g = model.decay_rate();
        if self.half_length * g < T::lit(20.0) || self.half_length < T::lit(10.0) {
            return Err(Error::GridTooCoarse(format!(
                "half-length {} is under 20 decay lengths ({})",
                self.half_length,
                T::one() / g
            )));
        }
        if self.spacing() * T::one().max(g) > T::lit(0.25) {
            return Err(Error::GridTooCoarse(format!("spacing {} too large", self.spacing())));
        }
        Ok(())
    }
}

/// Staggered first derivative and midpoint interpolation weights, offsets 1/2, 3/2, 5/2.
fn stencils(order: usize) -> (&'static [f64], &'static [f64]) {
    match order {
        2 => (&[1.0], &[0.5]),
        4 => (&[9.0 / 8.0, -1.0 / 24.0], &[9.0 / 16.0, -1.0 / 16.0]),
        _ => (&[75.0 / 64.0, -25.0 / 384.0, 3.0 / 640.0], &[150.0 / 256.0, -25.0 / 256.0, 3.0 / 256.0]),
    }
}

/// Discrete operator in the chiral basis, interleaved as (node 0, midpoint 0, node 1, ...).
/// Node unknowns carry the zero-mode chirality.
#[derive(Clone, Debug)]
pub struct DiscreteDirac<T> {
    pub grid: DiracGrid<T>,
    pub matrix: BandMatrix<T>,
    pub chirality: T,
}

impl<T: Real> DiscreteDirac<T> {
    pub fn node_index(i: usize) -> usize {
        2 * i
    }

    pub fn midpoint_index(j: usize) -> usize {
        2 * j + 1
    }

    /// Map a chiral-basis vector to amplitudes (alpha_1, alpha_2) at the nodes.
    pub fn to_amplitudes(&self, x: &[Complex<T>]) -> Vec<[Complex<T>; 2]> {
        let n = self.grid.n;
        let (_, w) = stencils(self.grid.order);
        let mid = |j: i64| -> Complex<T> {
            if j < 0 || j as usize >= n - 1 {
                cz()
            } else {
                x[Self::midpoint_index(j as usize)]
            }
        };
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let i_unit = Complex::new(T::zero(), T::one());
        (0..n)
            .map(|i| {
                let z = x[Self::node_index(i)];
                let mut o = cz::<T>();
                for (k, &wk) in w.iter().enumerate() {
                    let k = k as i64;
                    o = o + (mid(i as i64 - 1 - k) + mid(i as i64 + k)) * T::lit(wk);
                }
                // sigma_2 = +1 component is the upper one
                let (up, lo) = if self.chirality > T::zero() { (z, o) } else { (o, z) };
                [(up + lo) * T::lit(r), i_unit * (up - lo) * T::lit(r)]
            })
            .collect()
    }

    /// Mass fraction of a chiral-basis vector with |s| <= radius.
    pub fn mass_within(&self, x: &[Complex<T>], radius: T) -> T {
        let mut inside = T::zero();
        let mut total = T::zero();
        for i in 0..self.grid.n {
            let w = x[Self::node_index(i)].norm_sqr();
            total = total + w;
            if self.grid.node(i).abs() <= radius {
                inside = inside + w;
            }
            if i + 1 < self.grid.n {
                let w = x[Self::midpoint_index(i)].norm_sqr();
                total = total + w;
                if self.grid.midpoint(i).abs() <= radius {
                    inside = inside + w;
                }
            }
        }
        inside / total
    }
}

pub fn assemble_dirac<T: Real>(model: &EffectiveDiracModel<T>, mu: T, grid: &DiracGrid<T>) -> Result<DiscreteDirac<T>> {
    grid.validate(model)?;
    let n = grid.n;
    let h = grid.spacing();
    let (d, w) = stencils(grid.order);
    let r = d.len();
    let lam = model.chirality();
    let a = model.a();
    let theta = model.theta_valley;
    let m = model.mass(mu);
    let mut mat = BandMatrix::zeros(2 * n - 1, 2 * r - 1);
    for i in 0..n {
        mat.add(2 * i, 2 * i, cr(lam * m));
    }
    for j in 0..n - 1 {
        let row = DiscreteDirac::<T>::midpoint_index(j);
        mat.add(row, row, cr(-lam * m));
        let tk = theta * model.wall.kappa(grid.midpoint(j));
        for k in 0..r {
            let lo = j as i64 - k as i64;
            let hi = j as i64 + 1 + k as i64;
            // B = theta kappa I + lam a D, from nodes to midpoints
            let dk = lam * a * T::lit(d[k]) / h;
            let wk = tk * T::lit(w[k]);
            for (node, val) in [(lo, wk - dk), (hi, wk + dk)] {
                if node >= 0 && (node as usize) < n {
                    let col = DiscreteDirac::<T>::node_index(node as usize);
                    mat.add(row, col, cr(val));
                    mat.add(col, row, cr(val));
                }
            }
        }
    }
    Ok(DiscreteDirac { grid: *grid, matrix: mat, chirality: lam })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundState<T> {
    pub value: T,
    pub interior_mass: T,
    #[serde(skip)]
    pub amplitudes: Vec<[Complex<T>; 2]>,
    #[serde(skip)]
    pub chiral: Vec<Complex<T>>,
}

#[derive(Clone, Debug)]
pub struct DiracSpectrum<T> {
    pub mu: T,
    pub grid: DiracGrid<T>,
    pub bound_states: Vec<BoundState<T>>,
    /// eigenvalues in the window that failed the localization filter
    pub rejected: Vec<T>,
    pub gap_edge: T,
}

impl<T: Real> DiracSpectrum<T> {
    pub fn values(&self) -> Vec<T> {
        self.bound_states.iter().map(|b| b.value).collect()
    }

    /// N with 2N + 1 bound states, if the count is odd.
    pub fn n_pairs(&self) -> Option<usize> {
        let c = self.bound_states.len();
        (c % 2 == 1).then_some(c / 2)
    }

    /// The branch through zero: the middle state of an odd spectrum.
    pub fn zero_branch(&self) -> Option<&BoundState<T>> {
        self.n_pairs().map(|n| &self.bound_states[n])
    }

    /// State j in -N..=N.
    pub fn branch(&self, j: i64) -> Option<&BoundState<T>> {
        let n = self.n_pairs()? as i64;
        (j.abs() <= n).then(|| &self.bound_states[(n + j) as usize])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundStateOptions {
    /// relative exclusion band below the gap edge
    pub edge_fraction: f64,
    /// required mass fraction within |s| <= L/2
    pub localization: f64,
    pub solver: InteriorOptions,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        Self {
            edge_fraction: 1e-3,
            localization: 0.99,
            solver: InteriorOptions { max_dim: 400, tol: 1e-10, shift_fraction: 0.5137, ..Default::default() },
        }
    }
}

pub fn bound_states<T: Real>(
    model: &EffectiveDiracModel<T>,
    mu: T,
    grid: &DiracGrid<T>,
    opts: &BoundStateOptions,
) -> Result<DiracSpectrum<T>> {
    let op = assemble_dirac(model, mu, grid)?;
    let gap = model.gap_edge(mu);
    let edge = gap * (T::one() - T::lit(opts.edge_fraction));
    let pairs = interior_eigenpairs(&op.matrix, -edge, edge, &opts.solver)?;
    let mut bound_states = Vec::new();
    let mut rejected = Vec::new();
    for (value, x) in pairs.values.into_iter().zip(pairs.vectors) {
        let interior_mass = op.mass_within(&x, grid.half_length / T::lit(2.0));
        if interior_mass >= T::lit(opts.localization) {
            bound_states.push(BoundState { value, interior_mass, amplitudes: op.to_amplitudes(&x), chiral: x });
        } else {
            rejected.push(value);
        }
    }
    Ok(DiracSpectrum { mu, grid: *grid, bound_states, rejected, gap_edge: gap })
}

/// Closed-form zero mode at mu = 0, sampled on the grid nodes.
#[derive(Clone, Debug)]
pub struct ZeroMode<T> {
    pub s: Vec<T>,
    pub amplitudes: Vec<[Complex<T>; 2]>,
    /// sigma_2 eigenvector carried by the mode
    pub spinor: [Complex<T>; 2],
    /// relative residual of the sampled mode in the discrete equation
    pub discrete_residual: T,
    /// the sampled mode as a chiral-basis vector (node entries only)
    pub chiral: Vec<Complex<T>>,
}

/// Envelope exp(-(lam theta / a) int_0^s kappa) with lam = sgn(theta / a).
pub fn zero_mode_envelope<T: Real>(model: &EffectiveDiracModel<T>, s: T) -> T {
    (-model.decay_rate() * model.wall.integral(s)).exp()
}

/// sigma_2 eigenvector with eigenvalue `lam`, normalized.
pub fn sigma2_spinor<T: Real>(lam: T) -> [Complex<T>; 2] {
    let r = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    [Complex::new(r, T::zero()), Complex::new(T::zero(), lam * r)]
}

pub fn zero_mode_exact<T: Real>(model: &EffectiveDiracModel<T>, grid: &DiracGrid<T>) -> Result<ZeroMode<T>> {
    let lam = model.chirality();
    if !(lam.abs() > T::zero()) || model.wall.minus_inf * model.wall.plus_inf >= T::zero() {
        return Err(Error::NotNormalizable);
    }
    // the envelope must decay on both sides
    let rate_plus = lam * model.theta_valley / model.a() * model.wall.plus_inf;
    let rate_minus = lam * model.theta_valley / model.a() * model.wall.minus_inf;
    if rate_plus <= T::zero() || rate_minus >= T::zero() {
        return Err(Error::NotNormalizable);
    }
    let op = assemble_dirac(model, T::zero(), grid)?;
    let s = grid.nodes();
    let mut chiral = vec![cz::<T>(); 2 * grid.n - 1];
    for (i, &si) in s.iter().enumerate() {
        chiral[DiscreteDirac::<T>::node_index(i)] = cr(zero_mode_envelope(model, si));
    }
    let nrm = vnorm(&chiral);
    chiral.iter_mut().for_each(|c| *c = *c / nrm);
    let r = op.matrix.matvec(&chiral);
    let scale = model.a().abs() / grid.spacing();
    let discrete_residual = vnorm(&r) / scale;
    let spinor = sigma2_spinor(lam);
    let amplitudes = op.to_amplitudes(&chiral);
    Ok(ZeroMode { s, amplitudes, spinor, discrete_residual, chiral })
}

impl<T: Real> ZeroMode<T> {
    /// |<exact, numerical>| for a chiral-basis vector from the same grid.
    pub fn overlap(&self, chiral: &[Complex<T>]) -> T {
        vdot(&self.chiral, chiral).norm() / vnorm(chiral)
    }
}

/// The printed closed form of the zero branch, -mu (v_F / |K2|) sgn(theta).
pub fn dispersion_zero_branch<T: Real>(model: &EffectiveDiracModel<T>, mu: T) -> T {
    -mu * (model.v_f_valley.abs() / model.k2_norm) * model.theta_valley.signum()
}

/// Zero-branch eigenvalue of the operator as assembled: chirality times m(mu).
pub fn zero_branch_operator<T: Real>(model: &EffectiveDiracModel<T>, mu: T) -> T {
    model.chirality() * model.mass(mu)
}

#[derive(Clone, Debug, Serialize)]
pub struct ValleySymmetryReport {
    pub flavor: String,
    pub mu: f64,
    pub max_deviation: f64,
    pub count_k: usize,
    pub count_kp: usize,
    pub passed: bool,
}

/// P-breaking: spec D^K'(mu) = -spec D^K(mu). C-breaking: the spectra coincide.
pub fn valley_symmetry_report<T: Real>(
    model_k: &EffectiveDiracModel<T>,
    model_kp: &EffectiveDiracModel<T>,
    mu: T,
    grid: &DiracGrid<T>,
    opts: &BoundStateOptions,
    tol: f64,
) -> Result<ValleySymmetryReport> {
    let a = bound_states(model_k, mu, grid, opts)?.values();
    let mut b = bound_states(model_kp, mu, grid, opts)?.values();
    if model_k.flavor == Flavor::PBreaking {
        b = b.into_iter().rev().map(|x| -x).collect();
    }
    let max_deviation = if a.len() == b.len() {
        a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((*x - *y).abs().as_f64()))
    } else {
        f64::INFINITY
    };
    Ok(ValleySymmetryReport {
        flavor: format!("{:?}", model_k.flavor),
        mu: mu.as_f64(),
        max_deviation,
        count_k: a.len(),
        count_kp: b.len(),
        passed: max_deviation < tol,
    })
}

/// Tracked eigenvalue branches over a mu grid.
#[derive(Clone, Debug)]
pub struct BranchTrack<T> {
    pub mu: Vec<T>,
    /// per branch: (first mu index, values)
    pub branches: Vec<(usize, Vec<T>)>,
    pub min_overlap: T,
}

/// Signed number of zero crossings: +1 for each branch moving from positive to negative.
/// Samples that sit at zero are bridged by the neighbouring signs.
pub fn signed_crossings<T: Real>(values: &[T], zero_tol: T) -> i32 {
    let signs: Vec<i32> = values
        .iter()
        .filter(|v| v.abs() > zero_tol)
        .map(|v| if *v > T::zero() { 1 } else { -1 })
        .collect();
    signs.windows(2).map(|w| (w[0] - w[1]) / 2).sum()
}

/// Overlap-tracked branches of bound states over `mus`.
///
/// Branches whose magnitude stays below half the gap edge must be continued with overlap at
/// least `min_overlap`; otherwise the tracking is ambiguous.
pub fn track_branches<T: Real>(spectra: &[DiracSpectrum<T>], min_overlap: T) -> Result<BranchTrack<T>> {
    let mut branches: Vec<(usize, Vec<T>)> = Vec::new();
    let mut active: Vec<(usize, usize)> = Vec::new(); // (branch id, state index in previous spectrum)
    let mut worst = T::one();
    for (step, spec) in spectra.iter().enumerate() {
        let mut next_active = Vec::new();
        let mut taken = vec![false; spec.bound_states.len()];
        if step > 0 {
            let prev = &spectra[step - 1];
            let mut cands = Vec::new();
            for (a, &(bid, pi)) in active.iter().enumerate() {
                for (ni, st) in spec.bound_states.iter().enumerate() {
                    let ov = vdot(&prev.bound_states[pi].chiral, &st.chiral).norm();
                    cands.push((ov, a, bid, ni));
                }
            }
            cands.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
            let mut done = vec![false; active.len()];
            for (ov, a, bid, ni) in cands {
                if done[a] || taken[ni] || ov < min_overlap {
                    continue;
                }
                done[a] = true;
                taken[ni] = true;
                worst = worst.min(ov);
                branches[bid].1.push(spec.bound_states[ni].value);
                next_active.push((bid, ni));
            }
            for (a, &(bid, pi)) in active.iter().enumerate() {
                let v = prev.bound_states[pi].value;
                if !done[a] && v.abs() < prev.gap_edge / T::lit(2.0) {
                    return Err(Error::TrackingAmbiguity { at: spec.mu.as_f64(), overlap: 0.0 });
                }
                let _ = bid;
            }
        }
        for (ni, st) in spec.bound_states.iter().enumerate() {
            if !taken[ni] {
                if step > 0 && st.value.abs() < spec.gap_edge / T::lit(2.0) {
                    return Err(Error::TrackingAmbiguity { at: spec.mu.as_f64(), overlap: worst.as_f64() });
                }
                branches.push((step, vec![st.value]));
                next_active.push((branches.len() - 1, ni));
            }
        }
        active = next_active;
    }
    Ok(BranchTrack { mu: spectra.iter().map(|s| s.mu).collect(), branches, min_overlap: worst })
}

/// Default mu range: three gap widths in units of v_F / |K2|.
pub fn default_mu_range<T: Real>(model: &EffectiveDiracModel<T>) -> (T, T) {
    let r = T::lit(3.0) * model.theta_gap() * model.k2_norm / model.v_f_valley.abs();
    (-r, r)
}

pub fn mu_grid<T: Real>(range: (T, T), n_mu: usize) -> Vec<T> {
    if n_mu == 1 {
        return vec![(range.0 + range.1) / T::lit(2.0)];
    }
    (0..n_mu)
        .map(|i| range.0 + (range.1 - range.0) * T::from_int(i as i64) / T::from_int(n_mu as i64 - 1))
        .collect()
}

pub fn dirac_spectral_flow<T: Real>(
    model: &EffectiveDiracModel<T>,
    mu_range: (T, T),
    n_mu: usize,
    grid: &DiracGrid<T>,
    opts: &BoundStateOptions,
) -> Result<i32> {
    let mus = mu_grid(mu_range, n_mu);
    let spectra = mus.iter().map(|&mu| bound_states(model, mu, grid, opts)).collect::<Result<Vec<_>>>()?;
    let track = track_branches(&spectra, T::lit(0.7))?;
    let zero_tol = model.theta_gap() * T::lit(1e-9);
    Ok(track.branches.iter().map(|(_, v)| signed_crossings(v, zero_tol)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::tanh_wall;

    fn model(theta: f64, v: f64, valley: Valley, flavor: Flavor) -> EffectiveDiracModel<f64> {
        EffectiveDiracModel { v_f_valley: v, k2_norm: 1.0, theta_valley: theta, wall: tanh_wall(), valley, flavor }
    }

    /// Poeschl-Teller closed form for the tanh wall: z_m = |a| sqrt(m (2g - m)), m < g.
    fn tanh_levels(theta: f64, a: f64) -> Vec<f64> {
        let g = (theta / a).abs();
        (1..).map(|m| m as f64).take_while(|&m| m < g).map(|m| a.abs() * (m * (2.0 * g - m)).sqrt()).collect()
    }

    #[test]
    fn matrix_is_chiral_at_zero_mu() {
        let m = model(0.8, 1.0, Valley::K, Flavor::PBreaking);
        let g = DiracGrid { half_length: 30.0, n: 801, order: 6 };
        let op = assemble_dirac(&m, 0.0, &g).unwrap();
        assert_eq!(op.matrix.hermiticity_residual(), 0.0);
        // chiral structure: nodes never couple to nodes
        for i in 0..g.n {
            for j in 0..g.n {
                if i != j && i.abs_diff(j) <= 2 {
                    assert_eq!(op.matrix.get(2 * i, 2 * j), cz());
                }
            }
            assert_eq!(op.matrix.get(2 * i, 2 * i), cz());
        }
    }

    #[test]
    fn zero_mode_and_levels_match_closed_form() {
        let (theta, v) = (3.0, 1.0);
        let m = model(theta, v, Valley::K, Flavor::PBreaking);
        let g = DiracGrid { half_length: 30.0, n: 4001, order: 6 };
        let spec = bound_states(&m, 0.0, &g, &BoundStateOptions::default()).unwrap();
        let levels = tanh_levels(theta, v);
        assert_eq!(levels.len(), 2);
        assert_eq!(spec.n_pairs(), Some(2));
        assert!(spec.zero_branch().unwrap().value.abs() < 1e-12);
        for (j, z) in levels.iter().enumerate() {
            let up = spec.branch(j as i64 + 1).unwrap().value;
            let dn = spec.branch(-(j as i64) - 1).unwrap().value;
            assert!((up - z).abs() < 1e-7, "{up} {z}");
            assert!((dn + z).abs() < 1e-7, "{dn} {z}");
        }
        let zm = zero_mode_exact(&m, &g).unwrap();
        assert!(zm.discrete_residual < 1e-6, "{}", zm.discrete_residual);
        assert!(zm.overlap(&spec.zero_branch().unwrap().chiral) > 1.0 - 1e-6);
    }

    #[test]
    fn zero_mode_spinor_follows_theta_sign() {
        let g = DiracGrid { half_length: 40.0, n: 2049, order: 6 };
        let p = zero_mode_exact(&model(1.0, 1.0, Valley::K, Flavor::PBreaking), &g).unwrap();
        let n = zero_mode_exact(&model(-1.0, 1.0, Valley::K, Flavor::PBreaking), &g).unwrap();
        assert!((p.spinor[1].im - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((n.spinor[1].im + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // amplitudes follow the spinor: alpha_2 = i lam alpha_1
        let i0 = g.n / 2;
        let a = p.amplitudes[i0];
        assert!((a[1] - Complex::new(0.0, 1.0) * a[0]).norm() < 1e-12);
        // cosh^-1 envelope for g = 1
        let ratio = p.amplitudes[i0 + 100][0].norm() / a[0].norm();
        assert!((ratio - 1.0 / g.node(i0 + 100).cosh()).abs() < 1e-12);
    }

    #[test]
    fn uniform_mass_has_no_gap_states() {
        let mut m = model(0.8, 1.0, Valley::K, Flavor::PBreaking);
        m.wall = DomainWall::uniform(1.0);
        let g = DiracGrid { half_length: 30.0, n: 2049, order: 6 };
        let spec = bound_states(&m, 0.0, &g, &BoundStateOptions::default()).unwrap();
        assert!(spec.bound_states.is_empty(), "{:?}", spec.values());
        assert!(zero_mode_exact(&m, &g).is_err());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let m = model(0.8, 1.0, Valley::K, Flavor::PBreaking);
        let g = DiracGrid { half_length: 30.0, n: 256, order: 6 };
        assert!(matches!(assemble_dirac(&m, 0.0, &g), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn crossings_bridge_zero_samples() {
        assert_eq!(signed_crossings(&[1.0, 0.5, 0.0, -0.5], 1e-12), 1);
        assert_eq!(signed_crossings(&[-1.0, 0.0, 1.0], 1e-12), -1);
        assert_eq!(signed_crossings(&[1.0, 0.0, 1.0], 1e-12), 0);
    }

    #[test]
    fn spectral_flow_sign_follows_zero_branch() {
        let g = DiracGrid { half_length: 30.0, n: 2049, order: 6 };
        let o = BoundStateOptions::default();
        for (theta, v) in [(1.5, 1.0), (-1.5, 1.0), (1.5, -1.0)] {
            let m = model(theta, v, Valley::K, Flavor::PBreaking);
            let sf = dirac_spectral_flow(&m, default_mu_range(&m), 21, &g, &o).unwrap();
            let slope = zero_branch_operator(&m, 1.0);
            assert_eq!(sf, if slope < 0.0 { 1 } else { -1 });
        }
    }
}
