//! Lattice-periodic functions as finite Fourier series on the dual lattice, and domain walls.

use crate::error::{Error, Result};
use crate::lattice::{rotate_dual_index, EdgeFrame, LatticeBasis, Vec2};
use crate::scalar::{cis, cz, Real};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// complex conjugation
    C,
    /// x -> -x
    P,
    /// x -> R* x, R the 2pi/3 rotation
    R,
}

/// f(x) = sum over (m, n) of c(m, n) exp(i 2pi (m k1 + n k2) . x)
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FourierPotential<T> {
    coeffs: BTreeMap<(i64, i64), Complex<T>>,
}

#[derive(Serialize, Deserialize)]
struct PotentialDoc {
    coeffs: Vec<(i64, i64, f64, f64)>,
    cutoff: usize,
}

impl<T: Real> FourierPotential<T> {
    pub fn zero() -> Self {
        Self { coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs(it: impl IntoIterator<Item = ((i64, i64), Complex<T>)>) -> Self {
        let mut p = Self::zero();
        for (k, c) in it {
            p.add_coeff(k.0, k.1, c);
        }
        p
    }

    pub fn add_coeff(&mut self, m: i64, n: i64, c: Complex<T>) {
        let e = self.coeffs.entry((m, n)).or_insert_with(cz);
        *e = *e + c;
    }

    pub fn coeff(&self, m: i64, n: i64) -> Complex<T> {
        self.coeffs.get(&(m, n)).copied().unwrap_or_else(cz)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), Complex<T>)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.values().all(|c| c.norm_sqr() == T::zero())
    }

    /// max |m|, |n| over the nonzero coefficients
    pub fn cutoff(&self) -> usize {
        self.coeffs
            .iter()
            .filter(|(_, c)| c.norm_sqr() > T::zero())
            .map(|(k, _)| k.0.unsigned_abs().max(k.1.unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::from_coeffs(self.iter().map(|(k, c)| (k, c * s)))
    }

    pub fn sum(&self, o: &Self) -> Self {
        let mut p = self.clone();
        for (k, c) in o.iter() {
            p.add_coeff(k.0, k.1, c);
        }
        p
    }

    pub fn l2_norm(&self) -> T {
        self.coeffs.values().fold(T::zero(), |s, c| s + c.norm_sqr()).sqrt()
    }

    /// l2 distance between coefficient maps
    pub fn distance(&self, o: &Self) -> T {
        self.sum(&o.scaled(-T::one())).l2_norm()
    }

    pub fn evaluate(&self, basis: &LatticeBasis<T>, x: Vec2<T>) -> Complex<T> {
        self.iter().fold(cz(), |s, ((m, n), c)| s + c * cis(basis.dual(m, n).dot(x)))
    }

    pub fn apply_symmetry(&self, op: Symmetry) -> Self {
        match op {
            Symmetry::C => Self::from_coeffs(self.iter().map(|((m, n), c)| ((-m, -n), c.conj()))),
            Symmetry::P => Self::from_coeffs(self.iter().map(|((m, n), c)| ((-m, -n), c))),
            Symmetry::R => Self::from_coeffs(self.iter().map(|((m, n), c)| (rotate_dual_index(m, n), c))),
        }
    }

    pub fn symmetry_residual(&self, op: Symmetry) -> T {
        self.apply_symmetry(op).distance(self)
    }

    /// Coefficients re-indexed in an edge frame: (p, q, c) with G = 2pi (p K1 + q K2).
    pub fn in_frame(&self, frame: &EdgeFrame<T>) -> Vec<(i64, i64, Complex<T>)> {
        self.iter()
            .filter(|(_, c)| c.norm_sqr() > T::zero())
            .map(|((m, n), c)| {
                let (p, q) = frame.edge_index(m, n);
                (p, q, c)
            })
            .collect()
    }

    /// Samples on the grid x_ij = (i v1 + j v2)/n, row-major in i.
    pub fn sample_grid(&self, n: usize) -> Vec<Complex<T>> {
        let nf = T::from_int(n as i64);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (ti, tj) = (T::from_int(i as i64) / nf, T::from_int(j as i64) / nf);
                out.push(self.iter().fold(cz(), |s, ((m, nn), c)| {
                    s + c * cis(T::TAU() * (T::from_int(m) * ti + T::from_int(nn) * tj))
                }));
            }
        }
        out
    }

    /// Inverse of `sample_grid`, keeping |m|, |n| <= cutoff.
    pub fn project_grid(values: &[Complex<T>], n: usize, cutoff: usize) -> Self {
        let nf = T::from_int(n as i64);
        let c = cutoff as i64;
        let norm = T::one() / (nf * nf);
        let mut p = Self::zero();
        for m in -c..=c {
            for nn in -c..=c {
                let mut s = cz::<T>();
                for i in 0..n {
                    for j in 0..n {
                        let ph = -T::TAU() * T::from_int(m * i as i64 + nn * j as i64) / nf;
                        s = s + values[i * n + j] * cis(ph);
                    }
                }
                p.add_coeff(m, nn, s * norm);
            }
        }
        p
    }

    pub fn to_json(&self) -> String {
        let doc = PotentialDoc {
            coeffs: self.iter().map(|((m, n), c)| (m, n, c.re.as_f64(), c.im.as_f64())).collect(),
            cutoff: self.cutoff(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PotentialDoc = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let p = Self::from_coeffs(
            doc.coeffs.into_iter().map(|(m, n, re, im)| ((m, n), Complex::new(T::lit(re), T::lit(im)))),
        );
        if p.cutoff() > doc.cutoff {
            return Err(Error::Config(format!("declared cutoff {} below coefficient support {}", doc.cutoff, p.cutoff())));
        }
        Ok(p)
    }
}

const SHELL: [(i64, i64); 3] = [(1, 0), (0, 1), (1, 1)];

fn cosine_shell<T: Real>(amp: T) -> Result<FourierPotential<T>> {
    if amp == T::zero() {
        return Err(Error::ZeroAmplitude);
    }
    let h = Complex::new(amp / T::lit(2.0), T::zero());
    Ok(FourierPotential::from_coeffs(SHELL.iter().flat_map(|&(m, n)| [((m, n), h), ((-m, -n), h)])))
}

/// V0 [cos 2pi k1.x + cos 2pi k2.x + cos 2pi (k1+k2).x]
pub fn default_honeycomb_v<T: Real>(v0: T) -> Result<FourierPotential<T>> {
    cosine_shell(v0)
}

/// W0 [sin 2pi k1.x + sin 2pi k2.x - sin 2pi (k1+k2).x]; odd and rotation invariant.
pub fn default_w<T: Real>(w0: T) -> Result<FourierPotential<T>> {
    if w0 == T::zero() {
        return Err(Error::ZeroAmplitude);
    }
    // sin(g.x) = (e^{ig.x} - e^{-ig.x}) / 2i
    let h = Complex::new(T::zero(), -w0 / T::lit(2.0));
    let sgn = [T::one(), T::one(), -T::one()];
    Ok(FourierPotential::from_coeffs(
        SHELL.iter().zip(sgn).flat_map(|(&(m, n), s)| [((m, n), h * s), ((-m, -n), -h * s)]),
    ))
}

/// a0 [cos 2pi k1.x + cos 2pi k2.x + cos 2pi (k1+k2).x]
pub fn default_a<T: Real>(a0: T) -> Result<FourierPotential<T>> {
    cosine_shell(a0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallKind {
    Tanh,
    Custom,
}

type Profile<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Domain wall profile kappa(s) with limits at -inf and +inf.
#[derive(Clone)]
pub struct DomainWall<T> {
    pub kind: WallKind,
    profile: Profile<T>,
    derivative: Profile<T>,
    pub minus_inf: T,
    pub plus_inf: T,
}

impl<T: fmt::Debug> fmt::Debug for DomainWall<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainWall")
            .field("kind", &self.kind)
            .field("minus_inf", &self.minus_inf)
            .field("plus_inf", &self.plus_inf)
            .finish()
    }
}

pub fn tanh_wall<T: Real>() -> DomainWall<T> {
    DomainWall {
        kind: WallKind::Tanh,
        profile: Arc::new(|s: T| s.tanh()),
        derivative: Arc::new(|s: T| {
            let c = s.cosh();
            T::one() / (c * c)
        }),
        minus_inf: -T::one(),
        plus_inf: T::one(),
    }
}

impl<T: Real> DomainWall<T> {
    pub fn custom(
        profile: impl Fn(T) -> T + Send + Sync + 'static,
        derivative: impl Fn(T) -> T + Send + Sync + 'static,
        minus_inf: T,
        plus_inf: T,
    ) -> Self {
        DomainWall {
            kind: WallKind::Custom,
            profile: Arc::new(profile),
            derivative: Arc::new(derivative),
            minus_inf,
            plus_inf,
        }
    }

    /// kappa(s) = c everywhere (no wall).
    pub fn uniform(c: T) -> Self {
        Self::custom(move |_| c, |_| T::zero(), c, c)
    }

    pub fn kappa(&self, s: T) -> T {
        (self.profile)(s)
    }

    pub fn kappa_prime(&self, s: T) -> T {
        (self.derivative)(s)
    }

    /// Integral of kappa from 0 to s.
    pub fn integral(&self, s: T) -> T {
        match self.kind {
            WallKind::Tanh => {
                // log cosh s, overflow-safe
                let a = s.abs();
                a + ((T::one() + (-(a + a)).exp()) / T::lit(2.0)).ln()
            }
            WallKind::Custom => {
                // composite Gauss-Legendre, 3 nodes per panel
                let panels = ((s.abs() / T::lit(0.05)).ceil().to_usize().unwrap_or(1)).max(1);
                let h = s / T::from_int(panels as i64);
                let r = T::lit(0.6).sqrt();
                let (w0, w1) = (T::lit(8.0 / 9.0), T::lit(5.0 / 9.0));
                let half = h / T::lit(2.0);
                let mut acc = T::zero();
                for i in 0..panels {
                    let mid = h * (T::from_int(i as i64) + T::lit(0.5));
                    acc = acc
                        + w0 * self.kappa(mid)
                        + w1 * (self.kappa(mid - half * r) + self.kappa(mid + half * r));
                }
                acc * half
            }
        }
    }
}
