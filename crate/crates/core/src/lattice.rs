//! Equilateral lattice, its dual, the high-symmetry points and edge-adapted frames.

use crate::error::{Error, Result};
use crate::scalar::Real;
use num_complex::Complex;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// det[self, o] with the vectors as columns.
    pub fn det(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sqr(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Counterclockwise rotation by 2pi/3.
    pub fn rotate(self) -> Self {
        let c = -T::lit(0.5);
        let s = T::lit(3.0).sqrt() / T::lit(2.0);
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Period lattice spanned by `v1, v2` and its dual basis `k1, k2` (`ki . vj = delta_ij`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeBasis<T> {
    pub a: T,
    pub v1: Vec2<T>,
    pub v2: Vec2<T>,
    pub k1: Vec2<T>,
    pub k2: Vec2<T>,
}

pub fn build_lattice<T: Real>() -> LatticeBasis<T> {
    let s3 = T::lit(3.0).sqrt();
    let half = T::lit(0.5);
    let a = (T::lit(2.0) / s3).sqrt();
    LatticeBasis {
        a,
        v1: Vec2::new(s3 * half, half) * a,
        v2: Vec2::new(s3 * half, -half) * a,
        k1: Vec2::new(half, s3 * half) * a,
        k2: Vec2::new(half, -s3 * half) * a,
    }
}

impl<T: Real> LatticeBasis<T> {
    /// 2pi (m k1 + n k2)
    pub fn dual(&self, m: i64, n: i64) -> Vec2<T> {
        (self.k1 * T::from_int(m) + self.k2 * T::from_int(n)) * T::TAU()
    }

    /// m v1 + n v2
    pub fn point(&self, m: i64, n: i64) -> Vec2<T> {
        self.v1 * T::from_int(m) + self.v2 * T::from_int(n)
    }

    /// Coordinates (c1, c2) with k = 2pi (c1 k1 + c2 k2).
    pub fn dual_coords(&self, k: Vec2<T>) -> (T, T) {
        (k.dot(self.v1) / T::TAU(), k.dot(self.v2) / T::TAU())
    }

    /// Shortest representative of k + dual lattice, and the subtracted index.
    pub fn reduce_dual(&self, k: Vec2<T>) -> (Vec2<T>, (i64, i64)) {
        let (c1, c2) = self.dual_coords(k);
        let m0 = c1.round().to_i64().unwrap_or(0);
        let n0 = c2.round().to_i64().unwrap_or(0);
        let mut best = (k - self.dual(m0, n0), (m0, n0));
        for dm in -1..=1 {
            for dn in -1..=1 {
                let r = k - self.dual(m0 + dm, n0 + dn);
                if r.norm_sqr() < best.0.norm_sqr() {
                    best = (r, (m0 + dm, n0 + dn));
                }
            }
        }
        best
    }

    /// Distance from k to the set q + dual lattice.
    pub fn dual_distance(&self, k: Vec2<T>, q: Vec2<T>) -> T {
        self.reduce_dual(k - q).0.norm()
    }
}

/// Image of the dual index (m, n) under the counterclockwise 2pi/3 rotation.
pub fn rotate_dual_index(m: i64, n: i64) -> (i64, i64) {
    (n - m, -m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HighSymmetryPoints<T> {
    pub k: Vec2<T>,
    pub kp: Vec2<T>,
    pub tau: Complex<T>,
}

pub fn high_symmetry_points<T: Real>(basis: &LatticeBasis<T>) -> HighSymmetryPoints<T> {
    let k = (basis.k1 - basis.k2) * (T::TAU() / T::lit(3.0));
    let phi = T::TAU() / T::lit(3.0);
    HighSymmetryPoints { k, kp: -k, tau: Complex::new(phi.cos(), phi.sin()) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    ZigzagType,
    ArmchairType,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Valley {
    K,
    Kp,
}

impl Valley {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Valley::K => T::one(),
            Valley::Kp => -T::one(),
        }
    }
}

/// Edge-adapted frame for the edge direction `a1 v1 + b1 v2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFrame<T> {
    pub a1: i64,
    pub b1: i64,
    pub a2: i64,
    pub b2: i64,
    pub v_e1: Vec2<T>,
    pub v_e2: Vec2<T>,
    pub k_e1: Vec2<T>,
    pub k_e2: Vec2<T>,
    pub ell: Vec2<T>,
    pub edge_class: EdgeClass,
    pub kpar_k: T,
    pub kpar_kp: T,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Returns (g, x, y) with a x + b y = g.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

pub fn classify_edge(a1: i64, b1: i64) -> Result<EdgeClass> {
    if gcd(a1, b1) != 1 {
        return Err(Error::NotCoprime { a1, b1 });
    }
    Ok(if (a1 - b1).rem_euclid(3) == 0 { EdgeClass::ArmchairType } else { EdgeClass::ZigzagType })
}

/// Complement (a2, b2) with a1 b2 - a2 b1 = 1, minimizing |a2| + |b2| and then a2.
pub fn complement(a1: i64, b1: i64) -> Result<(i64, i64)> {
    if gcd(a1, b1) != 1 {
        return Err(Error::NotCoprime { a1, b1 });
    }
    let (g, x, y) = ext_gcd(a1, b1);
    // a1 x + b1 y = g = +-1, so b2 = g x, a2 = -g y.
    let (a2, b2) = (-g * y, g * x);
    let span = a2.abs() + b2.abs() + 2;
    let mut best: Option<(i64, i64)> = None;
    for t in -span..=span {
        let c = (a2 + t * a1, b2 + t * b1);
        best = match best {
            None => Some(c),
            Some(b) => {
                let (kc, kb) = (c.0.abs() + c.1.abs(), b.0.abs() + b.1.abs());
                if kc < kb || (kc == kb && c.0 < b.0) {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        };
    }
    Ok(best.unwrap())
}

pub fn edge_frame<T: Real>(basis: &LatticeBasis<T>, a1: i64, b1: i64) -> Result<EdgeFrame<T>> {
    let edge_class = classify_edge(a1, b1)?;
    let (a2, b2) = complement(a1, b1)?;
    let v_e1 = basis.point(a1, b1);
    let v_e2 = basis.point(a2, b2);
    let k_e1 = basis.k1 * T::from_int(b2) - basis.k2 * T::from_int(a2);
    let k_e2 = basis.k2 * T::from_int(a1) - basis.k1 * T::from_int(b1);
    let ell = k_e1 - k_e2 * (k_e2.dot(k_e1) / k_e2.norm_sqr());
    let third = T::TAU() / T::lit(3.0);
    Ok(EdgeFrame {
        a1,
        b1,
        a2,
        b2,
        v_e1,
        v_e2,
        k_e1,
        k_e2,
        ell,
        edge_class,
        kpar_k: third * T::from_int((a1 - b1).rem_euclid(3)),
        kpar_kp: third * T::from_int((b1 - a1).rem_euclid(3)),
    })
}

impl<T: Real> EdgeFrame<T> {
    /// Edge-frame index (p, q) of the dual vector 2pi(m k1 + n k2): it equals 2pi(p K1 + q K2).
    pub fn edge_index(&self, m: i64, n: i64) -> (i64, i64) {
        (m * self.a1 + n * self.b1, m * self.a2 + n * self.b2)
    }

    pub fn to_cartesian(&self, t1: T, t2: T) -> Vec2<T> {
        self.v_e1 * t1 + self.v_e2 * t2
    }

    /// Components (x . K1, x . K2) = (t1, t2).
    pub fn to_edge(&self, x: Vec2<T>) -> (T, T) {
        (x.dot(self.k_e1), x.dot(self.k_e2))
    }

    /// Integer r with K . v_e1 = 2pi (a1 - b1)/3 = kpar_k + 2pi r.
    pub fn kpar_k_winding(&self) -> i64 {
        (self.a1 - self.b1).div_euclid(3)
    }

    /// K . v_e1 mod 2pi for the chosen valley.
    pub fn kpar(&self, valley: Valley) -> T {
        match valley {
            Valley::K => self.kpar_k,
            Valley::Kp => self.kpar_kp,
        }
    }

    pub fn is_armchair(&self) -> bool {
        self.edge_class == EdgeClass::ArmchairType
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn canonical_basis() {
        let b = build_lattice::<f64>();
        let s3 = 3f64.sqrt();
        assert!(close(b.a * b.a, 2.0 / s3, 1e-15));
        assert!(close(b.v1.x, b.a * s3 / 2.0, 1e-15) && close(b.v1.y, b.a / 2.0, 1e-15));
        assert!(close(b.k1.dot(b.v1), 1.0, 1e-15) && close(b.k1.dot(b.v2), 0.0, 1e-15));
        assert!(close(b.k2.dot(b.v2), 1.0, 1e-15) && close(b.k2.dot(b.v1), 0.0, 1e-15));
        assert!(close(b.v1.norm(), b.a, 1e-15) && close(b.v2.norm(), b.a, 1e-15));
        assert!(close(b.v1.det(b.v2).abs(), 1.0, 1e-15));
    }

    #[test]
    fn k_point() {
        let b = build_lattice::<f64>();
        let hs = high_symmetry_points(&b);
        let expect = Vec2::new(0.0, 2.0 * std::f64::consts::PI / 3.0 * b.a * 3f64.sqrt());
        assert!((hs.k - expect).norm() < 1e-14);
        assert!((hs.k + hs.kp).norm() < 1e-15);
    }

    #[test]
    fn rotated_k_is_equivalent() {
        let b = build_lattice::<f64>();
        let k = high_symmetry_points(&b).k;
        let rk = k.rotate();
        let mut best = f64::MAX;
        for m in -3..=3 {
            for n in -3..=3 {
                best = best.min((rk - k - b.dual(m, n)).norm());
            }
        }
        assert!(best < 1e-12);
        assert!(b.dual_distance(rk, k) < 1e-12);
    }

    #[test]
    fn rotation_permutes_dual_shell() {
        let b = build_lattice::<f64>();
        for (m, n) in [(1, 0), (0, 1), (-1, -1), (2, -3)] {
            let (mr, nr) = rotate_dual_index(m, n);
            assert!((b.dual(m, n).rotate() - b.dual(mr, nr)).norm() < 1e-12);
        }
        let mut idx = (3, -5);
        for _ in 0..3 {
            idx = rotate_dual_index(idx.0, idx.1);
        }
        assert_eq!(idx, (3, -5));
    }

    #[test]
    fn zigzag_and_armchair_frames() {
        let b = build_lattice::<f64>();
        let tau = std::f64::consts::TAU;
        let zz = edge_frame(&b, 1, 0).unwrap();
        assert_eq!(zz.edge_class, EdgeClass::ZigzagType);
        assert_eq!((zz.a2, zz.b2), (0, 1));
        assert!(close(zz.kpar_k, tau / 3.0, 1e-15) && close(zz.kpar_kp, 2.0 * tau / 3.0, 1e-15));
        let ac = edge_frame(&b, 1, 1).unwrap();
        assert_eq!(ac.edge_class, EdgeClass::ArmchairType);
        assert_eq!((ac.a2, ac.b2), (-1, 0));
        assert_eq!((ac.kpar_k, ac.kpar_kp), (0.0, 0.0));
        let f = edge_frame(&b, 2, 1).unwrap();
        assert_eq!(f.edge_class, EdgeClass::ZigzagType);
        assert_eq!(f.a1 * f.b2 - f.a2 * f.b1, 1);
        assert_eq!(classify_edge(4, 1).unwrap(), EdgeClass::ArmchairType);
        assert_eq!(classify_edge(2, 4), Err(Error::NotCoprime { a1: 2, b1: 4 }));
        assert!(edge_frame(&b, 0, 0).is_err());
    }

    #[test]
    fn kpar_matches_direct_product() {
        let b = build_lattice::<f64>();
        let k = high_symmetry_points(&b).k;
        for (a1, b1) in [(1, 0), (1, 1), (2, 1), (-3, 5), (7, -2)] {
            let f = edge_frame(&b, a1, b1).unwrap();
            let direct = k.dot(f.v_e1).rem_euclid(std::f64::consts::TAU);
            let d = (direct - f.kpar_k).abs();
            assert!(d < 1e-12 || (d - std::f64::consts::TAU).abs() < 1e-12);
            let w = k.dot(f.v_e1) - f.kpar_k;
            assert!(close(w, std::f64::consts::TAU * f.kpar_k_winding() as f64, 1e-12));
        }
    }

    #[test]
    fn edge_index_matches_geometry() {
        let b = build_lattice::<f64>();
        let f = edge_frame(&b, 2, 1).unwrap();
        for (m, n) in [(1, 0), (0, 1), (3, -2)] {
            let (p, q) = f.edge_index(m, n);
            let g = (f.k_e1 * p as f64 + f.k_e2 * q as f64) * std::f64::consts::TAU;
            assert!((g - b.dual(m, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn f32_frame() {
        let b = build_lattice::<f32>();
        let f = edge_frame(&b, 1, 1).unwrap();
        assert!((f.k_e1.dot(f.v_e1) - 1.0).abs() < 1e-6);
        assert!(f.ell.dot(f.k_e2).abs() < 1e-6);
    }
}
