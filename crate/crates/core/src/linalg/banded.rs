use crate::error::{Error, Result};
use crate::scalar::{cz, Real};
use num_complex::Complex;

/// Square band matrix with equal lower and upper half-bandwidth `kd`, row-major band storage.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kd: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self { n, kd, data: vec![cz(); n * (2 * kd + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.kd, "({i},{j}) outside band {}", self.kd);
        i * (2 * self.kd + 1) + (j + self.kd - i)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        if i.abs_diff(j) > self.kd {
            cz()
        } else {
            self.data[self.slot(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex<T>) {
        let s = self.slot(i, j);
        self.data[s] = self.data[s] + v;
    }

    pub fn add_diagonal(&mut self, v: T) {
        for i in 0..self.n {
            self.add(i, i, Complex::new(v, T::zero()));
        }
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let w = 2 * self.kd + 1;
        (0..self.n)
            .map(|i| {
                let j0 = i.saturating_sub(self.kd);
                let j1 = (i + self.kd).min(self.n - 1);
                let row = &self.data[i * w..(i + 1) * w];
                let mut s = cz::<T>();
                for j in j0..=j1 {
                    s = s + row[j + self.kd - i] * x[j];
                }
                s
            })
            .collect()
    }

    /// max |A_ij - conj(A_ji)|
    pub fn hermiticity_residual(&self) -> T {
        let mut r = T::zero();
        for i in 0..self.n {
            for j in i..(i + self.kd + 1).min(self.n) {
                r = r.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        r
    }

    /// Dense copy, for small problems and tests.
    pub fn to_dense(&self) -> faer::Mat<Complex<T>> {
        faer::Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// LU factorization of (A - sigma I) with partial pivoting.
    pub fn shifted_lu(&self, sigma: T) -> Result<BandLu<T>> {
        BandLu::new(self, sigma)
    }

    /// Number of eigenvalues below sigma, from an unpivoted LDL^H factorization of A - sigma I.
    /// Returns None if a pivot is too small for the count to be trusted.
    pub fn count_below(&self, sigma: T) -> Option<usize> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        // lower band, column-major: l[j*w + (i-j)]
        let mut l = vec![cz::<T>(); n * w];
        let mut scale = T::zero();
        for j in 0..n {
            for i in j..(j + w).min(n) {
                let mut v = self.get(i, j);
                if i == j {
                    v = v - Complex::new(sigma, T::zero());
                }
                scale = scale.max(v.norm());
                l[j * w + (i - j)] = v;
            }
        }
        let tiny = scale * T::epsilon() * T::lit(1e3);
        let mut neg = 0;
        for j in 0..n {
            let d = l[j * w].re;
            if d.abs() <= tiny {
                return None;
            }
            if d < T::zero() {
                neg += 1;
            }
            let m = (n - 1 - j).min(kd);
            for r in 1..=m {
                l[j * w + r] = l[j * w + r] / d;
            }
            for c in 1..=m {
                let lc = l[j * w + c].conj() * d;
                let col = (j + c) * w;
                for r in c..=m {
                    let v = l[j * w + r] * lc;
                    l[col + (r - c)] = l[col + (r - c)] - v;
                }
            }
        }
        Some(neg)
    }
}

/// Banded LU with partial pivoting in LAPACK gbtrf layout.
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ldab: usize,
    ab: Vec<Complex<T>>,
    ipiv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    fn new(a: &BandMatrix<T>, sigma: T) -> Result<Self> {
        let (n, kl) = (a.n, a.kd);
        let ku = a.kd;
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![cz::<T>(); ldab * n];
        for j in 0..n {
            let i0 = j.saturating_sub(ku);
            let i1 = (j + kl).min(n - 1);
            for i in i0..=i1 {
                let mut v = a.get(i, j);
                if i == j {
                    v = v - Complex::new(sigma, T::zero());
                }
                ab[j * ldab + kv + i - j] = v;
            }
        }
        let at = |r: usize, c: usize| c * ldab + kv + r - c;
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = ab[at(j, j)].norm_sqr();
            for i in 1..=km {
                let v = ab[at(j + i, j)].norm_sqr();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best == T::zero() {
                return Err(Error::SolverFailure(format!("singular band matrix at column {j}")));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(at(j, c), at(j + jp, c));
                }
            }
            if km > 0 {
                let inv = T::one() / ab[at(j, j)].norm_sqr();
                let piv = ab[at(j, j)].conj() * inv;
                for i in 1..=km {
                    let s = at(j + i, j);
                    ab[s] = ab[s] * piv;
                }
                let col_j = at(j + 1, j);
                for c in (j + 1)..=ju {
                    let u = ab[at(j, c)];
                    if u.norm_sqr() == T::zero() {
                        continue;
                    }
                    let base = at(j + 1, c);
                    for i in 0..km {
                        let v = ab[col_j + i] * u;
                        ab[base + i] = ab[base + i] - v;
                    }
                }
            }
        }
        Ok(Self { n, kl, ldab, ab, ipiv })
    }

    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = 2 * kl;
        let at = |r: usize, c: usize| c * ldab + kv + r - c;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj.norm_sqr() != T::zero() {
                let base = at(j + 1, j);
                for i in 0..km {
                    b[j + 1 + i] = b[j + 1 + i] - self.ab[base + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] = b[j] / self.ab[at(j, j)];
            let bj = b[j];
            let i0 = j.saturating_sub(kv);
            for i in i0..j {
                b[i] = b[i] - self.ab[at(i, j)] * bj;
            }
        }
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::eigvalsh;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(n: usize, kd: usize, seed: u64) -> BandMatrix<f64> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kd);
        for i in 0..n {
            a.add(i, i, Complex::new(rng.random_range(-2.0..2.0), 0.0));
            for j in (i + 1)..(i + kd + 1).min(n) {
                let v = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                a.add(i, j, v);
                a.add(j, i, v.conj());
            }
        }
        a
    }

    #[test]
    fn lu_solves() {
        let a = random_hermitian(40, 3, 7);
        let x: Vec<_> = (0..40).map(|i| Complex::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let sigma = 0.3;
        let mut b = a.matvec(&x);
        for (bi, xi) in b.iter_mut().zip(&x) {
            *bi -= xi * sigma;
        }
        let y = a.shifted_lu(sigma).unwrap().solve(&b);
        let err: f64 = y.iter().zip(&x).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn inertia_matches_dense() {
        let a = random_hermitian(30, 2, 3);
        let ev = eigvalsh(&a.to_dense()).unwrap();
        for sigma in [-1.5, -0.2, 0.0, 0.7, 2.5] {
            let expect = ev.iter().filter(|&&e| e < sigma).count();
            assert_eq!(a.count_below(sigma), Some(expect));
        }
        assert_eq!(a.hermiticity_residual(), 0.0);
    }
}
