//! Eigenvector-overlap continuation of eigenvalue branches.

use crate::scalar::{vdot, vnorm, Real};
use num_complex::Complex;

/// One eigenpair at a parameter sample.
#[derive(Clone, Debug)]
pub struct Sample<'a, T> {
    pub value: T,
    pub vector: &'a [Complex<T>],
}

/// For each state of `prev`, the index of its continuation in `next` and the overlap used.
///
/// Pairs are matched greedily by |<prev, next>|. Near-degenerate states of `next` (values
/// within `cluster_tol`) are also matched as a cluster through the norm of the projection, and
/// states sharing a cluster are then paired in energy order.
pub fn link<T: Real>(prev: &[Sample<T>], next: &[Sample<T>], min_overlap: T, cluster_tol: T) -> Vec<Option<(usize, T)>> {
    let ov: Vec<Vec<T>> = prev
        .iter()
        .map(|a| {
            let na = vnorm(a.vector);
            next.iter().map(|b| vdot(a.vector, b.vector).norm() / (na * vnorm(b.vector))).collect()
        })
        .collect();
    let mut out = vec![None; prev.len()];
    let mut taken = vec![false; next.len()];
    let mut cands: Vec<(T, usize, usize)> = Vec::new();
    for (a, row) in ov.iter().enumerate() {
        for (b, &o) in row.iter().enumerate() {
            cands.push((o, a, b));
        }
    }
    cands.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    for &(o, a, b) in &cands {
        if o < min_overlap || out[a].is_some() || taken[b] {
            continue;
        }
        out[a] = Some((b, o));
        taken[b] = true;
    }
    // cluster fallback for the unmatched
    let cluster_of = |b: usize| -> Vec<usize> {
        (0..next.len()).filter(|&c| (next[c].value - next[b].value).abs() <= cluster_tol).collect()
    };
    let mut pending: Vec<(usize, Vec<usize>, T)> = Vec::new();
    for a in 0..prev.len() {
        if out[a].is_some() {
            continue;
        }
        let mut best: Option<(Vec<usize>, T)> = None;
        for b in 0..next.len() {
            let cl = cluster_of(b);
            if cl.len() < 2 {
                continue;
            }
            let w = cl.iter().fold(T::zero(), |s, &c| s + ov[a][c] * ov[a][c]).sqrt();
            if best.as_ref().map(|(_, bw)| w > *bw).unwrap_or(true) {
                best = Some((cl, w));
            }
        }
        if let Some((cl, w)) = best {
            if w >= min_overlap {
                pending.push((a, cl, w));
            }
        }
    }
    let mut by_cluster: Vec<(Vec<usize>, Vec<(usize, T)>)> = Vec::new();
    for (a, cl, w) in pending {
        match by_cluster.iter_mut().find(|(c, _)| *c == cl) {
            Some((_, v)) => v.push((a, w)),
            None => by_cluster.push((cl, vec![(a, w)])),
        }
    }
    for (cl, mut members) in by_cluster {
        let mut free: Vec<usize> = cl.into_iter().filter(|&b| !taken[b]).collect();
        free.sort_by(|&x, &y| next[x].value.partial_cmp(&next[y].value).unwrap());
        members.sort_by(|x, y| prev[x.0].value.partial_cmp(&prev[y.0].value).unwrap());
        for ((a, w), b) in members.into_iter().zip(free) {
            out[a] = Some((b, w));
            taken[b] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex<f64> {
        Complex::new(x, 0.0)
    }

    #[test]
    fn follows_vectors_not_order() {
        let a0 = [c(1.0), c(0.0), c(0.0)];
        let a1 = [c(0.0), c(1.0), c(0.0)];
        let prev = [Sample { value: -1.0, vector: &a0[..] }, Sample { value: 1.0, vector: &a1[..] }];
        // the branches crossed: values swapped
        let next = [Sample { value: -1.0, vector: &a1[..] }, Sample { value: 1.0, vector: &a0[..] }];
        let l = link(&prev, &next, 0.7, 1e-9);
        assert_eq!(l[0].unwrap().0, 1);
        assert_eq!(l[1].unwrap().0, 0);
    }

    #[test]
    fn degenerate_cluster_is_matched_as_a_subspace() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a0 = [c(1.0), c(0.0)];
        let a1 = [c(0.0), c(1.0)];
        let b0 = [c(s), c(s)];
        let b1 = [c(s), c(-s)];
        let prev = [Sample { value: 0.1, vector: &a0[..] }, Sample { value: 0.2, vector: &a1[..] }];
        let next = [Sample { value: 0.15, vector: &b0[..] }, Sample { value: 0.15, vector: &b1[..] }];
        let l = link(&prev, &next, 0.75, 1e-9);
        assert!(l.iter().all(|x| x.is_some()));
        assert_ne!(l[0].unwrap().0, l[1].unwrap().0);
        let strict = link(&prev, &next, 0.75, -1.0);
        assert!(strict.iter().all(|x| x.is_none()));
    }
}
