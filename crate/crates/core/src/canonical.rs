//! Weight-space symmetries and reducibility checks.
//!
//! With logistic hidden units, `σ(−s) = 1 − σ(s)`, so negating every input
//! weight of node `k` together with `γ_k`, while adding the old `γ_k` to the
//! output intercept, leaves the network function unchanged. Together with
//! node permutations this gives `2^q q!` equivalent parameter vectors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use libm::fabs;

use crate::error::{Error, Result};
use crate::model::{check_compatible, net_inputs, Architecture, Dataset, ParamVector};

/// A node permutation combined with sign flips.
///
/// Node `k` of the result is old node `permutation[k]` (0-based); `flips[i]`
/// marks old node `i` as sign-flipped before permuting.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymmetryOp {
    permutation: Vec<usize>,
    flips: Vec<bool>,
}

impl SymmetryOp {
    pub fn identity(q: usize) -> Self {
        Self {
            permutation: (0..q).collect(),
            flips: vec![false; q],
        }
    }

    pub fn new(permutation: Vec<usize>, flips: Vec<bool>) -> Result<Self> {
        let q = permutation.len();
        if flips.len() != q {
            return Err(Error::DimensionMismatch {
                what: "sign flips",
                expected: q,
                actual: flips.len(),
            });
        }
        let mut seen = vec![false; q];
        for &k in &permutation {
            if k >= q || seen[k] {
                return Err(Error::InvalidInput(format!("{permutation:?} is not a permutation of 0..{q}")));
            }
            seen[k] = true;
        }
        Ok(Self { permutation, flips })
    }

    /// Sign flip of a single node (0-based).
    pub fn flip(q: usize, node: usize) -> Self {
        let mut op = Self::identity(q);
        op.flips[node] = true;
        op
    }

    pub fn q(&self) -> usize {
        self.permutation.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn flips(&self) -> &[bool] {
        &self.flips
    }

    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &k)| i == k) && !self.flips.iter().any(|&f| f)
    }

    /// The op equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &SymmetryOp) -> SymmetryOp {
        let q = self.q();
        assert_eq!(q, next.q(), "composing ops of different width");
        let permutation: Vec<usize> = next.permutation.iter().map(|&m| self.permutation[m]).collect();
        let mut flips = self.flips.clone();
        for (mid, &old) in self.permutation.iter().enumerate() {
            flips[old] ^= next.flips[mid];
        }
        SymmetryOp { permutation, flips }
    }

    /// Every one of the `2^q q!` ops.
    pub fn all(q: usize) -> Vec<SymmetryOp> {
        let mut out = Vec::new();
        for_each_op(q, |op| out.push(op.clone()));
        out
    }
}

/// Visits every symmetry op on `q` nodes.
pub fn for_each_op(q: usize, mut visit: impl FnMut(&SymmetryOp)) {
    let mut perm: Vec<usize> = (0..q).collect();
    let mut op = SymmetryOp::identity(q);
    loop {
        op.permutation.copy_from_slice(&perm);
        for mask in 0u64..(1u64 << q) {
            for (i, f) in op.flips.iter_mut().enumerate() {
                *f = mask >> i & 1 == 1;
            }
            visit(&op);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Applies `op` to `theta`; the network function is unchanged.
pub fn apply_symmetry(theta: &ParamVector, op: &SymmetryOp) -> ParamVector {
    let (p, q) = theta.shape();
    assert_eq!(op.q(), q, "symmetry op width does not match the network");
    let mut flipped = theta.clone();
    let mut gamma0 = theta.gamma(0);
    for k in 1..=q {
        if op.flips[k - 1] {
            gamma0 += theta.gamma(k);
            for j in 0..=p {
                flipped.set_omega(j, k, -theta.omega(j, k));
            }
            flipped.set_gamma(k, -theta.gamma(k));
        }
    }
    let mut out = flipped.clone();
    out.set_gamma(0, gamma0);
    for (new, &old) in op.permutation.iter().enumerate() {
        for j in 0..=p {
            out.set_omega(j, new + 1, flipped.omega(j, old + 1));
        }
        out.set_gamma(new + 1, flipped.gamma(old + 1));
    }
    out
}

/// The op mapping `theta` to its canonical representative.
///
/// Nodes are first flipped so that `γ_k ≥ 0` (for `γ_k = 0`, so that the
/// first nonzero entry of `(ω_0k, …, ω_pk)` is positive), then sorted by
/// descending `γ_k` with ties broken by ascending lexicographic order of
/// the input-weight column.
pub fn canonical_op(theta: &ParamVector) -> SymmetryOp {
    let (_, q) = theta.shape();
    let flips: Vec<bool> = (1..=q)
        .map(|k| {
            let g = theta.gamma(k);
            if g != 0.0 {
                g < 0.0
            } else {
                theta.omega_column(k).into_iter().find(|&w| w != 0.0).is_some_and(|w| w < 0.0)
            }
        })
        .collect();
    let key = |k: usize| -> (f64, Vec<f64>) {
        let s = if flips[k] { -1.0 } else { 1.0 };
        let col = theta.omega_column(k + 1).into_iter().map(|w| s * w + 0.0).collect();
        (s * theta.gamma(k + 1) + 0.0, col)
    };
    let keys: Vec<(f64, Vec<f64>)> = (0..q).map(key).collect();
    let mut permutation: Vec<usize> = (0..q).collect();
    permutation.sort_by(|&a, &b| {
        keys[b].0.total_cmp(&keys[a].0).then_with(|| lex_cmp(&keys[a].1, &keys[b].1))
    });
    SymmetryOp { permutation, flips }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Unique representative of the symmetry orbit of `theta`.
pub fn canonicalize(theta: &ParamVector) -> ParamVector {
    let mut out = apply_symmetry(theta, &canonical_op(theta));
    // −0.0 and 0.0 must compare equal in the ordering key
    for v in out.as_mut_slice() {
        *v += 0.0;
    }
    out
}

/// The op bringing `theta` closest (Euclidean) to `target`, searched
/// exhaustively over all `2^q q!` ops, with the aligned vector.
pub fn align_to(theta: &ParamVector, target: &ParamVector) -> (ParamVector, SymmetryOp) {
    assert_eq!(theta.shape(), target.shape(), "alignment target has a different shape");
    let (_, q) = theta.shape();
    let mut best: Option<(f64, SymmetryOp)> = None;
    for_each_op(q, |op| {
        let d = distance_sq(&apply_symmetry(theta, op), target);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, op.clone()));
        }
    });
    let (_, op) = best.expect("at least the identity op exists");
    (apply_symmetry(theta, &op), op)
}

pub(crate) fn distance_sq(a: &ParamVector, b: &ParamVector) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReductionKind {
    ZeroGamma,
    SignEquivalentPair,
    ConstantNetInput,
}

impl ReductionKind {
    pub fn name(self) -> &'static str {
        match self {
            ReductionKind::ZeroGamma => "zero_gamma",
            ReductionKind::SignEquivalentPair => "sign_equivalent_pair",
            ReductionKind::ConstantNetInput => "constant_net_input",
        }
    }
}

/// One reason a network is reducible; `nodes` are 1-based hidden-node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReason {
    pub kind: ReductionKind,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReducibilityReport {
    pub reasons: Vec<ReductionReason>,
}

impl ReducibilityReport {
    pub fn reducible(&self) -> bool {
        !self.reasons.is_empty()
    }
}

pub const DEFAULT_REDUCIBILITY_TOL: f64 = 1e-6;

/// Checks the three reducibility conditions on the observed covariates.
pub fn check_reducible(arch: &Architecture, theta: &ParamVector, data: &Dataset, tol: f64) -> Result<ReducibilityReport> {
    check_compatible(arch, theta, data)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("reducibility tolerance must be positive, got {tol}")));
    }
    let q = arch.q();
    let mut reasons = Vec::new();
    for k in 1..=q {
        if fabs(theta.gamma(k)) <= tol {
            reasons.push(ReductionReason { kind: ReductionKind::ZeroGamma, nodes: vec![k] });
        }
    }

    let n = data.n();
    let mut s = vec![0.0; n * q];
    for i in 0..n {
        net_inputs(q, theta.as_slice(), data.row(i), &mut s[i * q..(i + 1) * q]);
    }

    for k1 in 0..q {
        for k2 in (k1 + 1)..q {
            let dev = (0..n).fold(0.0f64, |m, i| m.max(fabs(fabs(s[i * q + k1]) - fabs(s[i * q + k2]))));
            if dev <= tol {
                reasons.push(ReductionReason {
                    kind: ReductionKind::SignEquivalentPair,
                    nodes: vec![k1 + 1, k2 + 1],
                });
            }
        }
    }

    for k in 0..q {
        let mean = (0..n).map(|i| s[i * q + k]).sum::<f64>() / n as f64;
        let dev = (0..n).fold(0.0f64, |m, i| m.max(fabs(s[i * q + k] - mean)));
        if dev <= tol {
            reasons.push(ReductionReason {
                kind: ReductionKind::ConstantNetInput,
                nodes: vec![k + 1],
            });
        }
    }
    Ok(ReducibilityReport { reasons })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::penalty;
    use crate::model::{forward, forward_batch, OutputActivation};
    use crate::rng::{stream_rng, uniform};
    use proptest::prelude::*;

    fn arch(p: usize, q: usize) -> Architecture {
        Architecture::new(p, q, OutputActivation::Identity).unwrap()
    }

    fn random_theta(a: &Architecture, seed: u64) -> ParamVector {
        let mut rng = stream_rng(seed, 7);
        ParamVector::from_vec(a, (0..a.r()).map(|_| uniform(&mut rng, 2.0)).collect()).unwrap()
    }

    fn random_data(p: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, 8);
        let x = (0..n * p).map(|_| uniform(&mut rng, 3.0)).collect();
        Dataset::new(p, x, vec![0.0; n]).unwrap()
    }

    #[test]
    fn single_node_flip_example() {
        let a = arch(1, 1);
        let mut t = ParamVector::zeros(&a);
        t.set_omega(0, 1, 1.0);
        t.set_omega(1, 1, 2.0);
        t.set_gamma(0, 0.5);
        t.set_gamma(1, -1.0);
        let f = apply_symmetry(&t, &SymmetryOp::flip(1, 0));
        assert_eq!(f.as_slice(), &[-1.0, -2.0, -0.5, 1.0]);
        for x in [-1.0, 0.0, 1.0] {
            let before = forward(&a, &t, &[x]).unwrap();
            let after = forward(&a, &f, &[x]).unwrap();
            assert!((before - after).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_is_noop() {
        let a = arch(3, 2);
        let t = random_theta(&a, 1);
        assert_eq!(apply_symmetry(&t, &SymmetryOp::identity(2)), t);
    }

    #[test]
    fn enumerates_full_group() {
        for (q, expected) in [(1, 2), (2, 8), (3, 48), (4, 384)] {
            let ops = SymmetryOp::all(q);
            assert_eq!(ops.len(), expected);
            let mut dedup = ops.clone();
            dedup.sort_by(|a, b| (&a.permutation, &a.flips).cmp(&(&b.permutation, &b.flips)));
            dedup.dedup();
            assert_eq!(dedup.len(), expected);
        }
    }

    #[test]
    fn all_ops_preserve_predictions_q2() {
        let a = arch(3, 2);
        let t = random_theta(&a, 3);
        let d = random_data(3, 40, 3);
        let base = forward_batch(&a, &t, &d).unwrap();
        for op in SymmetryOp::all(2) {
            let out = forward_batch(&a, &apply_symmetry(&t, &op), &d).unwrap();
            for (x, y) in base.iter().zip(&out) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn new_rejects_invalid() {
        assert!(SymmetryOp::new(vec![0, 0], vec![false, false]).is_err());
        assert!(SymmetryOp::new(vec![0, 2], vec![false, false]).is_err());
        assert!(SymmetryOp::new(vec![1, 0], vec![false]).is_err());
        assert!(SymmetryOp::new(vec![1, 0], vec![true, false]).is_ok());
    }

    #[test]
    fn canonical_form_signs() {
        let a = arch(2, 3);
        let mut t = random_theta(&a, 5);
        t.set_gamma(2, 0.0);
        t.set_omega(0, 2, 0.0);
        t.set_omega(1, 2, -0.4);
        let c = canonicalize(&t);
        for k in 1..=3 {
            let g = c.gamma(k);
            assert!(g > 0.0 || (g == 0.0 && c.omega_column(k).iter().find(|&&w| w != 0.0).unwrap() > &0.0));
        }
        assert!(c.gamma(1) >= c.gamma(2) && c.gamma(2) >= c.gamma(3));
    }

    #[test]
    fn alignment_recovers_op() {
        let a = arch(2, 3);
        let truth = random_theta(&a, 9);
        let op = SymmetryOp::new(vec![2, 0, 1], vec![true, false, true]).unwrap();
        let moved = apply_symmetry(&truth, &op);
        let (aligned, _) = align_to(&moved, &truth);
        assert!(distance_sq(&aligned, &truth) < 1e-24);
    }

    #[test]
    fn reducibility_conditions() {
        let a = arch(2, 2);
        let d = random_data(2, 30, 4);
        let mut t = random_theta(&a, 4);
        assert!(!check_reducible(&a, &t, &d, 1e-6).unwrap().reducible());

        let mut z = t.clone();
        z.set_gamma(1, 0.0);
        let rep = check_reducible(&a, &z, &d, 1e-6).unwrap();
        assert_eq!(rep.reasons, vec![ReductionReason { kind: ReductionKind::ZeroGamma, nodes: vec![1] }]);

        let mut same = t.clone();
        for j in 0..=2 {
            same.set_omega(j, 2, t.omega(j, 1));
        }
        let rep = check_reducible(&a, &same, &d, 1e-6).unwrap();
        assert!(rep.reasons.iter().any(|r| r.kind == ReductionKind::SignEquivalentPair && r.nodes == vec![1, 2]));

        t.set_omega(1, 2, 0.0);
        t.set_omega(2, 2, 0.0);
        let rep = check_reducible(&a, &t, &d, 1e-6).unwrap();
        assert!(rep.reasons.iter().any(|r| r.kind == ReductionKind::ConstantNetInput && r.nodes == vec![2]));
        assert!(check_reducible(&a, &t, &d, 0.0).is_err());
    }

    fn op_strategy(q: usize) -> impl Strategy<Value = SymmetryOp> {
        (Just((0..q).collect::<Vec<usize>>()).prop_shuffle(), proptest::collection::vec(any::<bool>(), q))
            .prop_map(|(perm, flips)| SymmetryOp::new(perm, flips).unwrap())
    }

    fn theta_strategy(p: usize, q: usize) -> impl Strategy<Value = ParamVector> {
        let a = arch(p, q);
        proptest::collection::vec(-3.0f64..3.0, a.r()).prop_map(move |v| ParamVector::from_vec(&a, v).unwrap())
    }

    proptest! {
        #[test]
        fn canonicalize_idempotent_and_orbit_constant(t in theta_strategy(2, 3), op in op_strategy(3)) {
            let c = canonicalize(&t);
            prop_assert_eq!(canonicalize(&c), c.clone());
            let moved = canonicalize(&apply_symmetry(&t, &op));
            let g0 = c.as_slice().len() - 4;
            for (i, (x, y)) in c.as_slice().iter().zip(moved.as_slice()).enumerate() {
                if i == g0 {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                } else {
                    prop_assert_eq!(x, y);
                }
            }
        }

        #[test]
        fn composition_matches_sequential_application(
            t in theta_strategy(2, 3), a in op_strategy(3), b in op_strategy(3)
        ) {
            let seq = apply_symmetry(&apply_symmetry(&t, &a), &b);
            let once = apply_symmetry(&t, &a.then(&b));
            for (x, y) in seq.as_slice().iter().zip(once.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn penalty_invariant(t in theta_strategy(3, 3), op in op_strategy(3)) {
            let moved = apply_symmetry(&t, &op);
            prop_assert!((penalty(&t, 0.01) - penalty(&moved, 0.01)).abs() <= 1e-12);
        }
    }
}
