//! Free nilpotent Lie algebra `g^{(l)}` on a Lyndon-word bracket basis.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{augmented_lagrangian, ConstrainedEval, LbfgsOptions, PenaltyOptions};
use crate::rng;
use crate::tensor::{GradedTensor, Word};

/// Bracket expression over letters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Bracket {
    Letter(usize),
    Pair(Box<Bracket>, Box<Bracket>),
}

impl Bracket {
    pub fn expand(&self, d: usize, l: usize) -> GradedTensor {
        match self {
            Bracket::Letter(i) => GradedTensor::letter(d, l, *i),
            Bracket::Pair(a, b) => {
                let (ta, tb) = (a.expand(d, l), b.expand(d, l));
                ta.bracket(&tb).expect("same shape")
            }
        }
    }
}

impl std::fmt::Display for Bracket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bracket::Letter(i) => write!(f, "{i}"),
            Bracket::Pair(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// Lyndon words of length `1..=l` over `1..=d`, in Duval order (by length then lex after sort).
pub fn lyndon_words(d: usize, l: usize) -> Vec<Word> {
    // Duval's algorithm enumerates Lyndon words of length <= l lexicographically.
    let mut out = Vec::new();
    let mut w: Vec<usize> = vec![0];
    while !w.is_empty() {
        out.push(Word(w.iter().map(|i| i + 1).collect()));
        let m = w.len();
        while w.len() < l {
            let c = w[w.len() - m];
            w.push(c);
        }
        while let Some(&last) = w.last() {
            if last == d - 1 {
                w.pop();
            } else {
                break;
            }
        }
        if let Some(last) = w.last_mut() {
            *last += 1;
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.0.cmp(&b.0)));
    out
}

fn is_lyndon(w: &[usize]) -> bool {
    (1..w.len()).all(|i| w < &w[i..])
}

/// Standard bracketing from the standard factorization `w = uv`, `v` the longest proper Lyndon suffix.
pub fn standard_bracket(w: &[usize]) -> Bracket {
    if w.len() == 1 {
        return Bracket::Letter(w[0]);
    }
    let split = (1..w.len()).find(|&i| is_lyndon(&w[i..])).expect("a single letter is Lyndon");
    Bracket::Pair(Box::new(standard_bracket(&w[..split])), Box::new(standard_bracket(&w[split..])))
}

/// Witt formula for the dimension of the degree-`k` component.
pub fn witt_dimension(d: usize, k: usize) -> usize {
    let mut total: i64 = 0;
    for j in 1..=k {
        if k % j == 0 {
            total += mobius(k / j) * (d as i64).pow(j as u32);
        }
    }
    (total / k as i64) as usize
}

fn mobius(mut n: usize) -> i64 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisElement {
    pub word: Word,
    pub bracket: Bracket,
    pub degree: usize,
    #[serde(skip)]
    pub expansion: GradedTensor,
}

/// Hall basis of `g^{(l)}` indexed by Lyndon words.
#[derive(Debug)]
pub struct LyndonBasis {
    d: usize,
    l: usize,
    elements: Vec<BasisElement>,
    level_dims: Vec<usize>,
    // per level k: (first basis index, d^k x dim_k expansion matrix, its pseudo-inverse)
    blocks: Vec<(usize, DMatrix<f64>, DMatrix<f64>)>,
}

/// Tolerance on the least-squares residual for Lie-algebra membership.
pub const LIE_TOL: f64 = 1e-8;

impl LyndonBasis {
    pub fn new(d: usize, l: usize) -> Result<Arc<Self>> {
        if d == 0 || l == 0 {
            return Err(Error::Domain("basis needs d >= 1 and l >= 1".into()));
        }
        let elements: Vec<BasisElement> = lyndon_words(d, l)
            .into_iter()
            .map(|word| {
                let bracket = standard_bracket(&word.0);
                let expansion = bracket.expand(d, l);
                BasisElement { degree: word.len(), word, bracket, expansion }
            })
            .collect();
        let mut level_dims = vec![0; l];
        for e in &elements {
            level_dims[e.degree - 1] += 1;
        }
        let mut blocks = Vec::with_capacity(l);
        let mut start = 0;
        for k in 1..=l {
            let n = level_dims[k - 1];
            let rows = d.pow(k as u32);
            let mat = DMatrix::from_fn(rows, n, |r, c| elements[start + c].expansion.level(k)[r]);
            let pinv = if n == 0 {
                DMatrix::zeros(0, rows)
            } else {
                mat.clone()
                    .pseudo_inverse(1e-12)
                    .map_err(|e| Error::Domain(format!("pseudo-inverse failed: {e}")))?
            };
            blocks.push((start, mat, pinv));
            start += n;
        }
        Ok(Arc::new(LyndonBasis { d, l, elements, level_dims, blocks }))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn level_dims(&self) -> &[usize] {
        &self.level_dims
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.elements.iter().map(|e| e.degree)
    }

    /// Homogeneous dimension `ν = Σ k · dim L_k`.
    pub fn nu_dimension(&self) -> usize {
        self.level_dims.iter().enumerate().map(|(i, n)| (i + 1) * n).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "l": self.l,
            "level_dims": self.level_dims,
            "nu": self.nu_dimension(),
            "elements": self.elements.iter().map(|e| serde_json::json!({
                "word": e.word.to_string(),
                "bracket": e.bracket.to_string(),
                "degree": e.degree,
            })).collect::<Vec<_>>(),
        })
    }

    /// Projects a tensor onto the basis; also returns the least-squares residual.
    pub fn project(self: &Arc<Self>, a: &GradedTensor) -> Result<(LieCoordinates, f64)> {
        if a.dim() != self.d || a.depth() != self.l {
            return Err(Error::Dimension("tensor shape differs from basis".into()));
        }
        let mut coeffs = vec![0.0; self.len()];
        let mut res2 = a.scalar_part().powi(2);
        for (k, (start, mat, pinv)) in self.blocks.iter().enumerate() {
            let b = DVector::from_column_slice(a.level(k + 1));
            let x = pinv * &b;
            let r = mat * &x - &b;
            res2 += r.norm_squared();
            coeffs[*start..*start + x.len()].copy_from_slice(x.as_slice());
        }
        Ok((LieCoordinates { basis: Arc::clone(self), coeffs }, res2.sqrt()))
    }

    /// `tensor_to_lie`: fails when the residual shows `a ∉ g^{(l)}`.
    pub fn tensor_to_lie(self: &Arc<Self>, a: &GradedTensor) -> Result<LieCoordinates> {
        let (u, residual) = self.project(a)?;
        if residual > LIE_TOL * a.norm().max(1.0) {
            return Err(Error::NotLie { residual });
        }
        Ok(u)
    }

    pub fn zero(self: &Arc<Self>) -> LieCoordinates {
        LieCoordinates { basis: Arc::clone(self), coeffs: vec![0.0; self.len()] }
    }

    pub fn coordinates(self: &Arc<Self>, coeffs: Vec<f64>) -> Result<LieCoordinates> {
        if coeffs.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} coordinates for a basis of size {}",
                coeffs.len(),
                self.len()
            )));
        }
        Ok(LieCoordinates { basis: Arc::clone(self), coeffs })
    }

    /// Index of the basis element for a Lyndon word.
    pub fn index_of(&self, word: &[usize]) -> Option<usize> {
        self.elements.iter().position(|e| e.word.0 == word)
    }
}

/// Coordinates of an element of `g^{(l)}`.
#[derive(Clone, Debug)]
pub struct LieCoordinates {
    basis: Arc<LyndonBasis>,
    coeffs: Vec<f64>,
}

impl LieCoordinates {
    pub fn basis(&self) -> &Arc<LyndonBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn to_tensor(&self) -> GradedTensor {
        let mut t = GradedTensor::zero(self.basis.d, self.basis.l);
        for (c, e) in self.coeffs.iter().zip(&self.basis.elements) {
            if *c != 0.0 {
                t.axpy(*c, &e.expansion);
            }
        }
        t
    }

    fn check_basis(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.basis, &other.basis)
            && (self.basis.d != other.basis.d || self.basis.l != other.basis.l)
        {
            return Err(Error::Dimension("coordinates on different bases".into()));
        }
        Ok(())
    }

    /// Group law `log(exp(self) ⊗ exp(other))`.
    pub fn star(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        let g = self.to_tensor().exp()?.mul(&other.to_tensor().exp()?)?;
        self.basis.tensor_to_lie(&g.log()?)
    }

    /// Coordinates of `log(exp(self)^{-1})`.
    pub fn group_inverse(&self) -> Result<Self> {
        let g = self.to_tensor().exp()?.inverse()?;
        self.basis.tensor_to_lie(&g.log()?)
    }

    pub fn dilate(&self, lambda: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(self.basis.degrees())
            .map(|(c, q)| c * lambda.powi(q as i32))
            .collect();
        LieCoordinates { basis: Arc::clone(&self.basis), coeffs }
    }

    /// `max_α |u^α|^{1/q_α}`.
    pub fn homogeneous_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.basis.degrees())
            .map(|(c, q)| c.abs().powf(1.0 / q as f64))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Outcome of a CC-norm estimate.
#[derive(Clone, Debug, Serialize)]
pub struct CcEstimate {
    /// Length of the best feasible piecewise-linear path (an upper bound on the CC norm).
    pub value: f64,
    /// Max-coordinate mismatch between the path's log-signature and the target.
    pub residual: f64,
    pub increments: Vec<Vec<f64>>,
}

/// Partial derivatives of `exp(v)` (v at level 1) with respect to each `v^i`.
///
/// Uses `S_k = S_{k-1} ⊗ v + v^{⊗(k-1)} ⊗ e_i`, where level `k` of the
/// derivative is `S_k / k!`.
fn exp_derivatives(l: usize, v: &[f64]) -> Vec<GradedTensor> {
    let d = v.len();
    let powers = GradedTensor::exp_vector(l, v);
    (0..d)
        .map(|i| {
            let mut out = GradedTensor::zero(d, l);
            let mut prev_s: Vec<f64> = vec![0.0];
            let mut fact = 1.0;
            for k in 1..=l {
                fact *= k as f64;
                // v^{⊗(k-1)} = (k-1)! * level k-1 of exp(v)
                let p_prev: Vec<f64> = powers.level(k - 1).iter().map(|c| c * fact / k as f64).collect();
                let mut s_k = vec![0.0; prev_s.len() * d];
                for (idx, (sp, pp)) in prev_s.iter().zip(&p_prev).enumerate() {
                    for (j, vj) in v.iter().enumerate() {
                        s_k[idx * d + j] = sp * vj + if j == i { *pp } else { 0.0 };
                    }
                }
                out.level_mut(k).iter_mut().zip(&s_k).for_each(|(o, s)| *o = s / fact);
                prev_s = s_k;
            }
            out
        })
        .collect()
}

/// Estimates the Carnot–Carathéodory norm of `exp(u)` by minimizing the length of
/// an `m`-segment piecewise-linear path whose log-signature equals `u`.
///
/// The energy `m Σ|Δ_j|²` is minimized under the signature constraint (its
/// minimizers have constant speed, where energy equals length squared), with
/// `restarts` random initial paths.
pub fn cc_norm_estimate(u: &LieCoordinates, segments: usize, restarts: usize, seed: u64) -> Result<CcEstimate> {
    let basis = u.basis();
    let (d, l) = (basis.dim(), basis.depth());
    if segments * d < basis.len() {
        return Err(Error::Domain(format!(
            "{segments} segments give {} parameters, basis needs {}",
            segments * d,
            basis.len()
        )));
    }
    let n = segments * d;
    let scale = u.homogeneous_norm();
    if scale == 0.0 {
        return Ok(CcEstimate { value: 0.0, residual: 0.0, increments: vec![vec![0.0; d]; segments] });
    }
    // solve at unit homogeneous norm, then undo the dilation
    let unit = u.dilate(1.0 / scale);
    let target_flat = unit.to_tensor().exp()?.flat_positive();

    let eval = |x: &[f64]| -> ConstrainedEval {
        let m = segments as f64;
        let objective = m * x.iter().map(|v| v * v).sum::<f64>();
        let gradient = x.iter().map(|v| 2.0 * m * v).collect();
        let exps: Vec<GradedTensor> = x.chunks(d).map(|c| GradedTensor::exp_vector(l, c)).collect();
        let mut prefix = vec![GradedTensor::one(d, l)];
        for e in &exps {
            let next = prefix.last().unwrap().mul(e).unwrap();
            prefix.push(next);
        }
        let mut suffix = vec![GradedTensor::one(d, l); segments + 1];
        for j in (0..segments).rev() {
            suffix[j] = exps[j].mul(&suffix[j + 1]).unwrap();
        }
        let sig = &prefix[segments];
        let constraints: Vec<f64> =
            sig.flat_positive().iter().zip(&target_flat).map(|(a, b)| a - b).collect();
        let rows = constraints.len();
        let mut jacobian = vec![0.0; rows * n];
        let mut tmp = GradedTensor::zero(d, l);
        let mut col = GradedTensor::zero(d, l);
        for (j, chunk) in x.chunks(d).enumerate() {
            for (i, de) in exp_derivatives(l, chunk).into_iter().enumerate() {
                prefix[j].mul_into(&de, &mut tmp);
                tmp.mul_into(&suffix[j + 1], &mut col);
                for (r, val) in col.as_slice()[1..].iter().enumerate() {
                    jacobian[r * n + j * d + i] = *val;
                }
            }
        }
        ConstrainedEval { objective, gradient, constraints, jacobian }
    };

    let opts = PenaltyOptions {
        tol: 1e-9,
        inner: LbfgsOptions { max_iter: 300, grad_tol: 1e-10, ..Default::default() },
        ..Default::default()
    };
    let mut best: Option<CcEstimate> = None;
    let mut best_residual = f64::INFINITY;
    for r in 0..restarts.max(1) {
        let mut rng = rng::stream(seed, 0xCC, r as u64);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) / (segments as f64).sqrt()).collect();
        let sol = augmented_lagrangian(eval, &x0, opts);
        let increments: Vec<Vec<f64>> = sol.x.chunks(d).map(|c| c.iter().map(|v| v * scale).collect()).collect();
        let sig = increments
            .iter()
            .map(|c| GradedTensor::exp_vector(l, c))
            .try_fold(GradedTensor::one(d, l), |acc, e| acc.mul(&e))?;
        let (got, _) = basis.project(&sig.log()?)?;
        let residual = got.max_abs_diff(u);
        best_residual = best_residual.min(residual);
        if residual > 1e-6 * scale.max(1.0).powi(l as i32) {
            continue;
        }
        let value: f64 = increments.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
        if best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(CcEstimate { value, residual, increments });
        }
    }
    best.ok_or(Error::Infeasible { residual: best_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn witt_dimensions() {
        assert_eq!((1..=2).map(|k| witt_dimension(2, k)).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!((1..=3).map(|k| witt_dimension(2, k)).collect::<Vec<_>>(), vec![2, 1, 2]);
        assert_eq!((1..=4).map(|k| witt_dimension(3, k)).collect::<Vec<_>>(), vec![3, 3, 8, 18]);
        for (d, l) in [(2, 2), (2, 3), (2, 5), (3, 4), (4, 3)] {
            let b = LyndonBasis::new(d, l).unwrap();
            let expected: Vec<usize> = (1..=l).map(|k| witt_dimension(d, k)).collect();
            assert_eq!(b.level_dims(), expected.as_slice());
        }
    }

    #[test]
    fn small_bases() {
        let b = LyndonBasis::new(2, 2).unwrap();
        let names: Vec<String> = b.elements().iter().map(|e| e.bracket.to_string()).collect();
        assert_eq!(names, vec!["1", "2", "[1,2]"]);
        let b = LyndonBasis::new(2, 3).unwrap();
        let names: Vec<String> = b.elements().iter().map(|e| e.bracket.to_string()).collect();
        assert_eq!(names, vec!["1", "2", "[1,2]", "[1,[1,2]]", "[[1,2],2]"]);
        let b = LyndonBasis::new(1, 3).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.nu_dimension(), 1);
    }

    #[test]
    fn nu_values() {
        assert_eq!(LyndonBasis::new(2, 2).unwrap().nu_dimension(), 4);
        assert_eq!(LyndonBasis::new(2, 3).unwrap().nu_dimension(), 10);
        assert_eq!(LyndonBasis::new(1, 5).unwrap().nu_dimension(), 1);
    }

    /// All bracket trees with the given leaves, as tensors.
    fn all_brackets(d: usize, l: usize, letters: &[usize]) -> Vec<GradedTensor> {
        if letters.len() == 1 {
            return vec![GradedTensor::letter(d, l, letters[0])];
        }
        let mut out = Vec::new();
        for cut in 1..letters.len() {
            for a in all_brackets(d, l, &letters[..cut]) {
                for b in all_brackets(d, l, &letters[cut..]) {
                    out.push(a.bracket(&b).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn witt_matches_rank_of_all_bracket_monomials() {
        for (d, l) in [(2usize, 4usize), (3, 4)] {
            for k in 1..=l {
                let mut cols = Vec::new();
                for idx in 0..d.pow(k as u32) {
                    let w = Word::from_index(d, k, idx);
                    for t in all_brackets(d, l, &w.0) {
                        cols.push(t.level(k).to_vec());
                    }
                }
                let rows = d.pow(k as u32);
                let m = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
                assert_eq!(m.rank(1e-9), witt_dimension(d, k), "d={d} k={k}");
            }
        }
    }

    #[test]
    fn bch_coordinates() {
        let b = LyndonBasis::new(2, 2).unwrap();
        let g = GradedTensor::letter(2, 2, 1)
            .exp()
            .unwrap()
            .mul(&GradedTensor::letter(2, 2, 2).exp().unwrap())
            .unwrap();
        let u = b.tensor_to_lie(&g.log().unwrap()).unwrap();
        let expected = [1.0, 1.0, 0.5];
        for (a, e) in u.coeffs().iter().zip(expected) {
            assert!((a - e).abs() < 1e-14);
        }
        let e1 = b.coordinates(vec![1.0, 0.0, 0.0]).unwrap();
        let e2 = b.coordinates(vec![0.0, 1.0, 0.0]).unwrap();
        let s = e1.star(&e2).unwrap();
        assert!(s.max_abs_diff(&u) < 1e-14);
    }

    #[test]
    fn exp_derivatives_match_finite_differences() {
        let v = [0.4, -0.3, 0.9];
        let h = 1e-6;
        for (i, de) in exp_derivatives(3, &v).iter().enumerate() {
            let mut vp = v;
            let mut vm = v;
            vp[i] += h;
            vm[i] -= h;
            let mut fd = GradedTensor::exp_vector(3, &vp);
            fd.axpy(-1.0, &GradedTensor::exp_vector(3, &vm));
            assert!(fd.scaled(0.5 / h).max_abs_diff(de) < 1e-8);
        }
    }

    #[test]
    fn non_lie_tensor_is_rejected() {
        let b = LyndonBasis::new(2, 2).unwrap();
        let t = GradedTensor::basis(2, 2, &Word(vec![1, 2]));
        assert!(matches!(b.tensor_to_lie(&t), Err(Error::NotLie { .. })));
    }

    #[test]
    fn homogeneous_norm_examples() {
        let b = LyndonBasis::new(2, 2).unwrap();
        assert_eq!(b.coordinates(vec![2.0, 0.0, 0.0]).unwrap().homogeneous_norm(), 2.0);
        assert_eq!(b.coordinates(vec![0.0, 0.0, 4.0]).unwrap().homogeneous_norm(), 2.0);
    }

    #[test]
    fn cc_norm_of_level_one_element() {
        let b = LyndonBasis::new(2, 2).unwrap();
        let u = b.coordinates(vec![0.7, 0.0, 0.0]).unwrap();
        let est = cc_norm_estimate(&u, 4, 2, 1).unwrap();
        assert!((est.value - 0.7).abs() < 1e-4, "{est:?}");
    }

    #[test]
    fn cc_norm_of_pure_area_matches_isoperimetric_value() {
        let b = LyndonBasis::new(2, 2).unwrap();
        let u = b.coordinates(vec![0.0, 0.0, 0.1]).unwrap();
        let est = cc_norm_estimate(&u, 32, 4, 2).unwrap();
        let exact = 2.0 * (std::f64::consts::PI * 0.1).sqrt();
        assert!((est.value / exact - 1.0).abs() < 0.05, "{} vs {exact}", est.value);
        assert!(est.value >= exact * (1.0 - 1e-6));
    }

    #[test]
    fn cc_norm_is_homogeneous() {
        let b = LyndonBasis::new(2, 2).unwrap();
        let u = b.coordinates(vec![0.3, -0.2, 0.15]).unwrap();
        let base = cc_norm_estimate(&u, 16, 4, 3).unwrap().value;
        for lambda in [0.5, 2.0] {
            let v = cc_norm_estimate(&u.dilate(lambda), 16, 4, 3).unwrap().value;
            assert!((v / base / lambda - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn too_few_segments_is_rejected() {
        let b = LyndonBasis::new(2, 3).unwrap();
        let u = b.zero();
        assert!(cc_norm_estimate(&u, 2, 1, 0).is_err());
    }

    fn arb_coords(d: usize, l: usize) -> impl Strategy<Value = LieCoordinates> {
        let b = LyndonBasis::new(d, l).unwrap();
        prop::collection::vec(-1.0f64..1.0, b.len()).prop_map(move |c| b.coordinates(c).unwrap())
    }

    proptest! {
        #[test]
        fn coordinates_roundtrip(u in arb_coords(3, 3)) {
            let back = u.basis().tensor_to_lie(&u.to_tensor()).unwrap();
            prop_assert!(back.max_abs_diff(&u) < 1e-10);
        }

        #[test]
        fn star_is_associative(u in arb_coords(2, 4), v in arb_coords(2, 4), w in arb_coords(2, 4)) {
            let a = u.star(&v).unwrap().star(&w).unwrap();
            let b = u.star(&v.star(&w).unwrap()).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-9);
        }

        #[test]
        fn star_identity_and_inverse(u in arb_coords(2, 3)) {
            let zero = u.basis().zero();
            prop_assert!(u.star(&zero).unwrap().max_abs_diff(&u) < 1e-12);
            let inv = u.group_inverse().unwrap();
            prop_assert!(u.star(&inv).unwrap().max_abs_diff(&zero) < 1e-12);
        }

        #[test]
        fn homogeneous_norm_scales(u in arb_coords(2, 3), lambda in 0.1f64..4.0) {
            prop_assert!((u.dilate(lambda).homogeneous_norm() - lambda * u.homogeneous_norm()).abs() < 1e-9);
        }
    }
}
