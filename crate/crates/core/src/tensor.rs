//! Dense truncated tensor algebra over `R^d`.
//!
//! Level `k` of a [`GradedTensor`] stores `d^k` coefficients indexed by words of
//! length `k` in lexicographic order, with letters `1..=d`. Products drop every
//! level above the truncation depth.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A word `i_1 i_2 ... i_k` over the alphabet `1..=d`. The empty word is the scalar slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>, d: usize) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&i| i == 0 || i > d) {
            return Err(Error::Domain(format!("letter {bad} outside 1..={d}")));
        }
        Ok(Word(letters))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Position inside its level, lexicographic.
    pub fn index(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, &i| acc * d + (i - 1))
    }

    pub fn from_index(d: usize, len: usize, mut idx: usize) -> Self {
        let mut letters = vec![0; len];
        for slot in letters.iter_mut().rev() {
            *slot = idx % d + 1;
            idx /= d;
        }
        Word(letters)
    }

    /// All words of length `1..=depth`, level by level.
    pub fn all(d: usize, depth: usize) -> impl Iterator<Item = Word> {
        (1..=depth).flat_map(move |k| (0..d.pow(k as u32)).map(move |i| Word::from_index(d, k, i)))
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(""))
    }
}

/// Element of `T^{(l)}(R^d)`, stored as one flat buffer of levels `0..=l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TensorJson", try_from = "TensorJson")]
pub struct GradedTensor {
    d: usize,
    l: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    d: usize,
    l: usize,
    levels: Vec<Vec<f64>>,
}

impl From<GradedTensor> for TensorJson {
    fn from(t: GradedTensor) -> Self {
        TensorJson { d: t.d, l: t.l, levels: t.levels() }
    }
}

impl TryFrom<TensorJson> for GradedTensor {
    type Error = Error;
    fn try_from(j: TensorJson) -> Result<Self> {
        GradedTensor::from_levels(j.d, j.l, j.levels)
    }
}

/// Start of level `k` in the flat buffer.
#[inline]
fn offset(d: usize, k: usize) -> usize {
    if d == 1 {
        k
    } else {
        (d.pow(k as u32) - 1) / (d - 1)
    }
}

/// Position of the coefficient of `word` in the flat buffer of a tensor over `R^d`.
pub fn flat_index(d: usize, word: &Word) -> usize {
    offset(d, word.len()) + word.index(d)
}

impl GradedTensor {
    pub fn zero(d: usize, l: usize) -> Self {
        assert!(d >= 1 && l >= 1, "tensor algebra needs d >= 1 and l >= 1");
        GradedTensor { d, l, coeffs: vec![0.0; offset(d, l + 1)] }
    }

    pub fn one(d: usize, l: usize) -> Self {
        let mut t = Self::zero(d, l);
        t.coeffs[0] = 1.0;
        t
    }

    pub fn scalar(d: usize, l: usize, c: f64) -> Self {
        let mut t = Self::zero(d, l);
        t.coeffs[0] = c;
        t
    }

    /// Basis letter `e_i` (1-based).
    pub fn letter(d: usize, l: usize, i: usize) -> Self {
        let mut t = Self::zero(d, l);
        t.coeffs[i] = 1.0;
        t
    }

    /// Embeds a vector `v ∈ R^d` at level 1.
    pub fn from_vector(l: usize, v: &[f64]) -> Self {
        let mut t = Self::zero(v.len(), l);
        t.coeffs[1..=v.len()].copy_from_slice(v);
        t
    }

    /// `exp(v)` for `v` at level 1: level `k` is `v^{⊗k}/k!`.
    pub fn exp_vector(l: usize, v: &[f64]) -> Self {
        let d = v.len();
        let mut t = Self::zero(d, l);
        t.coeffs[0] = 1.0;
        for k in 1..=l {
            let (prev, cur) = t.coeffs.split_at_mut(offset(d, k));
            let prev = &prev[offset(d, k - 1)..];
            let inv = 1.0 / k as f64;
            for (i, p) in prev.iter().enumerate() {
                for (j, vj) in v.iter().enumerate() {
                    cur[i * d + j] = p * vj * inv;
                }
            }
        }
        t
    }

    pub fn basis(d: usize, l: usize, word: &Word) -> Self {
        let mut t = Self::zero(d, l);
        if word.len() <= l {
            t.coeffs[offset(d, word.len()) + word.index(d)] = 1.0;
        }
        t
    }

    pub fn from_levels(d: usize, l: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 || l == 0 {
            return Err(Error::Domain("tensor algebra needs d >= 1 and l >= 1".into()));
        }
        if levels.len() != l + 1 {
            return Err(Error::Dimension(format!("expected {} levels, got {}", l + 1, levels.len())));
        }
        for (k, lv) in levels.iter().enumerate() {
            if lv.len() != d.pow(k as u32) {
                return Err(Error::Dimension(format!(
                    "level {k} has {} coefficients, expected {}",
                    lv.len(),
                    d.pow(k as u32)
                )));
            }
        }
        Ok(GradedTensor { d, l, coeffs: levels.into_iter().flatten().collect() })
    }

    /// Copies out the per-level coefficient arrays.
    pub fn levels(&self) -> Vec<Vec<f64>> {
        (0..=self.l).map(|k| self.level(k).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.l
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.coeffs[offset(self.d, k)..offset(self.d, k + 1)]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let (a, b) = (offset(self.d, k), offset(self.d, k + 1));
        &mut self.coeffs[a..b]
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, word: &Word) -> f64 {
        if word.len() > self.l {
            return 0.0;
        }
        self.coeffs[offset(self.d, word.len()) + word.index(self.d)]
    }

    pub fn set_coeff(&mut self, word: &Word, value: f64) {
        let i = offset(self.d, word.len()) + word.index(self.d);
        self.coeffs[i] = value;
    }

    /// Coefficients of levels `1..=l` concatenated.
    pub fn flat_positive(&self) -> Vec<f64> {
        self.coeffs[1..].to_vec()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.l != other.l {
            return Err(Error::Dimension(format!(
                "tensor shapes (d={}, l={}) and (d={}, l={})",
                self.d, self.l, other.d, other.l
            )));
        }
        Ok(())
    }

    /// Truncated tensor product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zero(self.d, self.l);
        self.mul_into(other, &mut out);
        Ok(out)
    }

    /// `out = self ⊗ other`; shapes must already agree.
    pub fn mul_into(&self, other: &Self, out: &mut Self) {
        let d = self.d;
        out.coeffs.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..=self.l {
            let a = self.level(i);
            for j in 0..=(self.l - i) {
                let b = other.level(j);
                let stride = b.len();
                let base = offset(d, i + j);
                for (ia, &ca) in a.iter().enumerate() {
                    if ca == 0.0 {
                        continue;
                    }
                    let row = &mut out.coeffs[base + ia * stride..base + (ia + 1) * stride];
                    for (t, &cb) in row.iter_mut().zip(b) {
                        *t += ca * cb;
                    }
                }
            }
        }
    }

    /// `self ← self ⊗ exp(v)` for `v` at level 1, by Horner's rule level by
    /// level (top level first so lower levels are still the old ones).
    pub fn mul_exp_vector(&mut self, v: &[f64]) {
        let d = self.d;
        assert_eq!(v.len(), d, "vector dimension");
        let mut acc = Vec::with_capacity(d.pow(self.l as u32));
        let mut next = Vec::with_capacity(acc.capacity());
        for k in (1..=self.l).rev() {
            acc.clear();
            acc.push(self.coeffs[0]);
            for i in 1..=k {
                let inv = 1.0 / (k - i + 1) as f64;
                next.clear();
                for &a in &acc {
                    for &vj in v {
                        next.push(a * vj * inv);
                    }
                }
                for (n, c) in next.iter_mut().zip(self.level(i)) {
                    *n += c;
                }
                std::mem::swap(&mut acc, &mut next);
            }
            self.level_mut(k).copy_from_slice(&acc);
        }
    }

    /// Truncated exponential; the scalar level must vanish.
    pub fn exp(&self) -> Result<Self> {
        if self.scalar_part() != 0.0 {
            return Err(Error::Domain(format!(
                "exp needs zero scalar level, got {}",
                self.scalar_part()
            )));
        }
        // Horner: exp(a) = 1 + a(1 + a/2(1 + a/3(...)))
        let mut acc = Self::one(self.d, self.l);
        let mut tmp = Self::zero(self.d, self.l);
        for k in (1..=self.l).rev() {
            self.mul_into(&acc, &mut tmp);
            for (a, t) in acc.coeffs.iter_mut().zip(&tmp.coeffs) {
                *a = t / k as f64;
            }
            acc.coeffs[0] += 1.0;
        }
        Ok(acc)
    }

    /// Truncated logarithm; the scalar level must equal 1.
    pub fn log(&self) -> Result<Self> {
        if (self.scalar_part() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "log needs unit scalar level, got {}",
                self.scalar_part()
            )));
        }
        let mut x = self.clone();
        x.coeffs[0] = 0.0;
        let mut sum = Self::zero(self.d, self.l);
        let mut power = x.clone();
        let mut tmp = Self::zero(self.d, self.l);
        for k in 1..=self.l {
            let c = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            sum.axpy(c, &power);
            if k < self.l {
                power.mul_into(&x, &mut tmp);
                std::mem::swap(&mut power, &mut tmp);
            }
        }
        Ok(sum)
    }

    /// Multiplicative inverse of an element with scalar part 1.
    pub fn inverse(&self) -> Result<Self> {
        if (self.scalar_part() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("inverse needs unit scalar level".into()));
        }
        let mut x = self.clone();
        x.coeffs[0] = 0.0;
        let mut sum = Self::one(self.d, self.l);
        let mut power = x.clone();
        let mut tmp = Self::zero(self.d, self.l);
        for k in 1..=self.l {
            sum.axpy(if k % 2 == 1 { -1.0 } else { 1.0 }, &power);
            if k < self.l {
                power.mul_into(&x, &mut tmp);
                std::mem::swap(&mut power, &mut tmp);
            }
        }
        Ok(sum)
    }

    /// Grading automorphism: level `k` scaled by `lambda^k`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        let mut factor = 1.0;
        for k in 0..=self.l {
            out.level_mut(k).iter_mut().for_each(|c| *c *= factor);
            factor *= lambda;
        }
        out
    }

    /// Hilbert–Schmidt norm over all levels.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += c * y;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// Commutator `a⊗b − b⊗a`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        let mut ab = self.mul(other)?;
        let ba = other.mul(self)?;
        ab.axpy(-1.0, &ba);
        Ok(ab)
    }
}

impl Add for &GradedTensor {
    type Output = GradedTensor;
    fn add(self, rhs: &GradedTensor) -> GradedTensor {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &GradedTensor {
    type Output = GradedTensor;
    fn sub(self, rhs: &GradedTensor) -> GradedTensor {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Neg for &GradedTensor {
    type Output = GradedTensor;
    fn neg(self) -> GradedTensor {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &GradedTensor {
    type Output = GradedTensor;
    fn mul(self, rhs: f64) -> GradedTensor {
        self.scaled(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(d: usize, l: usize, scalar: f64, rng: &mut impl Rng) -> GradedTensor {
        let mut t = GradedTensor::zero(d, l);
        for k in 1..=l {
            t.level_mut(k).iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
        }
        t.level_mut(0)[0] = scalar;
        t
    }

    /// Coefficient of `a⊗b` on a word, summing over every split of the word.
    fn convolution_oracle(a: &GradedTensor, b: &GradedTensor, word: &Word) -> f64 {
        (0..=word.len())
            .map(|cut| {
                let left = Word(word.0[..cut].to_vec());
                let right = Word(word.0[cut..].to_vec());
                a.coeff(&left) * b.coeff(&right)
            })
            .sum()
    }

    #[test]
    fn product_of_unit_plus_letters() {
        let (d, l) = (2, 2);
        let a = &GradedTensor::one(d, l) + &GradedTensor::letter(d, l, 1);
        let b = &GradedTensor::one(d, l) + &GradedTensor::letter(d, l, 2);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.level(0), &[1.0]);
        assert_eq!(p.level(1), &[1.0, 1.0]);
        assert_eq!(p.level(2), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(3, 3, 0.7, &mut rng);
        assert_eq!(GradedTensor::one(3, 3).mul(&a).unwrap(), a);
    }

    #[test]
    fn product_matches_word_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random(2, 4, rng.gen(), &mut rng);
            let b = random(2, 4, rng.gen(), &mut rng);
            let p = a.mul(&b).unwrap();
            for w in Word::all(2, 4) {
                assert!((p.coeff(&w) - convolution_oracle(&a, &b, &w)).abs() < 1e-12);
            }
            let empty = Word(vec![]);
            assert!((p.coeff(&empty) - convolution_oracle(&a, &b, &empty)).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = GradedTensor::zero(2, 2);
        let b = GradedTensor::zero(3, 2);
        assert!(matches!(a.mul(&b), Err(Error::Dimension(_))));
        assert!(GradedTensor::from_levels(2, 1, vec![vec![1.0], vec![0.0]]).is_err());
    }

    #[test]
    fn exp_of_letter() {
        let e = GradedTensor::letter(2, 2, 1).exp().unwrap();
        assert_eq!(e.level(0), &[1.0]);
        assert_eq!(e.level(1), &[1.0, 0.0]);
        assert_eq!(e.level(2), &[0.5, 0.0, 0.0, 0.0]);
        assert_eq!(GradedTensor::zero(2, 3).exp().unwrap(), GradedTensor::one(2, 3));
        assert!(GradedTensor::one(2, 3).exp().is_err());
    }

    #[test]
    fn mul_exp_vector_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, l) in [(1usize, 3usize), (2, 4), (3, 3)] {
            let a = random(d, l, 1.0, &mut rng);
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut b = a.clone();
            b.mul_exp_vector(&v);
            let c = a.mul(&GradedTensor::exp_vector(l, &v)).unwrap();
            assert!(b.max_abs_diff(&c) < 1e-13);
        }
    }

    #[test]
    fn exp_vector_matches_series() {
        let v = [0.3, -1.2, 0.7];
        let a = GradedTensor::exp_vector(4, &v);
        let b = GradedTensor::from_vector(4, &v).exp().unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn log_of_one_and_scalar_check() {
        assert_eq!(GradedTensor::one(3, 3).log().unwrap(), GradedTensor::zero(3, 3));
        assert!(GradedTensor::zero(3, 3).log().is_err());
    }

    #[test]
    fn log_of_product_of_exponentials() {
        let (d, l) = (2, 2);
        let g = GradedTensor::letter(d, l, 1)
            .exp()
            .unwrap()
            .mul(&GradedTensor::letter(d, l, 2).exp().unwrap())
            .unwrap();
        let lg = g.log().unwrap();
        assert!(lg.level(0)[0].abs() < 1e-15);
        assert_eq!(lg.level(1), &[1.0, 1.0]);
        let expected = [0.0, 0.5, -0.5, 0.0];
        for (a, b) in lg.level(2).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn log_exp_of_sum_of_letters() {
        for l in 1..=5 {
            let v = &GradedTensor::letter(2, l, 1) + &GradedTensor::letter(2, l, 2);
            let back = v.exp().unwrap().log().unwrap();
            assert!(back.max_abs_diff(&v) < 1e-13);
        }
    }

    #[test]
    fn dilation_examples() {
        let w = GradedTensor::basis(2, 3, &Word(vec![1, 2]));
        let dl = w.dilate(3.0);
        assert_eq!(dl.coeff(&Word(vec![1, 2])), 9.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(2, 3, 0.3, &mut rng);
        assert_eq!(a.dilate(1.0), a);
    }

    #[test]
    fn norms() {
        assert_eq!(GradedTensor::basis(2, 2, &Word(vec![1, 2])).norm(), 1.0);
        assert_eq!(GradedTensor::zero(2, 2).norm(), 0.0);
    }

    #[test]
    fn inverse_and_word_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random(3, 3, 0.0, &mut rng).exp().unwrap();
        let id = g.mul(&g.inverse().unwrap()).unwrap();
        assert!(id.max_abs_diff(&GradedTensor::one(3, 3)) < 1e-12);
        for w in Word::all(3, 3) {
            assert_eq!(Word::from_index(3, w.len(), w.index(3)), w);
        }
        assert!(Word::new(vec![0], 2).is_err());
        assert!(Word::new(vec![3], 2).is_err());
    }

    #[test]
    fn json_layout() {
        let t = GradedTensor::letter(2, 1, 2);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"d":2,"l":1,"levels":[[0.0],[0.0,1.0]]}"#);
        let back: GradedTensor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    fn arb_tensor(d: usize, l: usize, scalar_zero: bool) -> impl Strategy<Value = GradedTensor> {
        let n: usize = (0..=l).map(|k| d.pow(k as u32)).sum();
        prop::collection::vec(-1.0f64..1.0, n).prop_map(move |flat| {
            let mut t = GradedTensor::zero(d, l);
            let mut it = flat.into_iter();
            for k in 0..=l {
                for c in t.level_mut(k) {
                    *c = it.next().unwrap();
                }
            }
            if scalar_zero {
                t.level_mut(0)[0] = 0.0;
            }
            t
        })
    }

    proptest! {
        #[test]
        fn associativity(a in arb_tensor(3, 3, false), b in arb_tensor(3, 3, false), c in arb_tensor(3, 3, false)) {
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }

        #[test]
        fn dilation_is_multiplicative(a in arb_tensor(2, 4, false), b in arb_tensor(2, 4, false), lambda in 0.1f64..3.0) {
            let lhs = a.mul(&b).unwrap().dilate(lambda);
            let rhs = a.dilate(lambda).mul(&b.dilate(lambda)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }

        #[test]
        fn exp_log_inverse(a in arb_tensor(2, 4, true)) {
            let back = a.exp().unwrap().log().unwrap();
            prop_assert!(back.max_abs_diff(&a) < 1e-12);
        }

        #[test]
        fn dilation_commutes_with_exp(a in arb_tensor(3, 3, true), lambda in 0.1f64..2.0) {
            let lhs = a.exp().unwrap().dilate(lambda);
            let rhs = a.dilate(lambda).exp().unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn triangle_inequality(a in arb_tensor(2, 3, false), b in arb_tensor(2, 3, false)) {
            prop_assert!((&a + &b).norm() <= a.norm() + b.norm() + 1e-12);
        }
    }
}
