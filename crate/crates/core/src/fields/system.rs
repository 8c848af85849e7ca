use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::poly::{PolyVectorField, TermJson};
use crate::error::{Error, Result};
use crate::lie::LieCoordinates;
use crate::tensor::Word;

/// Driving fields `V_1..V_d` on `R^N`, an optional drift `V_0` and the
/// bracket depth `l̄` at which the Hörmander condition is expected.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldSystem {
    name: String,
    fields: Vec<PolyVectorField>,
    drift: Option<PolyVectorField>,
    lbar: usize,
}

/// JSON layout of a system file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemJson {
    pub name: String,
    pub dim: usize,
    pub fields: Vec<Vec<TermJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<TermJson>>,
    pub lbar: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GramReport {
    pub lambda_min: f64,
    /// The evaluated brackets `W(x)` entering the Gram matrix.
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    /// Growth vector at each sample point.
    pub growth: Vec<Vec<usize>>,
    /// Bracket depth `r(x)` at which the span is full.
    pub depth: Vec<usize>,
    /// Homogeneous dimension at each sample point.
    pub q: Vec<usize>,
    pub equiregular: bool,
}

/// Numerical rank with tolerance `1e-9` relative to the largest singular value.
pub(crate) fn numerical_rank(vectors: &[Vec<f64>], n: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * top).count()
}

impl VectorFieldSystem {
    pub fn new(
        name: impl Into<String>,
        fields: Vec<PolyVectorField>,
        drift: Option<PolyVectorField>,
        lbar: usize,
    ) -> Result<Self> {
        let n = fields.first().map_or(0, PolyVectorField::dim);
        if fields.is_empty() || n == 0 {
            return Err(Error::Config("a system needs at least one field".into()));
        }
        if fields.iter().chain(drift.iter()).any(|v| v.dim() != n) {
            return Err(Error::Dimension("all fields must live on the same R^N".into()));
        }
        if lbar == 0 {
            return Err(Error::Config("hypoellipticity depth must be at least 1".into()));
        }
        Ok(VectorFieldSystem { name: name.into(), fields, drift, lbar })
    }

    pub fn from_json(j: &SystemJson) -> Result<Self> {
        let fields = j.fields.iter().map(|f| PolyVectorField::from_json(j.dim, f)).collect::<Result<Vec<_>>>()?;
        let drift = j.drift.as_ref().map(|f| PolyVectorField::from_json(j.dim, f)).transpose()?;
        Self::new(j.name.clone(), fields, drift, j.lbar)
    }

    pub fn to_json(&self) -> SystemJson {
        SystemJson {
            name: self.name.clone(),
            dim: self.n(),
            fields: self.fields.iter().map(PolyVectorField::to_json).collect(),
            drift: self.drift.as_ref().map(PolyVectorField::to_json),
            lbar: self.lbar,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension `N`.
    pub fn n(&self) -> usize {
        self.fields[0].dim()
    }

    /// Number of driving fields `d`.
    pub fn d(&self) -> usize {
        self.fields.len()
    }

    pub fn lbar(&self) -> usize {
        self.lbar
    }

    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    pub fn drift(&self) -> Option<&PolyVectorField> {
        self.drift.as_ref()
    }

    /// `V_i`, with letter 0 the drift.
    fn letter(&self, i: usize) -> Result<&PolyVectorField> {
        match i {
            0 => self.drift.as_ref().ok_or_else(|| Error::Domain("letter 0 used without a drift".into())),
            i if i <= self.d() => Ok(&self.fields[i - 1]),
            _ => Err(Error::Domain(format!("letter {i} outside 1..={}", self.d()))),
        }
    }

    /// Right-normed bracket `[V_{i1}, [V_{i2}, …, V_{ir}]]`.
    pub fn bracket_word(&self, word: &[usize]) -> Result<PolyVectorField> {
        let (&last, rest) = word.split_last().ok_or_else(|| Error::Domain("empty word".into()))?;
        let mut acc = self.letter(last)?.clone();
        for &i in rest.iter().rev() {
            acc = self.letter(i)?.bracket(&acc)?;
        }
        Ok(acc)
    }

    /// Words `I` with `|I| ≤ l` and last letter nonzero; letter 0 appears
    /// only when a drift is present.
    pub fn hormander_words(&self, l: usize) -> Vec<Vec<usize>> {
        let first = if self.drift.is_some() { 0 } else { 1 };
        let alphabet: Vec<usize> = (first..=self.d()).collect();
        let mut out = Vec::new();
        let mut layer: Vec<Vec<usize>> = (1..=self.d()).map(|i| vec![i]).collect();
        for _ in 0..l {
            out.extend(layer.iter().cloned());
            layer = layer.iter().flat_map(|w| alphabet.iter().map(move |&a| [vec![a], w.clone()].concat())).collect();
        }
        out
    }

    /// Smallest eigenvalue of `Σ_{W ∈ 𝒲_l(x)} W(x) W(x)ᵀ`.
    pub fn hormander_gram(&self, x: &[f64], l: usize) -> Result<GramReport> {
        self.check_point(x)?;
        let n = self.n();
        let vectors: Vec<Vec<f64>> = self
            .hormander_words(l)
            .iter()
            .map(|w| self.bracket_word(w).map(|v| v.eval(x)))
            .collect::<Result<_>>()?;
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for v in &vectors {
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += v[i] * v[j];
                }
            }
        }
        let lambda_min = gram.symmetric_eigenvalues().min();
        Ok(GramReport { lambda_min, vectors })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!("point of length {} in R^{}", x.len(), self.n())));
        }
        Ok(())
    }

    /// Growth vector, depth and homogeneous dimension at each point, from the
    /// ranks of the driving fields and their brackets up to depth `l̄`.
    pub fn growth_and_q(&self, points: &[Vec<f64>]) -> Result<GrowthReport> {
        let n = self.n();
        let mut by_depth: Vec<Vec<PolyVectorField>> = Vec::new();
        let mut layer: Vec<Vec<usize>> = (1..=self.d()).map(|i| vec![i]).collect();
        for _ in 0..self.lbar {
            by_depth.push(layer.iter().map(|w| self.bracket_word(w)).collect::<Result<_>>()?);
            layer =
                layer.iter().flat_map(|w| (1..=self.d()).map(move |a| [vec![a], w.clone()].concat())).collect();
        }
        let mut report = GrowthReport { growth: Vec::new(), depth: Vec::new(), q: Vec::new(), equiregular: true };
        for x in points {
            self.check_point(x)?;
            let mut span: Vec<Vec<f64>> = Vec::new();
            let mut growth = Vec::new();
            for fields in &by_depth {
                span.extend(fields.iter().map(|v| v.eval(x)));
                let rank = numerical_rank(&span, n);
                growth.push(rank);
                if rank == n {
                    break;
                }
            }
            if *growth.last().unwrap() < n {
                return Err(Error::Hormander { point: x.clone() });
            }
            let q = growth.iter().enumerate().map(|(k, &g)| (k + 1) * (g - if k == 0 { 0 } else { growth[k - 1] })).sum();
            report.depth.push(growth.len());
            report.q.push(q);
            report.growth.push(growth);
        }
        report.equiregular = report.growth.windows(2).all(|w| w[0] == w[1]);
        Ok(report)
    }

    /// `V_(α) = V_{α1}(⋯V_{α(r-1)}(V_{αr}))` as a polynomial vector field.
    pub fn euler_field(&self, word: &[usize]) -> Result<PolyVectorField> {
        let (&last, rest) = word.split_last().ok_or_else(|| Error::Domain("empty word".into()))?;
        let mut acc = self.letter(last)?.clone();
        for &i in rest.iter().rev() {
            acc = self.letter(i)?.apply_to_field(&acc);
        }
        Ok(acc)
    }

    pub fn euler_coefficients(&self, word: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.euler_field(word)?.eval(x))
    }

    /// `F_l(u, x) = Σ_{1≤|α|≤l} V_(α)(x) (exp u)^α` for log-signature
    /// coordinates over the driving letters `1..=d`.
    pub fn taylor_f(&self, u: &LieCoordinates, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let basis = u.basis();
        if basis.dim() != self.d() {
            return Err(Error::Dimension(format!("Lie basis over R^{} for {} fields", basis.dim(), self.d())));
        }
        let g = u.to_tensor().exp()?;
        let mut out = vec![0.0; self.n()];
        for len in 1..=basis.depth() {
            for word in Word::all(self.d(), len).filter(|w| w.len() == len) {
                let c = g.coeff(&word);
                if c == 0.0 {
                    continue;
                }
                let v = self.euler_field(&word.0)?.eval(x);
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += c * vi;
                }
            }
        }
        Ok(out)
    }
}
