use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse multivariate polynomial in `n` variables: exponent vector → coefficient.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Poly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::monomial(c, vec![0; n])
    }

    /// The coordinate function `x_i` (0-based).
    pub fn variable(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Self::monomial(1.0, e)
    }

    pub fn monomial(c: f64, exponents: Vec<u32>) -> Self {
        let mut p = Poly::zero(exponents.len());
        if c != 0.0 {
            p.terms.insert(exponents, c);
        }
        p
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut p = Poly::zero(n);
        for (e, c) in terms {
            if e.len() != n {
                return Err(Error::Dimension(format!("monomial with {} exponents in {n} variables", e.len())));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| if k == 0 { 1.0 } else { xi.powi(k as i32) }).product::<f64>())
            .sum()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        if s == 0.0 {
            return Poly::zero(self.n);
        }
        Poly { n: self.n, terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                out.add_term(ea.iter().zip(eb).map(|(a, b)| a + b).collect(), ca * cb);
            }
        }
        out
    }

    /// `∂p/∂x_i` (0-based).
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.add_term(f, c * e[i] as f64);
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let vars: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{k}", i + 1) })
                    .collect();
                if vars.is_empty() {
                    format!("{c}")
                } else if *c == 1.0 {
                    vars.join("*")
                } else {
                    format!("{c}*{}", vars.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// One term of a field in the JSON format: `coef · x^powers ∂_component`
/// with a 1-based component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub component: usize,
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Polynomial vector field `Σ_k V^k ∂_k` on `R^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVectorField {
    comps: Vec<Poly>,
}

impl PolyVectorField {
    pub fn new(comps: Vec<Poly>) -> Result<Self> {
        let n = comps.len();
        if n == 0 || comps.iter().any(|p| p.nvars() != n) {
            return Err(Error::Dimension("every component must be a polynomial in N variables".into()));
        }
        Ok(PolyVectorField { comps })
    }

    pub fn zero(n: usize) -> Self {
        PolyVectorField { comps: vec![Poly::zero(n); n] }
    }

    /// The coordinate field `∂_i` (0-based).
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut v = Self::zero(n);
        v.comps[i] = Poly::constant(n, 1.0);
        v
    }

    pub fn from_json(n: usize, terms: &[TermJson]) -> Result<Self> {
        let mut v = Self::zero(n);
        for t in terms {
            if t.component == 0 || t.component > n || t.powers.len() != n {
                return Err(Error::Config(format!("bad term {t:?} for dimension {n}")));
            }
            v.comps[t.component - 1] = v.comps[t.component - 1].add(&Poly::monomial(t.coef, t.powers.clone()));
        }
        Ok(v)
    }

    pub fn to_json(&self) -> Vec<TermJson> {
        self.comps
            .iter()
            .enumerate()
            .flat_map(|(k, p)| p.terms().map(move |(e, c)| TermJson { component: k + 1, coef: c, powers: e.clone() }))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Poly] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Poly::is_zero)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|p| p.eval(x)).collect()
    }

    /// The derivation `f ↦ Σ_k V^k ∂_k f`.
    pub fn apply(&self, f: &Poly) -> Poly {
        self.comps.iter().enumerate().fold(Poly::zero(self.dim()), |acc, (k, vk)| acc.add(&vk.mul(&f.derivative(k))))
    }

    /// Componentwise derivation, `(DW) V` for `W = other`.
    pub fn apply_to_field(&self, other: &PolyVectorField) -> PolyVectorField {
        PolyVectorField { comps: other.comps.iter().map(|p| self.apply(p)).collect() }
    }

    /// `[V, W] = (DW)V − (DV)W`, the commutator of the derivations.
    pub fn bracket(&self, other: &PolyVectorField) -> Result<PolyVectorField> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!("bracket of fields on R^{} and R^{}", self.dim(), other.dim())));
        }
        let a = self.apply_to_field(other);
        let b = other.apply_to_field(self);
        Ok(PolyVectorField { comps: a.comps.iter().zip(&b.comps).map(|(x, y)| x.sub(y)).collect() })
    }

    /// Jacobian `∂_j V^k` as polynomials, row `k`.
    pub fn jacobian(&self) -> Vec<Vec<Poly>> {
        self.comps.iter().map(|p| (0..self.dim()).map(|j| p.derivative(j)).collect()).collect()
    }

    pub fn scale(&self, s: f64) -> PolyVectorField {
        PolyVectorField { comps: self.comps.iter().map(|p| p.scale(s)).collect() }
    }

    pub fn add(&self, other: &PolyVectorField) -> PolyVectorField {
        PolyVectorField { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect() }
    }
}

impl fmt::Display for PolyVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .comps
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(k, p)| format!("({p})∂{}", k + 1))
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// A vector of polynomials flattened for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledField {
    n: usize,
    /// (output component, coefficient, range into `factors`)
    terms: Vec<(usize, f64, usize, usize)>,
    /// (variable, power) pairs with nonzero power
    factors: Vec<(usize, i32)>,
}

impl CompiledField {
    pub fn new(field: &PolyVectorField) -> Self {
        let n = field.dim();
        let mut terms = Vec::new();
        let mut factors = Vec::new();
        for (k, p) in field.components().iter().enumerate() {
            for (e, c) in p.terms() {
                let start = factors.len();
                factors.extend(e.iter().enumerate().filter(|(_, &q)| q > 0).map(|(i, &q)| (i, q as i32)));
                terms.push((k, c, start, factors.len()));
            }
        }
        CompiledField { n, terms, factors }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `out += scale · V(x)`.
    #[inline]
    pub fn add_eval(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for &(k, c, a, b) in &self.terms {
            let mut m = c * scale;
            for &(i, q) in &self.factors[a..b] {
                m *= if q == 1 { x[i] } else { x[i].powi(q) };
            }
            out[k] += m;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.add_eval(x, 1.0, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn heis() -> (PolyVectorField, PolyVectorField) {
        let v1 = PolyVectorField::coordinate(3, 0);
        let v2 = PolyVectorField::coordinate(3, 1).add(&PolyVectorField::new(vec![
            Poly::zero(3),
            Poly::zero(3),
            Poly::variable(3, 0),
        ])
        .unwrap());
        (v1, v2)
    }

    #[test]
    fn textbook_brackets() {
        let d1 = PolyVectorField::coordinate(2, 0);
        let w = PolyVectorField::new(vec![Poly::zero(2), Poly::variable(2, 0)]).unwrap();
        assert_eq!(d1.bracket(&w).unwrap(), PolyVectorField::coordinate(2, 1));
        let (v1, v2) = heis();
        assert_eq!(v1.bracket(&v2).unwrap(), PolyVectorField::coordinate(3, 2));
        assert!(v1.bracket(&PolyVectorField::coordinate(2, 0)).is_err());
    }

    #[test]
    fn poly_arithmetic() {
        let x = Poly::variable(2, 0);
        let y = Poly::variable(2, 1);
        let p = x.mul(&x).mul(&y).scale(3.0).add(&y);
        assert_eq!(p.eval(&[2.0, 5.0]), 65.0);
        assert_eq!(p.derivative(0).eval(&[2.0, 5.0]), 60.0);
        assert!(p.sub(&p).is_zero());
        assert_eq!(p.degree(), 3);
        assert_eq!(format!("{}", Poly::variable(2, 0).mul(&Poly::variable(2, 0))), "x1^2");
    }

    #[test]
    fn json_roundtrip_and_compiled_eval() {
        let (_, v2) = heis();
        let back = PolyVectorField::from_json(3, &v2.to_json()).unwrap();
        assert_eq!(back, v2);
        let c = CompiledField::new(&v2);
        assert_eq!(c.eval(&[2.0, 0.0, 0.0]), v2.eval(&[2.0, 0.0, 0.0]));
        assert_eq!(format!("{v2}"), "(1)∂2 + (x1)∂3");
    }

    fn arb_poly(n: usize) -> impl Strategy<Value = Poly> {
        proptest::collection::vec((proptest::collection::vec(0u32..3, n), -3i32..4), 0..4)
            .prop_map(move |ts| Poly::from_terms(n, ts.into_iter().map(|(e, c)| (e, c as f64))).unwrap())
    }

    fn arb_field(n: usize) -> impl Strategy<Value = PolyVectorField> {
        proptest::collection::vec(arb_poly(n), n).prop_map(|c| PolyVectorField::new(c).unwrap())
    }

    proptest! {
        #[test]
        fn antisymmetry(v in arb_field(3), w in arb_field(3)) {
            prop_assert_eq!(v.bracket(&w).unwrap(), w.bracket(&v).unwrap().scale(-1.0));
        }

        #[test]
        fn jacobi(u in arb_field(2), v in arb_field(2), w in arb_field(2)) {
            let a = u.bracket(&v.bracket(&w).unwrap()).unwrap();
            let b = v.bracket(&w.bracket(&u).unwrap()).unwrap();
            let c = w.bracket(&u.bracket(&v).unwrap()).unwrap();
            prop_assert!(a.add(&b).add(&c).is_zero());
        }
    }
}
