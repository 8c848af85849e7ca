use serde::Serialize;

use super::poly::{Poly, PolyVectorField};
use super::system::VectorFieldSystem;
use crate::error::{Error, Result};

/// Expected structure of a built-in system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemMeta {
    pub name: &'static str,
    pub description: &'static str,
    pub growth: Vec<usize>,
    pub q: usize,
    pub equiregular: bool,
}

const NAMES: [&str; 5] = ["elliptic1", "elliptic2", "heisenberg", "engel", "grushin"];

pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

fn field(n: usize, comps: Vec<(usize, Poly)>) -> PolyVectorField {
    let mut c = vec![Poly::zero(n); n];
    for (k, p) in comps {
        c[k] = p;
    }
    PolyVectorField::new(c).expect("consistent dimension")
}

pub fn builtin(name: &str) -> Result<VectorFieldSystem> {
    let one = |n| Poly::constant(n, 1.0);
    let x = |n, i| Poly::variable(n, i);
    match name {
        "elliptic1" => VectorFieldSystem::new(name, vec![field(1, vec![(0, one(1))])], None, 1),
        "elliptic2" => VectorFieldSystem::new(
            name,
            vec![field(2, vec![(0, one(2))]), field(2, vec![(1, one(2))])],
            None,
            1,
        ),
        "heisenberg" => VectorFieldSystem::new(
            name,
            vec![field(3, vec![(0, one(3))]), field(3, vec![(1, one(3)), (2, x(3, 0))])],
            None,
            2,
        ),
        "engel" => VectorFieldSystem::new(
            name,
            vec![field(4, vec![(0, one(4))]), field(4, vec![(1, one(4)), (2, x(4, 0)), (3, x(4, 2))])],
            None,
            3,
        ),
        "grushin" => VectorFieldSystem::new(
            name,
            vec![field(2, vec![(0, one(2))]), field(2, vec![(1, x(2, 0))])],
            None,
            2,
        ),
        _ => Err(Error::Config(format!("unknown system '{name}'; built-ins: {}", NAMES.join(", ")))),
    }
}

impl SystemMeta {
    pub fn of(name: &str) -> Result<Self> {
        let (description, growth, q, equiregular) = match name {
            "elliptic1" => ("∂1 on R^1", vec![1], 1, true),
            "elliptic2" => ("∂1, ∂2 on R^2", vec![2], 2, true),
            "heisenberg" => ("∂1, ∂2 + x1∂3 on R^3", vec![2, 3], 4, true),
            "engel" => ("∂1, ∂2 + x1∂3 + x3∂4 on R^4", vec![2, 3, 4], 7, true),
            "grushin" => ("∂1, x1∂2 on R^2 (degenerate on x1 = 0)", vec![2], 2, false),
            _ => return Err(Error::Config(format!("unknown system '{name}'"))),
        };
        let name = NAMES.iter().find(|n| **n == name).expect("listed");
        Ok(SystemMeta { name, description, growth, q, equiregular })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_consistent_with_fields() {
        for name in builtin_names() {
            let s = builtin(name).unwrap();
            let meta = SystemMeta::of(name).unwrap();
            let x = vec![0.37; s.n()];
            let r = s.growth_and_q(&[x]).unwrap();
            assert_eq!(r.growth[0], meta.growth, "{name}");
            assert_eq!(r.q[0], meta.q);
        }
        assert!(builtin("nope").is_err());
    }
}
