use super::SampledPath;

/// A finite set of unit directions covering the sphere up to sign: the single
/// direction for `d = 1`, `size` equally spaced angles in `[0, π)` for
/// `d = 2`, and a Fibonacci lattice on the upper hemisphere otherwise.
pub fn unit_net(dim: usize, size: usize) -> Vec<Vec<f64>> {
    let size = size.max(1);
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0]],
        2 => (0..size)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / size as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..size)
                .map(|k| {
                    // z in (0, 1]: upper hemisphere
                    let z = 1.0 - k as f64 / size as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    let mut v = vec![0.0; dim];
                    v[0] = r * a.cos();
                    v[1] = r * a.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Discrete θ-Hölder roughness: the minimum over base indices `s`, scales
/// `ε` and directions `φ` of `max |⟨φ, X_t − X_s⟩| / ε^θ` over grid times
/// with `ε/2 < |t − s| < ε`. Returns `+∞` when no admissible `t` exists.
pub fn holder_roughness(path: &SampledPath, theta: f64, s_indices: &[usize], eps_ladder: &[f64], net: &[Vec<f64>]) -> f64 {
    let projections: Vec<Vec<f64>> = net.iter().map(|phi| path.project(phi)).collect();
    let times = path.times();
    let mut best = f64::INFINITY;
    for &si in s_indices {
        let s = times[si];
        for &eps in eps_ladder {
            let admissible: Vec<usize> = (0..path.len())
                .filter(|&i| {
                    let gap = (times[i] - s).abs();
                    gap > eps / 2.0 && gap < eps
                })
                .collect();
            if admissible.is_empty() {
                continue;
            }
            let scale = eps.powf(theta);
            for proj in &projections {
                let sup = admissible.iter().map(|&i| (proj[i] - proj[si]).abs()).fold(0.0, f64::max);
                best = best.min(sup / scale);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{FbmMethod, FbmSampler, FbmSpec};

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    fn ladder() -> Vec<f64> {
        (1..=5).map(|k| 0.5f64.powi(k)).collect()
    }

    #[test]
    fn nets_are_unit() {
        for d in 1..=4 {
            for v in unit_net(d, 12) {
                assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn straight_line_has_zero_roughness() {
        let p = SampledPath::linear(grid(256), &[0.0, 0.0], &[1.0, 1.0]);
        let s: Vec<usize> = (0..=256).step_by(16).collect();
        assert!(holder_roughness(&p, 0.5, &s, &ladder(), &unit_net(2, 8)) < 1e-12);
    }

    #[test]
    fn scales_linearly() {
        let spec = FbmSpec::uniform(0.5, 1.0, 256, 2).unwrap();
        let p = FbmSampler::new(spec, FbmMethod::Circulant).unwrap().sample_indexed(3, 0);
        let s: Vec<usize> = (0..=256).step_by(32).collect();
        let net = unit_net(2, 16);
        let a = holder_roughness(&p, 0.55, &s, &ladder(), &net);
        let b = holder_roughness(&p.scaled(3.0), 0.55, &s, &ladder(), &net);
        assert!((b - 3.0 * a).abs() < 1e-12 * b.max(1.0));
    }

    #[test]
    fn empty_annulus_is_infinite() {
        let p = SampledPath::linear(vec![0.0, 1.0], &[0.0], &[1.0]);
        assert!(holder_roughness(&p, 0.5, &[0], &[0.1], &unit_net(1, 1)).is_infinite());
    }
}
