//! Cross-module checks through the public API: a driver path, its
//! signature, the RDE it drives and the control distance it realizes.

use subrough::distance::{control_distance, DistanceQuery};
use subrough::fields::builtin;
use subrough::gaussian::{FbmMethod, FbmSampler, FbmSpec, SampledPath};
use subrough::lie::LyndonBasis;
use subrough::rde::{solve_rde, SolveConfig};
use subrough::signatures::{log_signature, signature};

/// Counterclockwise unit square in the plane, one side per unit of time.
fn square() -> SampledPath {
    let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
    SampledPath::from_points(vec![0.0, 1.0, 2.0, 3.0, 4.0], &pts.map(|p| p.to_vec())).unwrap()
}

#[test]
fn square_loop_area_signature_and_heisenberg_lift_agree() {
    let path = square();
    let basis = LyndonBasis::new(2, 2).unwrap();
    let log = log_signature(&path, &basis, 0.0, 4.0).unwrap();
    let k = basis.index_of(&[1, 2]).unwrap();
    // A closed loop has zero increment and log-signature area equal to the
    // enclosed signed area.
    assert!(log.coords.coeffs()[0].abs() < 1e-12 && log.coords.coeffs()[1].abs() < 1e-12);
    assert!((log.coords.coeffs()[k] - 1.0).abs() < 1e-12, "{:?}", log.coords.coeffs());

    // X1 = d/da, X2 = d/db + a d/dc lifts the loop to c(T) = ∫ a db = 1.
    let heis = builtin("heisenberg").unwrap();
    let sol = solve_rde(&heis, &path, &SolveConfig::new(2, vec![0.0; 3])).unwrap();
    let e = &sol.endpoint;
    assert!(e[0].abs() < 1e-10 && e[1].abs() < 1e-10 && (e[2] - 1.0).abs() < 1e-10, "{e:?}");

    // The loop is an admissible control of length 4, so it bounds the
    // distance from above; the vertical geodesic gives exactly 2 sqrt(pi).
    let d = control_distance(&heis, &DistanceQuery::new(vec![0.0; 3], e.clone())).unwrap();
    assert!(d.value <= 4.0);
    assert!((d.value - 2.0 * std::f64::consts::PI.sqrt()).abs() < 0.02, "{}", d.value);
}

#[test]
fn chen_identity_on_sampled_fbm() {
    let sampler = FbmSampler::new(FbmSpec::uniform(0.6, 1.0, 64, 2).unwrap(), FbmMethod::Circulant).unwrap();
    let path = sampler.sample_indexed(9, 0);
    let whole = signature(&path, 3, 0.0, 1.0).unwrap();
    let split = signature(&path, 3, 0.0, 0.5).unwrap().mul(&signature(&path, 3, 0.5, 1.0).unwrap()).unwrap();
    assert!(whole.max_abs_diff(&split) < 1e-12);
}

#[test]
fn elliptic_solution_is_the_driver_translated() {
    let sampler = FbmSampler::new(FbmSpec::uniform(0.3, 1.0, 128, 2).unwrap(), FbmMethod::Circulant).unwrap();
    let path = sampler.sample_indexed(4, 1);
    let sys = builtin("elliptic2").unwrap();
    let sol = solve_rde(&sys, &path, &SolveConfig::new(1, vec![1.0, -2.0])).unwrap();
    for i in 0..path.len() {
        let (y, x) = (sol.path.point(i), path.point(i));
        assert!((y[0] - 1.0 - x[0]).abs() < 1e-12 && (y[1] + 2.0 - x[1]).abs() < 1e-12);
    }
}
