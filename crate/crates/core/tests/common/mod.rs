#![allow(dead_code)]

use nalgebra::DMatrix;
use ssm_core::experiments::SegmentSpec;
use ssm_core::{
    assemble, generate_dataset, AssemblyOptions, CollocationSystem, ConsecutiveFirstOrder, RateConstants, Segment,
    SolveMode,
};

pub const K: RateConstants = RateConstants::REFERENCE;

pub fn segment(spec: &SegmentSpec, rounding: Option<u32>) -> Segment {
    let d = generate_dataset(&K, &spec.times(), rounding).unwrap();
    Segment::from_dataset(&d, spec.default_degree()).unwrap()
}

pub fn reference_system<'m>(mech: &'m ConsecutiveFirstOrder, spec: &SegmentSpec) -> CollocationSystem<'m> {
    assemble(
        &segment(spec, Some(4)),
        mech,
        &AssemblyOptions::new(spec.default_mode()),
    )
    .unwrap()
}

pub fn reference_specs() -> [SegmentSpec; 3] {
    [SegmentSpec::Ss1ThreePoint, SegmentSpec::Ss1, SegmentSpec::Ss2]
}

/// Central-difference Jacobian, independent of the analytic one.
pub fn finite_difference_jacobian(sys: &CollocationSystem<'_>, u: &[f64], h: f64) -> DMatrix<f64> {
    let n = u.len();
    let m = sys.n_equations();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = u.to_vec();
    for j in 0..n {
        probe[j] = u[j] + h;
        let plus = sys.residuals(&probe);
        probe[j] = u[j] - h;
        let minus = sys.residuals(&probe);
        probe[j] = u[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

pub fn mode_of(spec: &SegmentSpec) -> SolveMode {
    spec.default_mode()
}
