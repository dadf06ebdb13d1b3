//! Shared fixtures for the criterion benches.

use ssm_core::experiments::SegmentSpec;
use ssm_core::{generate_dataset, RateConstants, Segment};

/// Four-decimal reference data for a built-in segment at its default degree.
pub fn reference_segment(spec: &SegmentSpec) -> Segment {
    let data = generate_dataset(&RateConstants::REFERENCE, &spec.times(), Some(4)).expect("reference rates are valid");
    Segment::from_dataset(&data, spec.default_degree()).expect("reference segment is valid")
}
