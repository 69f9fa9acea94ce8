//! Fixtures shared by the benchmarks.

use ddae_core::{create_plant, DelayedTerms, PlantIo};
use nalgebra::{dmatrix, DMatrix};

/// Third-order plant with a delay of 5 on the input. With `feedthrough` the
/// output also sees the input delayed by 2.5 and 5.
pub fn example_plant(feedthrough: bool) -> PlantIo {
    let a = dmatrix![-0.08, -0.03, 0.2; 0.2, -0.04, -0.005; -0.06, 0.2, -0.07];
    let b = dmatrix![-0.1; -0.2; 0.1];
    let d = feedthrough.then(|| {
        DelayedTerms::new(vec![dmatrix![3.0; 4.0; 1.0], dmatrix![0.4; -0.4; -0.4]], vec![2.5, 5.0])
            .expect("matching delays")
    });
    create_plant(
        DelayedTerms::single(a, 0.0),
        DelayedTerms::single(b, 5.0),
        DelayedTerms::single(DMatrix::identity(3, 3), 0.0),
        d,
        None,
    )
    .expect("consistent plant")
}

pub const MAX_GAIN: [f64; 3] = [0.04088300084775419, 0.06118754573433699, 0.38369915502326607];
