mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use switchgame::model::{load_spec, validate_spec, ModelError, Violation};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn document_round_trips(seed in any::<u64>()) {
        let spec = common::random_spec(seed, 4, 20).into_inner();
        let back = load_spec(&spec.to_document()).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert!(validate_spec(back).is_ok());
    }

    #[test]
    fn asymmetric_weight_is_rejected(seed in any::<u64>(), skew in 1e-6f64..1.0) {
        let mut spec = common::random_spec(seed, 4, 5).into_inner();
        if spec.n < 2 {
            spec.n = 2;
            spec.a = DMatrix::identity(2, 2);
            spec.b1 = DMatrix::zeros(2, spec.m);
            spec.b2 = DMatrix::zeros(2, spec.m);
            for m in [&mut spec.s, &mut spec.sigma0, &mut spec.q1, &mut spec.q2] {
                *m = DMatrix::identity(2, 2);
            }
        }
        spec.q1[(0, 1)] += skew;
        let err = validate_spec(spec).unwrap_err();
        let violations = err.violations();
        prop_assert!(violations.iter().any(|v| matches!(v, Violation::NotSymmetric("Q1"))));
    }
}

#[test]
fn every_problem_is_reported() {
    let mut spec = common::paper().into_inner();
    spec.lambda1 = 0.0;
    spec.lambda2 = -1.0;
    spec.q11 = DMatrix::zeros(2, 2);
    let err = validate_spec(spec).unwrap_err();
    assert!(matches!(err, ModelError::Invalid(_)));
    assert_eq!(err.violations().len(), 3, "{err}");
}
