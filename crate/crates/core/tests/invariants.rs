use heatgrade::qp::QpSettings;
use heatgrade::scenarios;
use heatgrade::surplus::{analyse, SIGN_TOLERANCE};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_survives_load_scaling(scale in 0.5f64..1.1, shift in -2.0f64..2.0) {
        let mut case = scenarios::fournode();
        for row in &mut case.loads {
            for d in row.iter_mut() {
                *d *= scale;
            }
        }
        for row in &mut case.ambient {
            for a in row.iter_mut() {
                *a += shift;
            }
        }
        let a = analyse(&case, &QpSettings::default()).unwrap();
        for p in &a.report.periods {
            prop_assert!(p.residual.abs() < 1e-5);
            prop_assert!(p.cr >= -SIGN_TOLERANCE);
            prop_assert!(p.il >= -SIGN_TOLERANCE);
            prop_assert!(p.iu <= SIGN_TOLERANCE);
        }
        prop_assert!(a.report.total.residual.abs() < 1e-5);
        prop_assert!(a.report.total.surplus >= -1e-6);
    }

    #[test]
    fn energy_rule_never_beats_double_rule(scale in 0.5f64..1.0) {
        let mut case = scenarios::toy();
        for row in &mut case.loads {
            for d in row.iter_mut() {
                *d *= scale;
            }
        }
        let a = analyse(&case, &QpSettings::default()).unwrap();
        prop_assert!(a.energy.total() <= a.double.total() + 1e-9);
    }
}
