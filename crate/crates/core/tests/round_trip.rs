use heatgrade::case::convert_units;
use heatgrade::case_file::{parse_case, to_json};
use heatgrade::network::assemble_system;
use heatgrade::scenarios;
use heatgrade::units::TemperatureUnit;

#[test]
fn written_cases_rebuild_identical_matrices() {
    for case in scenarios::all() {
        let again = parse_case(&to_json(&case).unwrap()).unwrap();
        let a = assemble_system(&case.network, case.interval_s).unwrap();
        let b = assemble_system(&again.network, again.interval_s).unwrap();
        assert_eq!(a.c1, b.c1, "{}", case.name);
        assert_eq!(a.c2, b.c2, "{}", case.name);
        assert_eq!(a.ambient_coeff, b.ambient_coeff, "{}", case.name);
        assert_eq!(case.loads, again.loads);
        assert_eq!(case.ambient, again.ambient);
    }
}

#[test]
fn kelvin_file_reads_back_close() {
    let case = scenarios::fournode();
    let text = to_json(&convert_units(&case, TemperatureUnit::Kelvin)).unwrap();
    let again = convert_units(&parse_case(&text).unwrap(), TemperatureUnit::Celsius);
    for (x, y) in case.requirements.iter().zip(&again.requirements) {
        for (a, b) in x.lower.iter().zip(&y.lower) {
            assert!((a - b).abs() < 1e-9);
        }
    }
    let a = assemble_system(&case.network, case.interval_s).unwrap();
    let b = assemble_system(&again.network, again.interval_s).unwrap();
    assert!((a.c1 - b.c1).amax() < 1e-9);
}
