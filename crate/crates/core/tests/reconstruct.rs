use qoct_core::reconstruct::{approximate_physical, predict_amplitudes, FeatureModel};

// fitted feature amplitudes of a two-interface gap and the published
// least-squares approximation of them (cps)
const MEASURED: [f64; 5] = [196.0, 237.0, 50.0, -38.0, 20.0];
const APPROXIMATED: [f64; 5] = [196.0, 237.0, 50.0, -40.0, 17.0];

#[test]
fn measured_gap_amplitudes_approximated_within_rounding() {
    let fit = approximate_physical(&MEASURED).unwrap();
    for j in 0..5 {
        assert!(
            (fit.predicted[j] - APPROXIMATED[j]).abs() <= 1.0,
            "feature {}: predicted {:.2}, published {}",
            j + 1,
            fit.predicted[j],
            APPROXIMATED[j]
        );
    }
    // the published values are a least-squares optimum rounded to whole cps,
    // which moves their residual by at most 0.5 per feature
    let published: f64 = MEASURED
        .iter()
        .zip(&APPROXIMATED)
        .map(|(m, a)| (m - a).powi(2))
        .sum::<f64>()
        .sqrt();
    let rounding = 0.5 * 5f64.sqrt();
    assert!(
        fit.residual_norm <= published + rounding,
        "residual {} vs published {published}",
        fit.residual_norm
    );
}

#[test]
fn approximation_is_a_physical_model() {
    let fit = approximate_physical(&MEASURED).unwrap();
    let m = fit.model;
    assert!(m.validate().is_ok());
    assert!(m.a > 0.0 && (0.0..=1.0).contains(&m.r1) && (0.0..=1.0).contains(&m.r2));
    assert!((m.t1 * m.t1 + m.r1 * m.r1 - 1.0).abs() < 1e-12);
    let again = predict_amplitudes(&m);
    for (a, b) in again.iter().zip(&fit.predicted) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn exact_amplitudes_recovered_from_known_interfaces() {
    let truth = FeatureModel::lossless(1000.0, 0.4, 0.7, 2.0, 0.9).unwrap();
    let target = predict_amplitudes(&truth);
    let fit = approximate_physical(&target).unwrap();
    assert!(fit.residual_norm < 1e-6 * target[0]);
}
