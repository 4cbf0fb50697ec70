use lspie_core::{
    decode, dehankelise, encode, fit_ica, fit_pca, generate_signal, hankelise, standardise,
    IcaOptions, SignalKind, StandardiseMode, TimeSeries,
};
use proptest::prelude::*;

fn chirp_matrix(window: usize) -> lspie_core::TrajectoryMatrix {
    let series = generate_signal(SignalKind::DecreasingFreq, 600, 20.0).unwrap();
    standardise(
        &hankelise(&series, window).unwrap(),
        StandardiseMode::Center,
    )
    .unwrap()
}

#[test]
fn full_rank_pca_reconstructs_the_series() {
    let series = generate_signal(SignalKind::DecreasingFreq, 120, 20.0).unwrap();
    let x = standardise(&hankelise(&series, 10).unwrap(), StandardiseMode::Center).unwrap();
    let model = fit_pca(&x, 10).unwrap();
    let back = decode(&model, &encode(&model, &x.data).unwrap(), None, true).unwrap();
    let rebuilt = dehankelise(&back).unwrap();
    for (a, b) in rebuilt.iter().zip(&series.values) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn ica_scores_decode_to_the_projected_data() {
    let x = chirp_matrix(40);
    let model = fit_ica(&x, 6, &IcaOptions::default()).unwrap();
    let scores = encode(&model, &x.data).unwrap();
    assert!((&scores - &model.scores).amax() < 1e-9);
    let projected = decode(&model, &scores, None, false).unwrap();
    let again = encode(&model, &projected).unwrap();
    assert!((&again - &scores).amax() < 1e-8);
}

#[test]
fn fits_are_seed_deterministic() {
    let x = chirp_matrix(30);
    let opts = IcaOptions {
        seed: 17,
        ..IcaOptions::default()
    };
    let a = fit_ica(&x, 4, &opts).unwrap();
    let b = fit_ica(&x, 4, &opts).unwrap();
    assert_eq!(a.loadings, b.loadings);
    assert_eq!(a.id(), b.id());
}

proptest! {
    #[test]
    fn hankel_round_trip_is_exact(values in prop::collection::vec(-1e3..1e3f64, 3..200), frac in 0.0..1.0f64) {
        let window = 2 + ((values.len() - 3) as f64 * frac) as usize;
        let series = TimeSeries::new(values.clone(), 1.0, 0.0).unwrap();
        let h = hankelise(&series, window).unwrap();
        prop_assert_eq!(h.anti_diagonal_spread(), 0.0);
        let back = dehankelise(&h.data).unwrap();
        prop_assert_eq!(back.len(), values.len());
        for (a, b) in back.iter().zip(&values) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
