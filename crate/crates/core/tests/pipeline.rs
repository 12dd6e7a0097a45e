use crvar_core::eval::{grid_search, stratified_folds};
use crvar_core::features::{assemble, extract_patient, ExtractConfig, ImputationTable};
use crvar_core::forest::{fit_forest, ClinicalRule};
use crvar_core::signals::{
    load_recording, read_clinical, read_epochs, synth_cohort, write_clinical, write_epochs, write_signal_csv, ChannelKind,
};
use crvar_core::{FeatureMatrix, ForestKind, ForestModel, Hyperparameters, Outcome};

#[test]
fn files_round_trip_through_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let (recs, clinical) = synth_cohort(4, 0.25, 1.0, 21).unwrap();
    for r in &recs {
        write_signal_csv(dir.path().join(format!("{}.csv", r.patient_id())), r).unwrap();
    }
    write_epochs(dir.path().join("epochs.csv"), recs.iter().map(|r| (r.patient_id(), r.epochs()))).unwrap();
    write_clinical(dir.path().join("clinical.csv"), &clinical).unwrap();

    let epochs = read_epochs(dir.path().join("epochs.csv")).unwrap();
    let clinical_back = read_clinical(dir.path().join("clinical.csv")).unwrap();
    assert_eq!(clinical_back, clinical);
    let cfg = ExtractConfig::default();
    for (r, c) in recs.iter().zip(&clinical) {
        let loaded = load_recording(dir.path().join(format!("{}.csv", r.patient_id())), &epochs[r.patient_id()]).unwrap();
        for kind in ChannelKind::ALL {
            let (a, b) = (&r.channel(kind).samples, &loaded.channel(kind).samples);
            assert_eq!(a.len(), b.len());
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 5e-7), "{kind}");
        }
        let direct = extract_patient(r, c, &cfg).unwrap();
        let via_file = extract_patient(&loaded, c, &cfg).unwrap();
        assert_eq!(direct.features.len(), via_file.features.len());
        // Pattern counts are integers and survive six-decimal rounding.
        let first_pattern = direct.features.len() - 32;
        for (x, y) in direct.features.iter().zip(&via_file.features).skip(first_pattern).step_by(5) {
            assert_eq!(x, y);
        }
    }
}

#[test]
fn trained_model_round_trips_through_files() {
    let (recs, clinical) = synth_cohort(12, 0.25, 1.0, 22).unwrap();
    let m = assemble(&recs, &clinical, &ExtractConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("features.csv");
    m.write_csv(&csv).unwrap();
    let back = FeatureMatrix::read_csv(&csv).unwrap();
    assert_eq!(back, m);

    let grid: Vec<Hyperparameters> = [10, 20]
        .into_iter()
        .map(|n_trees| Hyperparameters {
            n_trees,
            ..Hyperparameters::default()
        })
        .collect();
    let plan = stratified_folds(&back.outcomes, 3, 4).unwrap();
    let outcome = grid_search(&back, ForestKind::Cdbrf, &grid, &plan, ClinicalRule::default()).unwrap();
    assert_eq!(outcome.report.grid.len(), 2);
    assert_eq!(outcome.report.n_rows, 12);

    let path = dir.path().join("model.json");
    outcome.model.save(&path).unwrap();
    let loaded = ForestModel::load(&path).unwrap();
    assert_eq!(loaded.predict_matrix(&back).unwrap(), outcome.model.predict_matrix(&back).unwrap());
    assert_eq!(loaded.cv.map(|c| (c.k, c.seed)), Some((3, 4)));
}

#[test]
fn model_imputation_table_is_fitted_on_its_training_rows() {
    let (recs, clinical) = synth_cohort(10, 0.3, 1.0, 23).unwrap();
    let mut m = assemble(&recs, &clinical, &ExtractConfig::default()).unwrap();
    m.values[0][0] = None;
    m.values[1][0] = None;
    let model = fit_forest(&m, &Hyperparameters::default(), ForestKind::Brf, ClinicalRule::default()).unwrap();
    let all: Vec<usize> = (0..m.n_rows()).collect();
    assert_eq!(model.imputation_table, ImputationTable::fit(&m, &all).unwrap());

    // Prediction never sees the outcome column.
    let mut hidden = m.clone();
    hidden.outcomes = vec![Outcome::Unknown; m.n_rows()];
    assert_eq!(model.predict_matrix(&hidden).unwrap(), model.predict_matrix(&m).unwrap());
}
