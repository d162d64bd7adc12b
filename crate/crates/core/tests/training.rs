use fairgate_core::corpus::{stratified_split, Label, SplitCorpus, SplitRatios};
use fairgate_core::models::{model_from_json, model_to_json, ClassifierModel, ModelKind, ModelMetadata};
use fairgate_core::synthetic::{generate, profile};
use fairgate_core::trainer::{evaluate, train, TrainConfig, TrainError};
use fairgate_core::LabeledReview;

fn synthetic_split(market: &str, n: usize, seed: u64) -> SplitCorpus {
    let reviews = generate(profile(market).unwrap(), n, 0.5, seed);
    stratified_split(&reviews, SplitRatios::default(), seed).unwrap()
}

fn quick(kind: ModelKind) -> TrainConfig {
    TrainConfig { max_epochs: 12, d_emb: 8, d_hid: 8, ..TrainConfig::for_kind(kind) }
}

#[test]
fn identical_inputs_train_identical_models() {
    let split = synthetic_split("grubhub", 200, 3);
    for kind in ModelKind::ALL {
        let config = TrainConfig { max_epochs: 4, ..quick(kind) };
        let a = train::<f64>(&split, &config).unwrap();
        let b = train::<f64>(&split, &config).unwrap();
        assert_eq!(a.model, b.model, "{kind}");
        assert_eq!(a.history, b.history, "{kind}");
        let c = train::<f64>(&split, &TrainConfig { seed: 7, ..config }).unwrap();
        assert_ne!(a.model, c.model, "{kind}: seed should change the run");
    }
}

#[test]
fn linear_train_loss_does_not_increase_early() {
    let split = synthetic_split("uber", 600, 5);
    for kind in ModelKind::ALL.into_iter().filter(|k| k.is_linear()) {
        let out = train::<f64>(&split, &quick(kind)).unwrap();
        let losses: Vec<f64> = out.history.epochs.iter().take(5).map(|r| r.train_loss).collect();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{kind}: {losses:?}");
    }
}

#[test]
fn restored_weights_reproduce_best_validation_loss() {
    let split = synthetic_split("upwork", 200, 9);
    for kind in ModelKind::ALL {
        // a large step size overshoots and triggers early stopping quickly
        let config = TrainConfig { learning_rate: 0.5, patience: 2, max_epochs: 40, ..quick(kind) };
        let out = train::<f64>(&split, &config).unwrap();
        let h = &out.history;
        assert!(h.stopped_epoch - h.best_epoch <= config.patience, "{kind}: {h:?}");
        assert_eq!(h.epochs.len(), h.stopped_epoch);
        let min = h.epochs.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(h.best().val_loss, min);
        let again = evaluate(&out.model, &split.validation, config.threshold).unwrap();
        assert_eq!(again.loss, h.best().val_loss, "{kind}");
    }
}

#[test]
fn trained_models_survive_serialization() {
    let split = synthetic_split("uber", 150, 1);
    for kind in ModelKind::ALL {
        let out = train::<f64>(&split, &TrainConfig { max_epochs: 3, ..quick(kind) }).unwrap();
        let meta = ModelMetadata::new(kind, "uber", serde_json::to_value(quick(kind)).unwrap());
        let json = model_to_json(&out.model, &meta).unwrap();
        let (back, meta_back): (ClassifierModel<f64>, _) = model_from_json(&json).unwrap();
        assert_eq!(back, out.model);
        assert_eq!(meta_back, meta);
        for r in &split.test {
            let a = out.model.predict_text(&r.text).unwrap().p_unfair;
            let b = back.predict_text(&r.text).unwrap().p_unfair;
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn single_precision_training_runs() {
    let split = synthetic_split("grubhub", 200, 2);
    let out = train::<f32>(&split, &quick(ModelKind::WordLr)).unwrap();
    assert!(out.history.best().val_acc > 0.5);
}

#[test]
fn training_preconditions() {
    let split = synthetic_split("uber", 60, 4);
    let only_fair = SplitCorpus {
        train: split.train.iter().filter(|r| r.label == Some(Label::Fair)).cloned().collect(),
        ..split.clone()
    };
    assert!(matches!(train::<f64>(&only_fair, &quick(ModelKind::WordLr)), Err(TrainError::SingleClass(Label::Fair))));

    let no_val = SplitCorpus { validation: vec![], ..split.clone() };
    assert!(matches!(train::<f64>(&no_val, &quick(ModelKind::CharLr)), Err(TrainError::EmptyPartition(_))));

    let mut unlabeled = split.clone();
    unlabeled.train.push(LabeledReview {
        id: "x".into(),
        market: "uber".into(),
        text: "t".into(),
        coders: vec![Label::Fair, Label::Unfair],
        label: None,
    });
    assert!(matches!(train::<f64>(&unlabeled, &quick(ModelKind::WordLr)), Err(TrainError::Unlabeled(_))));
}
