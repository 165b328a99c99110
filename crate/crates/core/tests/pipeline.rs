use ae1svm_core::attribution::{end_to_end_grad, end_to_end_grad_by_jacobians};
use ae1svm_core::data::{gen_illustrative_4d, split, Label};
use ae1svm_core::eval::{auroc, ScoredSet};
use ae1svm_core::model::{Ae1SvmModel, ModelConfig, Phase, TrainConfig, TrainMode};
use ae1svm_core::ocsvm::Decision;
use ae1svm_core::Matrix;
use proptest::prelude::*;

fn small_config(alpha: f64) -> ModelConfig {
    ModelConfig {
        encoder_dims: vec![3, 2],
        nu: 0.2,
        alpha,
        sigma: 1.0,
        num_features: 16,
        ..ModelConfig::default()
    }
}

fn train_cfg(epochs: usize, mode: TrainMode) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: 0.003,
        seed: 5,
        mode,
    }
}

#[test]
fn heavier_alpha_gives_lower_reconstruction_loss() {
    let data = gen_illustrative_4d(2);
    let x = data.features();
    let fit = |alpha: f64| {
        let mut m = Ae1SvmModel::for_data(x, &small_config(alpha), 9).unwrap();
        m.fit(x, &train_cfg(40, TrainMode::Joint)).unwrap();
        m.objective_parts(x).unwrap().reconstruction
    };
    let heavy = fit(1e6);
    let none = fit(0.0);
    assert!(heavy < none, "alpha=1e6 gave {heavy}, alpha=0 gave {none}");
}

#[test]
fn two_stage_report_orders_phases() {
    let data = gen_illustrative_4d(3);
    let mut m = Ae1SvmModel::for_data(data.features(), &small_config(10.0), 1).unwrap();
    let report = m.fit(data.features(), &train_cfg(4, TrainMode::TwoStage)).unwrap();
    let phases: Vec<Phase> = report.epochs.iter().map(|e| e.phase).collect();
    assert_eq!(phases, [[Phase::Autoencoder; 4], [Phase::Head; 4]].concat());
    assert_eq!(report.objectives(Phase::Joint), Vec::<f64>::new());
}

#[test]
fn trained_model_scores_split_and_explains_consistently() {
    let data = gen_illustrative_4d(4);
    let (train, test) = split(&data, 0.5, 4).unwrap();
    let mut m = Ae1SvmModel::for_data(train.features(), &small_config(10.0), 2).unwrap();
    m.fit(train.features(), &train_cfg(20, TrainMode::Joint)).unwrap();

    let scores = m.score(test.features()).unwrap();
    assert_eq!(scores.len(), test.n_rows());
    for (s, d) in scores.iter().zip(m.decide(test.features()).unwrap()) {
        assert_eq!(d, if *s < 0.0 { Decision::Anomaly } else { Decision::Normal });
    }
    let a = auroc(&ScoredSet::new(scores, test.labels().unwrap().to_vec()).unwrap()).unwrap();
    assert!((0.0..=1.0).contains(&a));

    for i in [0, test.n_rows() / 2, test.n_rows() - 1] {
        let row = test.features().row(i);
        let direct = end_to_end_grad(&m, row, i).unwrap().gradient;
        let chained = end_to_end_grad_by_jacobians(&m, row).unwrap();
        for (g, h) in direct.iter().zip(&chained) {
            assert!((g - h).abs() <= 1e-10 * g.abs().max(h.abs()).max(1.0));
        }
    }
}

#[test]
fn split_keeps_both_classes() {
    let data = gen_illustrative_4d(6);
    let (train, test) = split(&data, 0.5, 6).unwrap();
    assert_eq!(train.n_rows() + test.n_rows(), data.n_rows());
    for label in [Label::Normal, Label::Anomaly] {
        assert_eq!(train.count(label) + test.count(label), data.count(label));
        assert!(train.count(label) > 0 && test.count(label) > 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_are_finite_and_training_never_changes_shape(
        rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 4..20),
        seed in 0u64..1000,
    ) {
        let x = Matrix::from_rows(&rows).unwrap();
        let mut m = Ae1SvmModel::for_data(&x, &small_config(1.0), seed).unwrap();
        m.fit(&x, &TrainConfig { epochs: 2, batch_size: 3, seed, ..TrainConfig::default() }).unwrap();
        prop_assert_eq!(m.input_dim(), 3);
        prop_assert_eq!(m.latent_dim(), 2);
        prop_assert!(m.score(&x).unwrap().iter().all(|s| s.is_finite()));
    }
}
