use lds_core::harness::synth::{gen_text_fixture, TextFixtureConfig};
use lds_core::harness::{train, BackendConfig, RunConfig};
use lds_core::metalearners::MetaLearner;
use lds_core::par::Parallelism;
use lds_core::rng::{stream_rng, Stream};
use lds_core::scaler::{scale_support_set, ScalerConfig};
use lds_core::data::EmbeddedEpisode;
use lds_core::Vector;

fn config(epochs: usize) -> RunConfig {
    RunConfig {
        n_way: 5,
        k_shot: 1,
        m_query: 5,
        epochs,
        train_episodes: 10,
        valid_episodes: 10,
        test_episodes: 10,
        loss: Default::default(),
        classify_temperature: 0.1,
        scaler: Default::default(),
        metalearner: MetaLearner::Pn,
        optimizer: Default::default(),
        backend: BackendConfig::Trainable {
            dim: 8,
            template: "This is a [MASK] news: [sentence]".into(),
        },
        dataset: "unused.jsonl".into(),
        split: "unused.json".into(),
        checkpoint: None,
        seed: 4,
        runs: 1,
        log_train_accuracy: false,
    }
}

#[test]
fn training_is_reproducible_across_backends() {
    let (dataset, split) = gen_text_fixture(&TextFixtureConfig::default()).unwrap();
    let a = train(&config(2), &dataset, &split, Parallelism::Sequential).unwrap();
    let b = train(&config(2), &dataset, &split, Parallelism::default()).unwrap();
    assert_eq!(a.params.table(), b.params.table());
    assert_eq!(a.log.len(), 2);
}

#[test]
fn zero_epochs_returns_the_initial_table() {
    let (dataset, split) = gen_text_fixture(&TextFixtureConfig::default()).unwrap();
    let a = train(&config(0), &dataset, &split, Parallelism::Sequential).unwrap();
    let b = train(&config(0), &dataset, &split, Parallelism::Sequential).unwrap();
    assert!(a.log.is_empty());
    assert_eq!(a.params.table(), b.params.table());
    let trained = train(&config(1), &dataset, &split, Parallelism::Sequential).unwrap();
    assert_ne!(a.params.table(), trained.params.table());
}

#[test]
fn scaler_leaves_supports_on_their_label_unchanged() {
    let mut rng = stream_rng(0, Stream::Trial, 0);
    let mut label_reps = Vec::new();
    let mut support_reps = Vec::new();
    for _ in 0..3 {
        let v = Vector::new((0..6).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).unwrap();
        support_reps.push(vec![v.clone(), v.clone()]);
        label_reps.push(v);
    }
    let episode = EmbeddedEpisode {
        class_names: vec!["a".into(), "b".into(), "c".into()],
        query_reps: support_reps.clone(),
        support_reps,
        label_reps,
    };
    let scaled = scale_support_set(&episode, &ScalerConfig::default()).unwrap();
    for (before, after) in episode.support_reps.iter().zip(&scaled.support_reps) {
        for (x, y) in before.iter().zip(after) {
            assert!(x.distance(y) < 1e-9);
        }
    }
}
