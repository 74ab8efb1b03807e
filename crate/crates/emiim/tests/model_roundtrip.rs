use emiim::model_file::{load_model, model_from_json, model_to_json, save_model};
use emiim::scenario::builtin;
use emiim::Error;
use emiim_core::context::PipelineConfig;
use emiim_core::forest::ForestConfig;
use emiim_core::model::{ModelSpec, TrainedModel};
use emiim_core::synth::generate;
use emiim_core::ContextVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn train(scenario: &str, spec: ModelSpec) -> TrainedModel {
    let mut rules = builtin(scenario).unwrap();
    rules.n_records = 1000;
    let (records, _) = generate(&rules).unwrap();
    TrainedModel::train(scenario, &records, &PipelineConfig::default(), &spec).unwrap()
}

fn forest(n_trees: usize) -> ModelSpec {
    ModelSpec::emiim(ForestConfig {
        n_trees,
        master_seed: 5,
        ..ForestConfig::default()
    })
}

/// Draws each feature from its vocabulary plus one value the model never saw.
fn random_contexts(model: &TrainedModel, n: usize, seed: u64) -> Vec<ContextVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            model
                .feature_vocab
                .iter()
                .map(|v| {
                    let i = rng.random_range(0..=v.len());
                    v.get(i).cloned().unwrap_or_else(|| "never-seen".to_string())
                })
                .collect()
        })
        .collect()
}

#[test]
fn hundred_tree_forest_agrees_on_random_contexts() {
    let model = train("sales", forest(100));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sales.emiim");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    for ctx in random_contexts(&model, 1000, 3) {
        assert_eq!(loaded.predict(&ctx), model.predict(&ctx), "{ctx:?}");
    }
}

#[test]
fn one_tree_forest_resaves_identically() {
    let model = train("alice", forest(1));
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    save_model(&model, &a).unwrap();
    save_model(&load_model(&a).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn single_tree_model_round_trips() {
    let model = train("student", ModelSpec::miim());
    let back = model_from_json(&model_to_json(&model).unwrap()).unwrap();
    assert_eq!(back, model);
}

#[test]
fn loaded_model_predicts_raw_records_like_the_original() {
    let model = train("nightshift", forest(15));
    let back = model_from_json(&model_to_json(&model).unwrap()).unwrap();
    let mut rules = builtin("nightshift").unwrap();
    rules.seed = 1234;
    rules.n_records = 300;
    let (records, _) = generate(&rules).unwrap();
    for r in &records {
        assert_eq!(back.predict_record(r), model.predict_record(r));
    }
}

#[test]
fn version_99_is_unsupported() {
    let text = model_to_json(&train("alice", forest(2))).unwrap();
    let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    assert_ne!(bumped, text);
    assert!(matches!(model_from_json(&bumped), Err(Error::UnsupportedVersion(99))));
}

#[test]
fn garbage_is_a_parse_error() {
    assert!(matches!(model_from_json("not json"), Err(Error::Parse { .. })));
    assert!(matches!(model_from_json("{}"), Err(Error::Parse { path, .. }) if path == "format_version"));
}
