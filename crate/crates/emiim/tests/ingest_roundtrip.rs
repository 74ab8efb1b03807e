use emiim::log::{parse_log, write_log, LogFormatSpec};
use emiim::scenario::builtin;
use emiim_core::context::{build_dataset_with, FeatureMaps, PipelineConfig};
use emiim_core::{CallRecord, Dataset};
use emiim_core::synth::{generate, PlantedRuleSet};
use emiim_core::{BehaviorClass, ClassCounts};

fn scenario(noise: f64, n: usize) -> PlantedRuleSet {
    let mut r = builtin("alice").unwrap();
    r.noise = noise;
    r.n_records = n;
    r
}

fn dataset_of(name: &str, records: &[CallRecord]) -> Dataset {
    let maps = FeatureMaps::fit(records, &PipelineConfig::default()).unwrap();
    build_dataset_with(name, records, &maps).unwrap()
}

fn render(rules: &PlantedRuleSet) -> Vec<u8> {
    let (records, _) = generate(rules).unwrap();
    let mut bytes = Vec::new();
    write_log(&records, &mut bytes, &LogFormatSpec::default()).unwrap();
    bytes
}

#[test]
fn noiseless_log_relabels_to_the_generator_tally() {
    let rules = scenario(0.0, 2000);
    let (_, report) = generate(&rules).unwrap();
    assert_eq!(report.flips, 0);
    let parsed = parse_log(render(&rules).as_slice(), &LogFormatSpec::default()).unwrap();
    assert!(parsed.skipped.is_empty());
    let labels: Vec<BehaviorClass> = parsed.records.iter().map(|r| r.behavior().unwrap()).collect();
    assert_eq!(ClassCounts::from_labels(labels.iter().copied()), report.tally);
    for (label, truth) in labels.iter().zip(&report.truth) {
        assert_eq!(*label, truth.rule_class);
    }
}

#[test]
fn noisy_labels_match_ground_truth_one_to_one() {
    let rules = scenario(0.2, 1500);
    let (_, report) = generate(&rules).unwrap();
    let parsed = parse_log(render(&rules).as_slice(), &LogFormatSpec::default()).unwrap();
    let dataset = dataset_of("alice", &parsed.records);
    assert_eq!(dataset.len(), report.truth.len());
    for (e, truth) in dataset.examples().iter().zip(&report.truth) {
        assert_eq!(e.label, truth.emitted_class);
    }
    assert_eq!(dataset.class_counts(), report.tally);
    assert_eq!(report.tally.total(), 1500);
}

#[test]
fn flip_fraction_concentrates_near_noise() {
    let (_, report) = generate(&scenario(0.1, 2000)).unwrap();
    assert!((report.flip_fraction() - 0.1).abs() <= 0.02, "{}", report.flip_fraction());
}

#[test]
fn same_seed_gives_identical_bytes() {
    let rules = scenario(0.1, 500);
    assert_eq!(render(&rules), render(&rules));
    let mut other = rules.clone();
    other.seed += 1;
    assert_ne!(render(&rules), render(&other));
}

#[test]
fn every_builtin_scenario_round_trips() {
    for (name, _) in emiim::scenario::BUILTIN {
        let mut rules = builtin(name).unwrap();
        rules.n_records = 400;
        let (records, report) = generate(&rules).unwrap();
        let mut bytes = Vec::new();
        write_log(&records, &mut bytes, &LogFormatSpec::default()).unwrap();
        let parsed = parse_log(bytes.as_slice(), &LogFormatSpec::default()).unwrap();
        assert_eq!(parsed.records, records, "{name}");
        let ds = dataset_of(name, &parsed.records);
        assert_eq!(ds.class_counts(), report.tally, "{name}");
    }
}
