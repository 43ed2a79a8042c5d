//! Acceptance suite: one pass/fail line per criterion.

use polaron_core::validation::{self, Faults, SharedEnsembles, ValidationConfig};

#[test]
fn acceptance() {
    let cfg = ValidationConfig::default();
    let faults = Faults::default();
    let scratch = tempfile::tempdir().unwrap();

    let mut outcomes = vec![validation::criterion_1(&cfg, &faults), validation::criterion_2(&cfg, &faults)];
    for o in &outcomes {
        println!("{o}");
    }
    let ens = SharedEnsembles::generate(&cfg).unwrap();
    let rest = [
        validation::criterion_3(&ens.strong),
        validation::criterion_4(&cfg, &ens.medium, &ens.strong),
        validation::criterion_5(&cfg, &ens.strong),
        validation::criterion_6(&ens.weak),
        validation::criterion_7(&ens.strong),
        validation::criterion_8(&cfg, &ens.strong),
        validation::criterion_9(&cfg, scratch.path()),
    ];
    for o in rest {
        println!("{o}");
        outcomes.push(o);
    }

    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
