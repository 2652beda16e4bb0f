mod common;

use kan_core::data::SyntheticSpec;
use kan_core::eval::{run_model, sequence_specs, transfer_table, SequenceSpec};
use kan_core::kan::continual_learn;
use kan_core::{Hyperparams, ModelKind};

use common::suite;

fn zero_shot_spec(share: f64) -> SyntheticSpec {
    SyntheticSpec {
        n_tasks: 2,
        docs_per_task: 2000,
        share,
        lexicon_size: 40,
        doc_len: (4, 8),
        cues_per_doc: (3, 5),
        ..Default::default()
    }
}

/// Accuracy on task 1's test set of a model trained only on task 0.
fn zero_shot(share: f64) -> (f64, f64) {
    let hp = Hyperparams::desk();
    let (tasks, emb) = suite(&zero_shot_spec(share), 0, &hp);
    let run = continual_learn(&tasks[..1], ModelKind::One.learner(), hp, 0, emb).unwrap();
    let own = run.model.mcl_accuracy(0, &tasks[0].test).unwrap();
    let other = run.model.mcl_accuracy(0, &tasks[1].test).unwrap();
    eprintln!("share {share}: own {own:.4} zero-shot {other:.4}");
    (own, other)
}

#[test]
fn fully_shared_cues_transfer_zero_shot() {
    let (own, other) = zero_shot(1.0);
    assert!(own > 0.9);
    assert!(other > 0.9, "zero-shot {other}");
}

#[test]
fn disjoint_cues_are_at_chance_zero_shot() {
    let (own, other) = zero_shot(0.0);
    assert!(own > 0.9);
    assert!((other - 0.5).abs() <= 0.05, "zero-shot {other}");
}

#[test]
fn identical_second_task_does_not_erase_the_first() {
    let hp = Hyperparams::desk();
    let spec = SyntheticSpec {
        n_tasks: 1,
        docs_per_task: 2000,
        ..Default::default()
    };
    let (mut tasks, emb) = suite(&spec, 0, &hp);
    let mut twin = tasks[0].clone();
    twin.name.push_str("-twin");
    tasks.push(twin);
    let run = continual_learn(&tasks, ModelKind::Kan.learner(), hp, 0, emb).unwrap();
    let (first, last) = (run.progress.first_learn[0], run.final_accuracies()[0]);
    eprintln!("task 0: first {first:.4} final {last:.4}");
    assert!(last >= first - 0.02, "first {first} final {last}");
}

#[test]
fn shared_suite_backward_keeps_up_with_forward() {
    let hp = Hyperparams::desk();
    let spec = SyntheticSpec {
        n_tasks: 3,
        share: 1.0,
        ..Default::default()
    };
    let (tasks, emb) = suite(&spec, 0, &hp);
    let specs: Vec<SequenceSpec> = sequence_specs(tasks.len(), 1, 0).unwrap();
    let report = run_model(ModelKind::Kan, &specs[0], &tasks, &hp, emb).unwrap();
    let row = transfer_table(&[report], &[tasks.len()]).unwrap().remove(0);
    eprintln!("share 1: forward {:.4} backward {:.4}", row.forward, row.backward);
    assert!(row.backward >= row.forward - 0.02, "{row:?}");
}
