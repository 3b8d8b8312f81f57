mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use tscan::embed::{self, gaussian_oracle_embed};
use tscan::metrics::{alignment_accuracy, distribution_score};
use tscan::neighbors::mine_neighbors;
use tscan::rng::rng_from_seed;
use tscan::scan::{self, scan_loss_grad, ClusterHead, TrainConfig};
use tscan::selflabel::fine_tune_confident;

fn config(entropy_weight: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        entropy_weight,
        learning_rate: 0.01,
        epochs,
        seed: 17,
        ..TrainConfig::default()
    }
}

#[test]
fn gradient_matches_central_differences() {
    let head = random_head(8, 5, 1);
    let batch = random_unit_set(32, 8, 2);
    let anchors: Vec<&[f64]> = (0..16).map(|i| batch.row(i)).collect();
    let neighbors: Vec<&[f64]> = (16..32).map(|i| batch.row(i)).collect();
    let cfg = TrainConfig::default();
    let (grad, _) = scan_loss_grad(&head, &anchors, &neighbors, &cfg).unwrap();
    let analytic: Vec<f64> = grad.iter().collect();
    let numeric = finite_difference_gradient(
        &head,
        &anchors,
        &neighbors,
        cfg.entropy_weight,
        cfg.eps,
        1e-5,
    );
    let err = max_relative_error(&analytic, &numeric, 1e-5);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn consistency_gradient_vanishes_on_agreeing_one_hot_pairs() {
    // a dominant bias makes every prediction one-hot on cluster 0
    let mut bias = vec![0.0; 3];
    bias[0] = 60.0;
    let head = ClusterHead::from_parts(3, 4, vec![0.0; 12], bias).unwrap();
    let batch = random_unit_set(8, 4, 3);
    let rows: Vec<&[f64]> = batch.rows().collect();
    let cfg = TrainConfig {
        entropy_weight: 0.0,
        ..TrainConfig::default()
    };
    let (grad, loss) = scan_loss_grad(&head, &rows, &rows, &cfg).unwrap();
    assert!(loss.consistency.abs() < 1e-12);
    assert!(grad.iter().all(|g| g.abs() < 1e-12));
}

#[test]
fn entropy_part_is_linear_in_its_weight() {
    let head = random_head(6, 4, 5);
    let batch = random_unit_set(20, 6, 6);
    let anchors: Vec<&[f64]> = (0..10).map(|i| batch.row(i)).collect();
    let neighbors: Vec<&[f64]> = (10..20).map(|i| batch.row(i)).collect();
    let grad_at = |w: f64| -> Vec<f64> {
        let cfg = TrainConfig {
            entropy_weight: w,
            ..TrainConfig::default()
        };
        scan_loss_grad(&head, &anchors, &neighbors, &cfg)
            .unwrap()
            .0
            .iter()
            .collect()
    };
    let (base, one, two) = (grad_at(0.0), grad_at(3.0), grad_at(6.0));
    for ((b, x), y) in base.iter().zip(&one).zip(&two) {
        assert!(((y - b) - 2.0 * (x - b)).abs() < 1e-9);
    }
}

#[test]
fn separated_states_are_recovered() {
    let truth = truth_with_sizes(&[200, 200, 200]);
    let set = gaussian_oracle_embed(&truth, 16, 1.0, 0.1, 9).unwrap();
    let table = mine_neighbors(&set, 5).unwrap();
    let trained = scan::train(&set, &table, 3, &config(5.0, 50)).unwrap();
    let acc = alignment_accuracy(&scan::assign(&trained.head, &set).unwrap(), &truth).unwrap();
    assert!(acc >= 0.95, "{acc}");
}

#[test]
fn heavy_entropy_weight_forces_balance() {
    let truth = truth_with_sizes(&[500, 150, 50]);
    let set = gaussian_oracle_embed(&truth, 16, 1.0, 0.2, 10).unwrap();
    let table = mine_neighbors(&set, 5).unwrap();
    let trained = scan::train(&set, &table, 4, &config(100.0, 50)).unwrap();
    let dev = distribution_score(&scan::assign(&trained.head, &set).unwrap(), 4)
        .unwrap()
        .deviation;
    assert!(dev <= 0.05, "{dev}");
}

#[test]
fn training_is_bit_reproducible() {
    let set = random_unit_set(300, 8, 11);
    let table = mine_neighbors(&set, 5).unwrap();
    let a = scan::train(&set, &table, 4, &config(5.0, 5)).unwrap();
    let b = scan::train(&set, &table, 4, &config(5.0, 5)).unwrap();
    assert_eq!(a.head, b.head);
    assert_eq!(a.history, b.history);
    let c = scan::train(
        &set,
        &table,
        4,
        &TrainConfig {
            seed: 18,
            ..config(5.0, 5)
        },
    )
    .unwrap();
    assert_ne!(a.head, c.head);
}

#[test]
fn training_rejects_more_clusters_than_rows() {
    let set = random_unit_set(6, 4, 12);
    let table = mine_neighbors(&set, 2).unwrap();
    assert!(scan::train(&set, &table, 7, &config(5.0, 1)).is_err());
}

#[test]
fn self_labeling_sharpens_predictions() {
    let truth = truth_with_sizes(&[300, 300, 300]);
    let set = gaussian_oracle_embed(&truth, 16, 1.0, 0.2, 13).unwrap();
    let cfg = config(5.0, 30);
    let trained = scan::train(&set, &mine_neighbors(&set, 5).unwrap(), 3, &cfg).unwrap();
    let outcome = fine_tune_confident(&trained.head, &set, 0.9, 3, &cfg).unwrap();
    assert_eq!(outcome.steps.len(), 3);
    let mut prev = outcome.initial_mean_confidence;
    for step in &outcome.steps {
        assert!(
            step.mean_confidence >= prev - 0.01,
            "{prev} -> {}",
            step.mean_confidence
        );
        prev = step.mean_confidence;
    }
}

#[test]
fn disjoint_vocabularies_hash_nearly_orthogonal() {
    // utterance-like lengths; a one-word text colliding once with a short
    // text gives 1/sqrt(features) on its own, far above any useful bound
    let vocab: Vec<String> = (0..400).map(|i| format!("w{i}x")).collect();
    let mut rng = rng_from_seed(77);
    let mut sims = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let mut words = vocab.clone();
        words.shuffle(&mut rng);
        let (left, right) = words.split_at(200);
        let a = left[..rng.random_range(6..13)].join(" ");
        let b = right[..rng.random_range(6..13)].join(" ");
        let (x, y) = (
            embed::hash_text(&a, 256, 5).unwrap(),
            embed::hash_text(&b, 256, 5).unwrap(),
        );
        sims.push(embed::dot(&x, &y).abs());
    }
    sims.sort_by(f64::total_cmp);
    assert!(sims[989] < 0.2, "99th percentile {}", sims[989]);
    assert!(sims[999] < 0.3, "worst {}", sims[999]);
}
