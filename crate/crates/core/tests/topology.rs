use std::time::Instant;

use gfc_core::field::{build_field, FieldConfig};
use gfc_core::local::WeightedCentroid;
use gfc_core::rng::seeded;
use gfc_core::topology::{build_merge_tree, extract_centroids, Direction, FiltrationConfig};
use rand::Rng;

fn sources(count: usize, seed: u64) -> Vec<WeightedCentroid<f64>> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|i| WeightedCentroid {
            position: vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)],
            mass: rng.random_range(0.1..1.0),
            source_client: i,
            member_count: 1,
        })
        .collect()
}

#[test]
fn ten_thousand_probes_thousand_levels() {
    let s = sources(500, 1);
    let field = build_field(
        &s,
        &FieldConfig {
            alpha: 20.0,
            softening: 0.5,
            exponent_p: 2.0,
            rng_seed: 2,
        },
    )
    .unwrap();
    assert_eq!(field.len(), 10_000);
    let cfg = FiltrationConfig {
        n_clusters: usize::MAX,
        radius: 0.08,
        max_levels: 1000,
        direction: Direction::Superlevel,
    };
    let start = Instant::now();
    let tree = build_merge_tree(&field, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(tree.levels_processed, 1000);
    assert!(secs < 10.0, "{secs}s");
}

#[test]
fn sublevel_sweep_extracts_quota() {
    let s = sources(40, 3);
    let field = build_field(
        &s,
        &FieldConfig {
            alpha: 10.0,
            softening: 1.0,
            exponent_p: 2.0,
            rng_seed: 4,
        },
    )
    .unwrap();
    let cfg = FiltrationConfig {
        n_clusters: 6,
        radius: 0.5,
        max_levels: 100,
        direction: Direction::Sublevel,
    };
    let tree = build_merge_tree(&field, &cfg).unwrap();
    let out = extract_centroids(&tree, &field, &cfg).unwrap();
    assert_eq!(out.centroids.len(), 6);
    assert_eq!(out.provenance.len(), 6);
}
