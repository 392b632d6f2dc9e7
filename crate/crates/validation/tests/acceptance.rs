//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line, then asserts.
//! Run with `cargo test -p gfc-validation --test acceptance -- --nocapture`.

use std::time::Instant;

use gfc_core::dataset::ClientShard;
use gfc_core::field::{build_field, FieldConfig, PotentialField};
use gfc_core::harness::{
    epsilon_scaling_report, sweep, DataSource, Experiment, ExperimentConfig, Method, Preset,
};
use gfc_core::heuristics::{heuristic_alpha, heuristic_k, heuristic_softening};
use gfc_core::local::WeightedCentroid;
use gfc_core::metrics::{ari, centroid_error, nmi};
use gfc_core::privacy::{privatize, Laplace, PrivacyParams};
use gfc_core::rng::seeded;
use gfc_core::topology::{build_merge_tree, extract_centroids, Direction, FiltrationConfig};
use gfc_core::Points;
use gfc_validation::{
    all_labelings, brute_components, ks_critical, ks_statistic, pair_counting_ari, report,
};
use rand::Rng;

/// Pass thresholds, one per acceptance clause.
mod tol {
    pub const KS_ALPHA: f64 = 0.01;
    pub const LAPLACE_VAR_REL: f64 = 0.05;
    pub const LAPLACE_SECS: f64 = 5.0;
    pub const ARI_ABS: f64 = 1e-12;
    pub const RECOVERY_ARI: f64 = 0.90;
    pub const RECOVERY_VS_CENTRAL: f64 = 0.95;
    pub const RECOVERY_RUN_SECS: f64 = 2.0;
    pub const GFC_VS_NAIVE_MARGIN: f64 = 0.02;
    pub const FIELD_REL: f64 = 1e-9;
    pub const SLOPE: (f64, f64) = (0.5, 1.5);
    pub const SCALING_SECS: f64 = 60.0;
    pub const DELTA_ABS: f64 = 1e-2;
    pub const SCALE_SECS: f64 = 30.0;
}

fn random_sources(rng: &mut impl Rng, count: usize, dim: usize) -> Vec<WeightedCentroid<f64>> {
    (0..count)
        .map(|i| WeightedCentroid {
            position: (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect(),
            mass: rng.random_range(0.01..3.0),
            source_client: i,
            member_count: 1,
        })
        .collect()
}

fn random_probes(rng: &mut impl Rng, count: usize, dim: usize) -> Points<f64> {
    let flat = (0..count * dim)
        .map(|_| rng.random_range(-6.0..6.0))
        .collect();
    Points::from_flat(dim, flat).unwrap()
}

/// Three 2-D blobs, separation 10 and spread 0.5, split over 10 clients.
fn blob_config(epsilons: Vec<f64>, methods: Vec<Method>) -> ExperimentConfig {
    ExperimentConfig {
        epsilons,
        seeds: (0..20).collect(),
        methods,
        ..Preset::Small.config()
    }
}

#[test]
fn criterion_01_laplace_fidelity() {
    let start = Instant::now();
    let n = 100_000;
    let params = PrivacyParams::new(0.5, 1.0).unwrap();
    let shard = ClientShard {
        client_id: 0,
        points: Points::from_flat(1, vec![0.0; n]).unwrap(),
        labels: None,
        indices: (0..n).collect(),
    };
    let noisy = privatize(&shard, &params, &mut seeded(1)).unwrap();
    let xs = noisy.points.as_flat();
    let reference = Laplace::new(2.0).unwrap();
    let d = ks_statistic(xs, |x| reference.cdf(x));
    let crit = ks_critical(n, tol::KS_ALPHA);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let secs = start.elapsed().as_secs_f64();
    let pass =
        d < crit && (var - 8.0).abs() <= tol::LAPLACE_VAR_REL * 8.0 && secs < tol::LAPLACE_SECS;
    assert!(report(
        1,
        "laplace mechanism",
        pass,
        format!("KS D={d:.5} (critical {crit:.5}), variance {var:.4} vs 8 (±5%), {secs:.2}s")
    ));
}

#[test]
fn criterion_02_merge_tree_oracle() {
    let mut rng = seeded(2);
    let (mut levels_checked, mut mismatches) = (0usize, 0usize);
    for _ in 0..100 {
        let dim = rng.random_range(1..=3);
        let sources = {
            let n = rng.random_range(1..=12);
            random_sources(&mut rng, n, dim)
        };
        let mut probes = {
            let n = rng.random_range(1..=150);
            random_probes(&mut rng, n, dim)
        };
        // Repeated probes give tied energies.
        for _ in 0..rng.random_range(0..=50) {
            let row = probes.row(rng.random_range(0..probes.len())).to_vec();
            probes.push(&row).unwrap();
        }
        let field =
            PotentialField::from_probes(sources, probes, rng.random_range(0.01..2.0), 2.0).unwrap();
        let cfg = FiltrationConfig {
            n_clusters: if rng.random_bool(0.5) {
                usize::MAX
            } else {
                rng.random_range(1..=8)
            },
            radius: rng.random_range(0.05..4.0),
            max_levels: rng.random_range(1..=50),
            direction: if rng.random_bool(0.8) {
                Direction::Superlevel
            } else {
                Direction::Sublevel
            },
        };
        let tree = build_merge_tree(&field, &cfg).unwrap();
        for level in 0..tree.levels_processed {
            levels_checked += 1;
            let expected =
                brute_components(&field, cfg.radius, tree.thresholds[level], cfg.direction);
            if tree.components_at(level) != expected {
                mismatches += 1;
            }
        }
    }
    assert!(report(
        2,
        "merge-tree oracle",
        mismatches == 0,
        format!("{mismatches} mismatches over {levels_checked} levels of 100 fields")
    ));
}

#[test]
fn criterion_03_metrics() {
    let labelings = all_labelings(6, 3);
    let mut worst = 0f64;
    let mut undefined_mismatch = 0;
    for t in &labelings {
        for p in &labelings {
            match (ari(t, p).ok(), pair_counting_ari(t, p)) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => undefined_mismatch += 1,
            }
        }
    }
    let labels = [0, 0, 1, 1, 2, 2, 0, 1, 2];
    let nmi_same = nmi(&labels, &labels).unwrap();
    let nmi_indep = nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();

    let a = Points::from_rows(&[[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0]]).unwrap();
    let b = Points::from_rows(&[[0.1, 0.0], [3.0, 1.5], [-2.0, 4.0]]).unwrap();
    let b_perm = Points::from_rows(&[[-2.0, 4.0], [0.1, 0.0], [3.0, 1.5]]).unwrap();
    let e: f64 = centroid_error(&a, &b).unwrap();
    let e_perm: f64 = centroid_error(&a, &b_perm).unwrap();
    let e_self = centroid_error(&a, &a).unwrap();

    let pass = worst <= tol::ARI_ABS
        && undefined_mismatch == 0
        && (nmi_same - 1.0).abs() < tol::ARI_ABS
        && nmi_indep.abs() < tol::ARI_ABS
        && (e - e_perm).abs() < tol::ARI_ABS
        && e_self == 0.0;
    assert!(report(
        3,
        "metric correctness",
        pass,
        format!(
            "ARI max deviation {worst:.2e} over {} pairs, NMI same={nmi_same} independent={nmi_indep:.1e}, \
             centroid error {e:.4} / permuted {e_perm:.4} / self {e_self}",
            labelings.len().pow(2)
        )
    ));
}

#[test]
fn criterion_04_output_cardinality() {
    let mut rng = seeded(4);
    let mut wrong = Vec::new();
    for case in 0..500 {
        let dim = rng.random_range(1..=3);
        // Every fifth instance has a single source: one peak.
        let count = if case % 5 == 0 {
            1
        } else {
            rng.random_range(2..=20)
        };
        let sources = random_sources(&mut rng, count, dim);
        let field_cfg = FieldConfig {
            alpha: rng.random_range(0.5..15.0),
            softening: 10f64.powf(rng.random_range(-4.0..2.0)),
            exponent_p: 2.0,
            rng_seed: rng.random(),
        };
        let field = build_field(&sources, &field_cfg).unwrap();
        let n_c = rng.random_range(1..=25);
        let cfg = FiltrationConfig {
            n_clusters: n_c,
            radius: 10f64.powf(rng.random_range(-3.0..1.5)),
            max_levels: rng.random_range(1..=200),
            direction: Direction::Superlevel,
        };
        let tree = build_merge_tree(&field, &cfg).unwrap();
        let out = extract_centroids(&tree, &field, &cfg).unwrap();
        if out.centroids.len() != n_c || out.provenance.len() != n_c {
            wrong.push((case, n_c, out.centroids.len()));
        }
    }
    assert!(report(
        4,
        "output cardinality",
        wrong.is_empty(),
        format!("{} of 500 instances off target {:?}", wrong.len(), wrong)
    ));
}

#[test]
fn criterion_05_noise_free_recovery() {
    let exp = Experiment::prepare(blob_config(vec![1000.0], vec![Method::Gfc])).unwrap();
    let mut slowest = 0f64;
    let mut aris = Vec::new();
    let mut central = Vec::new();
    for seed in 0..20 {
        let start = Instant::now();
        let r = exp.run(Method::Gfc, 1000.0, seed);
        slowest = slowest.max(start.elapsed().as_secs_f64());
        aris.push(r.ari.unwrap_or(f64::NAN));
        central.push(exp.centralized_ari(seed).unwrap().unwrap_or(f64::NAN));
    }
    let mean = aris.iter().sum::<f64>() / 20.0;
    let central_mean = central.iter().sum::<f64>() / 20.0;
    let pass = mean >= tol::RECOVERY_ARI
        && mean >= tol::RECOVERY_VS_CENTRAL * central_mean
        && slowest < tol::RECOVERY_RUN_SECS;
    assert!(report(
        5,
        "noise-free recovery",
        pass,
        format!(
            "mean ARI {mean:.4} (need >= 0.90 and >= {:.4}), centralized {central_mean:.4}, slowest run {slowest:.3}s",
            tol::RECOVERY_VS_CENTRAL * central_mean
        )
    ));
}

#[test]
fn criterion_06_privacy_degradation() {
    let epsilons = vec![1000.0, 1.0, 0.1, 0.01];
    let exp = Experiment::prepare(blob_config(
        epsilons.clone(),
        vec![Method::Gfc, Method::Naive],
    ))
    .unwrap();
    let out = sweep(&exp).unwrap();
    let cell = |m, e| out.aggregate(m, e).unwrap().ari;
    let mut violations = Vec::new();
    let mut trend = Vec::new();
    for pair in epsilons.windows(2) {
        let (hi, lo) = (cell(Method::Gfc, pair[0]), cell(Method::Gfc, pair[1]));
        let (m_hi, m_lo) = (hi.mean.unwrap_or(0.0), lo.mean.unwrap_or(0.0));
        let pooled = ((hi.std.unwrap_or(0.0).powi(2) + lo.std.unwrap_or(0.0).powi(2)) / 2.0).sqrt();
        if m_lo > m_hi + pooled {
            violations.push(pair[1]);
        }
        trend.push(format!("{}:{m_hi:.3}", pair[0]));
    }
    let last = *epsilons.last().unwrap();
    trend.push(format!(
        "{last}:{:.3}",
        cell(Method::Gfc, last).mean.unwrap_or(0.0)
    ));
    let gfc = cell(Method::Gfc, 0.1).mean.unwrap_or(0.0);
    let naive = cell(Method::Naive, 0.1).mean.unwrap_or(0.0);
    let pass = violations.is_empty() && gfc >= naive - tol::GFC_VS_NAIVE_MARGIN;
    assert!(report(
        6,
        "privacy degradation",
        pass,
        format!(
            "GFC mean ARI by epsilon [{}], increases beyond pooled std at {violations:?}; eps=0.1 GFC {gfc:.4} vs naive {naive:.4}",
            trend.join(", ")
        )
    ));
}

#[test]
fn criterion_07_field_invariants() {
    let mut rng = seeded(7);
    let (mut bound_fail, mut worst_scale, mut worst_shift) = (0usize, 0f64, 0f64);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..1000 {
        let dim = rng.random_range(1..=4);
        let sources = {
            let n = rng.random_range(1..=15);
            random_sources(&mut rng, n, dim)
        };
        let mut probes = {
            let n = rng.random_range(1..=40);
            random_probes(&mut rng, n, dim)
        };
        // Probes sitting on sources are the extreme case for the bound.
        probes.push(&sources[0].position.clone()).unwrap();
        let delta = 10f64.powf(rng.random_range(-3.0..2.0));
        let p = if rng.random_bool(0.5) {
            2.0
        } else {
            rng.random_range(0.5..4.0)
        };
        let field = PotentialField::from_probes(sources.clone(), probes.clone(), delta, p).unwrap();
        let bound = sources.iter().map(|s| s.mass).sum::<f64>() / delta;
        bound_fail += field.energies.iter().filter(|&&e| e > bound).count();

        let c = rng.random_range(0.1..10.0);
        let scaled: Vec<_> = sources
            .iter()
            .map(|s| WeightedCentroid {
                mass: s.mass * c,
                ..s.clone()
            })
            .collect();
        let f_scaled = PotentialField::from_probes(scaled, probes.clone(), delta, p).unwrap();
        for (a, b) in f_scaled.energies.iter().zip(&field.energies) {
            worst_scale = worst_scale.max(rel(*a, c * b));
        }

        let t: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let shift = |v: &[f64]| v.iter().zip(&t).map(|(x, d)| x + d).collect::<Vec<_>>();
        let moved: Vec<_> = sources
            .iter()
            .map(|s| WeightedCentroid {
                position: shift(&s.position),
                ..s.clone()
            })
            .collect();
        let moved_probes =
            Points::from_rows(&probes.rows().map(shift).collect::<Vec<_>>()).unwrap();
        let f_moved = PotentialField::from_probes(moved, moved_probes, delta, p).unwrap();
        for (a, b) in f_moved.energies.iter().zip(&field.energies) {
            worst_shift = worst_shift.max(rel(*a, *b));
        }
    }
    let pass = bound_fail == 0 && worst_scale <= tol::FIELD_REL && worst_shift <= tol::FIELD_REL;
    assert!(report(
        7,
        "field invariants",
        pass,
        format!(
            "{bound_fail} energies above sum(w)/delta, mass scaling rel err {worst_scale:.2e}, translation rel err {worst_shift:.2e}"
        )
    ));
}

#[test]
fn criterion_08_epsilon_scaling() {
    let start = Instant::now();
    let exp = Experiment::prepare(blob_config(vec![1.0], vec![Method::Gfc])).unwrap();
    let rep = epsilon_scaling_report(&exp, &[1.0, 0.5, 0.2, 0.1], Method::Gfc).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let errors: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("{}:{:.4}", r.epsilon, r.error.mean.unwrap_or(f64::NAN)))
        .collect();
    let pass = tol::SLOPE.0 < rep.slope && rep.slope < tol::SLOPE.1 && secs < tol::SCALING_SECS;
    assert!(report(
        8,
        "epsilon scaling",
        pass,
        format!(
            "slope {:.3} (95% CI {:?}), floor {:.4}, mean errors [{}], {secs:.1}s",
            rep.slope,
            rep.slope_ci95
                .map(|(a, b)| (format!("{a:.3}"), format!("{b:.3}"))),
            rep.floor.error.mean.unwrap_or(f64::NAN),
            errors.join(", ")
        )
    ));
}

#[test]
fn criterion_09_heuristics() {
    let k = heuristic_k(500);
    let delta = heuristic_softening(0.2);
    let alpha = heuristic_alpha(1.0);
    let pass = k == 16 && (delta - 183.94).abs() <= tol::DELTA_ABS && alpha == 12.0;
    assert!(report(
        9,
        "heuristic formulas",
        pass,
        format!("k(500)={k}, delta(0.2)={delta:.4}, alpha(1)={alpha}")
    ));
}

#[test]
fn criterion_10_scalability() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        data: DataSource::Blobs {
            n_clusters: 4,
            points_per_cluster: 2500,
            dim: 2,
            spread: 0.5,
            separation: 10.0,
            seed: 7,
        },
        num_clients: 100,
        epsilons: vec![0.01],
        seeds: vec![0],
        methods: vec![Method::Gfc],
        ..Preset::Small.config()
    };
    let exp = Experiment::prepare(cfg).unwrap();
    let outcome = exp.run_gfc_detailed(0.01, 0);
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match outcome {
        Ok((_, out)) => {
            let n = out.centroids.len();
            (
                n == exp.n_clusters && secs < tol::SCALE_SECS,
                format!("{n} centroids for n_c={}, {secs:.2}s", exp.n_clusters),
            )
        }
        Err(e) => (false, format!("failed: {e}")),
    };
    assert!(report(
        10,
        "scalability smoke",
        pass,
        format!("100 clients, 10^4 points, eps=0.01: {detail}")
    ));
}
