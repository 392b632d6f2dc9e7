//! Slow, obviously-correct reference implementations used to check
//! `gfc-core`, plus the reporting helper of the acceptance suite.

use gfc_core::field::PotentialField;
use gfc_core::topology::Direction;

/// Kolmogorov-Smirnov statistic of `samples` against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic one-sample KS critical value at significance `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// ARI from the four pair counts; `None` when the denominator vanishes.
pub fn pair_counting_ari(truth: &[usize], pred: &[usize]) -> Option<f64> {
    let (mut ss, mut sd, mut ds, mut dd) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..truth.len() {
        for j in i + 1..truth.len() {
            match (truth[i] == truth[j], pred[i] == pred[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    (den != 0.0).then(|| 2.0 * (ss * dd - sd * ds) / den)
}

/// Every labeling of `n` points with labels below `labels`.
pub fn all_labelings(n: usize, labels: usize) -> Vec<Vec<usize>> {
    let total = labels.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let l = code % labels;
                    code /= labels;
                    l
                })
                .collect()
        })
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

/// Components of the probes admitted at threshold `h`, recomputed from
/// scratch with an all-pairs scan. Sorted, ordered by smallest member.
pub fn brute_components(
    field: &PotentialField<f64>,
    radius: f64,
    h: f64,
    direction: Direction,
) -> Vec<Vec<usize>> {
    let active: Vec<usize> = (0..field.len())
        .filter(|&i| direction.admits(field.energies[i], h))
        .collect();
    let mut parent: Vec<usize> = (0..field.len()).collect();
    for (a, &i) in active.iter().enumerate() {
        for &j in &active[a + 1..] {
            let d2: f64 = field
                .probes
                .row(i)
                .iter()
                .zip(field.probes.row(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            if d2.sqrt() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &i in &active {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Prints one `PASS`/`FAIL` line for an acceptance criterion and returns
/// whether it passed.
pub fn report(id: u32, name: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!(
        "[{}] criterion {id:>2} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counting_known_values() {
        assert_eq!(pair_counting_ari(&[0, 0, 1, 1], &[1, 1, 0, 0]), Some(1.0));
        assert_eq!(pair_counting_ari(&[0, 0, 0], &[0, 0, 0]), None);
        // ss=1 sd=1 ds=2 dd=2: 2(1*2 - 1*2) = 0
        assert_eq!(pair_counting_ari(&[0, 0, 1, 1], &[0, 0, 0, 1]), Some(0.0));
    }

    #[test]
    fn labelings_enumerated() {
        let all = all_labelings(3, 2);
        assert_eq!(all.len(), 8);
        assert_eq!(all[5], vec![1, 0, 1]);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        assert!((ks_critical(100, 0.05) - 0.1358).abs() < 1e-4);
    }
}
