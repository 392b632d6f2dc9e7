//! External clustering scores and centroid matching.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::local::nearest_centroid;
use crate::points::Points;
use crate::scalar::{distance, Scalar};

/// Counts `n_ij` of points with true class `i` and predicted cluster `j`.
///
/// Label ids are remapped to dense indices in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl ContingencyTable {
    pub fn new(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: pred.len(),
            });
        }
        let (t, rows) = dense(truth);
        let (p, cols) = dense(pred);
        let mut counts = vec![vec![0usize; cols]; rows];
        for (&i, &j) in t.iter().zip(&p) {
            counts[i][j] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cols)
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: truth.len(),
        })
    }
}

/// Nearest-centroid labels; ties go to the lower centroid index.
pub fn assign<T: Scalar>(points: &Points<T>, centroids: &Points<T>) -> Result<Vec<usize>> {
    if centroids.is_empty() {
        return Err(Error::Empty("centroids"));
    }
    if points.dim() != centroids.dim() {
        return Err(Error::DimensionMismatch {
            expected: centroids.dim(),
            found: points.dim(),
        });
    }
    Ok(points
        .rows()
        .map(|p| nearest_centroid(p, centroids).0)
        .collect())
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand Index.
///
/// Returns [`Error::Undefined`] when the adjustment degenerates to `0/0`,
/// which happens when both labelings are constant or both are all-singletons.
pub fn ari(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.len() < 2 {
        return Err(Error::InvalidInput("ARI needs at least two points".into()));
    }
    let table = ContingencyTable::new(truth, pred)?;
    let index: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: f64 = table.row_sums.iter().map(|&c| pairs(c)).sum();
    let b: f64 = table.col_sums.iter().map(|&c| pairs(c)).sum();
    let expected = a * b / pairs(table.n);
    let denom = 0.5 * (a + b) - expected;
    if denom == 0.0 {
        return Err(Error::Undefined(
            "ARI of two constant or two all-singleton labelings",
        ));
    }
    Ok((index - expected) / denom)
}

fn entropy(sums: &[usize], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with the geometric-mean normalizer.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("labelings"));
    }
    let table = ContingencyTable::new(truth, pred)?;
    let n = table.n as f64;
    let ht = entropy(&table.row_sums, n);
    let hp = entropy(&table.col_sums, n);
    if ht == 0.0 && hp == 0.0 {
        return Ok(1.0);
    }
    if ht == 0.0 || hp == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (table.row_sums[i] as f64 * table.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (ht * hp).sqrt()).clamp(0.0, 1.0))
}

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns `assignment[row] = col`. Shortest augmenting paths with
/// potentials, `O(n^3)`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

/// Mean Euclidean distance under the optimal one-to-one matching.
pub fn centroid_error<T: Scalar>(estimated: &Points<T>, reference: &Points<T>) -> Result<T> {
    if estimated.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: estimated.len(),
            right: reference.len(),
        });
    }
    if estimated.is_empty() {
        return Err(Error::Empty("centroid list"));
    }
    if estimated.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            found: estimated.dim(),
        });
    }
    let cost: Vec<Vec<f64>> = estimated
        .rows()
        .map(|e| reference.rows().map(|r| distance(e, r).as_f64()).collect())
        .collect();
    let matching = hungarian(&cost);
    let total: T = matching
        .iter()
        .enumerate()
        .map(|(i, &j)| distance(estimated.row(i), reference.row(j)))
        .sum();
    Ok(total / T::of_usize(estimated.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pair-counting definition, independent of the contingency table.
    fn ari_by_pairs(t: &[usize], p: &[usize]) -> Option<f64> {
        let n = t.len();
        let (mut both, mut same_t, mut same_p) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let st = t[i] == t[j];
                let sp = p[i] == p[j];
                same_t += st as u8 as f64;
                same_p += sp as u8 as f64;
                both += (st && sp) as u8 as f64;
            }
        }
        let total = (n * (n - 1) / 2) as f64;
        let expected = same_t * same_p / total;
        let denom = 0.5 * (same_t + same_p) - expected;
        (denom != 0.0).then(|| (both - expected) / denom)
    }

    fn labelings(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|l| (0..k).map(move |x| [l.clone(), vec![x]].concat()))
                .collect();
        }
        out
    }

    #[test]
    fn assign_examples() {
        let pts = Points::from_rows(&[[-4.0], [4.0], [0.0]]).unwrap();
        let one = Points::from_rows(&[[1.0]]).unwrap();
        assert_eq!(assign(&pts, &one).unwrap(), vec![0, 0, 0]);
        let two = Points::from_rows(&[[-5.0], [5.0]]).unwrap();
        assert_eq!(assign(&pts, &two).unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1, 2], &[5, 5, 3, 3, 9]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0, 0, 1, 1, 1, 1], &[0; 8]).unwrap(), 0.0);
        let t = [0, 0, 1, 1];
        let p = [0, 1, 1, 1];
        assert!((ari(&t, &p).unwrap() - ari_by_pairs(&t, &p).unwrap()).abs() < 1e-12);
        assert!(matches!(
            ari(&[1, 1, 1], &[2, 2, 2]),
            Err(Error::Undefined(_))
        ));
        assert!(matches!(
            ari(&[1, 2], &[1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ari_matches_pair_counting_exhaustively() {
        for n in 2..=6 {
            let all = labelings(n, 3);
            for t in &all {
                for p in &all {
                    match (ari(t, p), ari_by_pairs(t, p)) {
                        (Ok(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{t:?} {p:?}"),
                        (Err(Error::Undefined(_)), None) => {}
                        other => panic!("{t:?} {p:?}: {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1, 2, 2], &[1, 1, 0, 0, 2, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        // Table {{2,0},{1,1}}: H_T = ln 2, H_P = H(3/4, 1/4).
        let ln = f64::ln;
        let ht = ln(2.0);
        let hp = -(0.75 * ln(0.75) + 0.25 * ln(0.25));
        let mi = 0.5 * ln(0.5 / (0.5 * 0.75))
            + 0.25 * ln(0.25 / (0.5 * 0.75))
            + 0.25 * ln(0.25 / (0.5 * 0.25));
        let want = mi / (ht * hp).sqrt();
        assert!((nmi(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap() - want).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 1, 0], &[1, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            permutations(n - 1)
                .into_iter()
                .flat_map(|p| {
                    (0..n).map(move |pos| {
                        let mut q = p.clone();
                        q.insert(pos, n - 1);
                        q
                    })
                })
                .collect()
        }
        let mut rng = crate::rng::seeded(8);
        for n in 1..=6 {
            let perms = permutations(n);
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
                    .collect();
                let total =
                    |a: &[usize]| a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
                let best = perms.iter().map(|p| total(p)).fold(f64::INFINITY, f64::min);
                assert!((total(&hungarian(&cost)) - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn centroid_error_examples() {
        let r = Points::from_rows(&[[0.0], [10.0]]).unwrap();
        assert_eq!(centroid_error(&r, &r).unwrap(), 0.0);
        let swapped = Points::from_rows(&[[10.0], [0.0]]).unwrap();
        assert_eq!(centroid_error(&swapped, &r).unwrap(), 0.0);
        let e = Points::from_rows(&[[11.0], [1.0]]).unwrap();
        assert!((centroid_error::<f64>(&e, &r).unwrap() - 1.0).abs() < 1e-12);
        assert!(centroid_error(&e, &Points::from_rows(&[[1.0]]).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn ari_symmetric_and_relabel_invariant(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 2..40),
            shift in 1usize..10,
        ) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let relabeled: Vec<usize> = p.iter().map(|&x| (3 - x) * shift).collect();
            match (ari(&t, &p), ari(&p, &t), ari(&t, &relabeled)) {
                (Ok(a), Ok(b), Ok(c)) => {
                    prop_assert!((a - b).abs() < 1e-12);
                    prop_assert!((a - c).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0 + 1e-12).contains(&a));
                }
                (Err(_), Err(_), Err(_)) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }

        #[test]
        fn nmi_in_unit_interval(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let v = nmi(&t, &p).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }

        #[test]
        fn centroid_error_permutation_invariant(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 1..7),
            other in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 7),
            rot in 0usize..7,
        ) {
            let a = Points::from_rows(&rows).unwrap();
            let b = Points::from_rows(&other[..rows.len()]).unwrap();
            let mut shuffled = rows.clone();
            let len = shuffled.len();
            shuffled.rotate_left(rot % len);
            let a2 = Points::from_rows(&shuffled).unwrap();
            prop_assert!((centroid_error(&a, &b).unwrap() - centroid_error(&a2, &b).unwrap()).abs() < 1e-9);
            prop_assert!(centroid_error(&a2, &a).unwrap() < 1e-12);
        }
    }
}
