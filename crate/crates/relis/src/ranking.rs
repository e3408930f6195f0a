//! Rank statistics: the counting rank function σ, Spearman's ρ between
//! rankings, and NDCG over the top fraction of candidates.

use crate::error::{RelisError, Result};

/// A ranking over candidates. `ranks[i]` is the number of candidates whose
/// score is less than or equal to candidate `i`'s, counting `i` itself, so
/// the strict-best candidate carries rank = candidate count and tied
/// candidates share the higher count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    pub ranks: Vec<usize>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// Convert raw scores to counting ranks: `ranks[i] = |{j : scores[j] ≤
/// scores[i]}|`. Sorting makes this O(n log n); tied scores all receive
/// the group's highest count.
pub fn ranking_from_scores(scores: &[f64]) -> Result<Ranking> {
    if scores.is_empty() {
        return Err(RelisError::Input("cannot rank an empty score list".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(RelisError::Input("NaN score in ranking input".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut ranks = vec![0usize; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // positions i..=j hold equal scores; all count j+1 items ≤ them
        for &idx in &order[i..=j] {
            ranks[idx] = j + 1;
        }
        i = j + 1;
    }
    Ok(Ranking { ranks })
}

/// Spearman's ρ between two rankings of the same candidates: the Pearson
/// correlation of the rank vectors. Returns `Ok(None)` when either ranking
/// has zero variance (all candidates tied), where the coefficient is
/// undefined.
pub fn spearman_rho(a: &Ranking, b: &Ranking) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(RelisError::Input(format!(
            "rankings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(RelisError::Input("need at least two candidates".into()));
    }
    let n = a.len() as f64;
    let mean_a = a.ranks.iter().sum::<usize>() as f64 / n;
    let mean_b = b.ranks.iter().sum::<usize>() as f64 / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&ra, &rb) in a.ranks.iter().zip(&b.ranks) {
        let da = ra as f64 - mean_a;
        let db = rb as f64 - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (var_a * var_b).sqrt()))
}

/// Convenience: rank two score lists and correlate the rankings.
pub fn spearman_from_scores(truth: &[f64], predicted: &[f64]) -> Result<Option<f64>> {
    spearman_rho(
        &ranking_from_scores(truth)?,
        &ranking_from_scores(predicted)?,
    )
}

/// Indices sorted by score descending; ties keep ascending index order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order
}

/// NDCG over the top `fraction` of candidates.
///
/// Gains are the min–max-normalised truth scores. With `k = max(1,
/// floor(fraction·N))`, `DCG = Σ_{i=1..k} gain(predicted rank i) /
/// log2(i+1)` and `IDCG` uses the truth ordering; the result is
/// `DCG / IDCG`, defined as 1 when `IDCG = 0` (no gain to recover).
pub fn ndcg_top_fraction(truth: &[f64], predicted: &[f64], fraction: f64) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(RelisError::Input(format!(
            "score lists differ in length: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(RelisError::Input(
            "cannot evaluate NDCG on no candidates".into(),
        ));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RelisError::Input(format!(
            "fraction must lie in (0,1], got {fraction}"
        )));
    }
    if truth.iter().chain(predicted).any(|s| s.is_nan()) {
        return Err(RelisError::Input("NaN score in NDCG input".into()));
    }

    let min = truth.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gain = |i: usize| -> f64 {
        if max == min {
            0.0
        } else {
            (truth[i] - min) / (max - min)
        }
    };

    let k = ((fraction * truth.len() as f64).floor() as usize).max(1);
    let discounted = |order: &[usize]| -> f64 {
        order
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &idx)| gain(idx) / ((i + 2) as f64).log2())
            .sum()
    };
    let dcg = discounted(&descending_order(predicted));
    let idcg = discounted(&descending_order(truth));
    if idcg == 0.0 {
        Ok(1.0)
    } else {
        Ok(dcg / idcg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ranks_count_weakly_worse_candidates() {
        let r = ranking_from_scores(&[0.1, 0.3, 0.3, 0.5]).unwrap();
        assert_eq!(r.ranks, [1, 3, 3, 4]);
    }

    #[test]
    fn singleton_ranks_one() {
        assert_eq!(ranking_from_scores(&[7.0]).unwrap().ranks, [1]);
    }

    #[test]
    fn total_tie_all_share_count() {
        let r = ranking_from_scores(&[2.0, 2.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.ranks, [5, 5, 5, 5, 5]);
    }

    #[test]
    fn nan_score_rejected() {
        assert!(matches!(
            ranking_from_scores(&[1.0, f64::NAN]).unwrap_err(),
            RelisError::Input(_)
        ));
    }

    #[test]
    fn spearman_identical_is_one() {
        let r = ranking_from_scores(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(spearman_rho(&r, &r).unwrap(), Some(1.0));
    }

    #[test]
    fn spearman_reversed_is_minus_one() {
        let a = ranking_from_scores(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = ranking_from_scores(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(spearman_rho(&a, &b).unwrap(), Some(-1.0));
    }

    #[test]
    fn spearman_hand_computed_case() {
        let a = Ranking {
            ranks: vec![1, 2, 3, 4],
        };
        let b = Ranking {
            ranks: vec![2, 1, 3, 4],
        };
        let rho = spearman_rho(&a, &b).unwrap().unwrap();
        assert!((rho - 0.8).abs() < 1e-12);
    }

    #[test]
    fn spearman_zero_variance_is_degenerate() {
        let a = Ranking {
            ranks: vec![3, 3, 3],
        };
        let b = Ranking {
            ranks: vec![1, 2, 3],
        };
        assert_eq!(spearman_rho(&a, &b).unwrap(), None);
    }

    #[test]
    fn spearman_length_mismatch_is_input_error() {
        let a = Ranking { ranks: vec![1, 2] };
        let b = Ranking {
            ranks: vec![1, 2, 3],
        };
        assert!(matches!(
            spearman_rho(&a, &b).unwrap_err(),
            RelisError::Input(_)
        ));
    }

    #[test]
    fn ndcg_perfect_prediction_is_one() {
        let truth = [0.2, 0.9, 0.4, 0.7];
        assert_eq!(ndcg_top_fraction(&truth, &truth, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_top_one_percent_picks_single_best() {
        let mut truth = vec![0.0; 100];
        truth[37] = 1.0;
        let mut predicted = vec![0.5; 100];
        predicted[37] = 9.0;
        // k = floor(0.01 * 100) = 1 and the prediction puts the true best first
        assert_eq!(ndcg_top_fraction(&truth, &predicted, 0.01).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_hand_computed_case() {
        // truth [3,2,1,0] vs predicted [0,1,2,3], fraction 0.5 → k = 2.
        // gains [1, 2/3, 1/3, 0]; DCG = (1/3)/log2(3); IDCG = 1 + (2/3)/log2(3).
        let got = ndcg_top_fraction(&[3.0, 2.0, 1.0, 0.0], &[0.0, 1.0, 2.0, 3.0], 0.5).unwrap();
        assert!((got - 0.1480409554829326).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn ndcg_flat_truth_is_one() {
        let truth = [1.0, 1.0, 1.0];
        let predicted = [0.3, 0.2, 0.1];
        assert_eq!(ndcg_top_fraction(&truth, &predicted, 1.0).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn ranking_invariant_under_increasing_transform(
            scores in proptest::collection::vec(-100.0f64..100.0, 1..30)
        ) {
            let base = ranking_from_scores(&scores).unwrap();
            // exp(x/50) is strictly increasing and keeps ties exactly
            let transformed: Vec<f64> = scores.iter().map(|s| (s / 50.0).exp()).collect();
            let after = ranking_from_scores(&transformed).unwrap();
            prop_assert_eq!(base, after);
        }

        #[test]
        fn spearman_is_symmetric(
            xs in proptest::collection::vec(0u8..5, 2..20),
            ys in proptest::collection::vec(0u8..5, 2..20),
        ) {
            let n = xs.len().min(ys.len());
            let a = ranking_from_scores(&xs[..n].iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
            let b = ranking_from_scores(&ys[..n].iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap();
            let ab = spearman_rho(&a, &b).unwrap();
            let ba = spearman_rho(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn ndcg_stays_in_unit_interval(
            truth in proptest::collection::vec(-10.0f64..10.0, 1..25),
            seed_pred in proptest::collection::vec(-10.0f64..10.0, 1..25),
            fraction in 0.01f64..1.0,
        ) {
            let n = truth.len().min(seed_pred.len());
            let v = ndcg_top_fraction(&truth[..n], &seed_pred[..n], fraction).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }
}
