//! Preference-pair construction from scored candidates: rank by score, take
//! the top block as chosen and a tail block (or an explicit rank window) as
//! rejected, and emit the strictly-ordered cross product.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How preference pairs are cut from the ranked candidate list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairPolicy {
    /// Candidates sampled per prompt (M).
    pub samples_per_prompt: usize,
    /// Chosen block: the best `top_n` ranks.
    pub top_n: usize,
    /// Rejected block: the worst `last_n` ranks, unless overridden.
    pub last_n: usize,
    /// Optional 0-based half-open rank window [lo, hi) into the descending
    /// ranking, replacing the `last_n` tail.
    pub negative_range: Option<(usize, usize)>,
}

impl Default for PairPolicy {
    fn default() -> Self {
        PairPolicy {
            samples_per_prompt: 30,
            top_n: 10,
            last_n: 10,
            negative_range: None,
        }
    }
}

impl PairPolicy {
    /// The rejected rank window as a 0-based half-open interval.
    pub fn rejected_window(&self) -> (usize, usize) {
        self.negative_range
            .unwrap_or((self.samples_per_prompt - self.last_n, self.samples_per_prompt))
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.samples_per_prompt;
        if m == 0 || self.top_n == 0 {
            return Err(Error::InvalidConfig(
                "samples_per_prompt and top_n must be positive".into(),
            ));
        }
        let (lo, hi) = match self.negative_range {
            Some((lo, hi)) => {
                if lo >= hi {
                    return Err(Error::InvalidConfig(format!(
                        "negative_range must be a non-empty window, got ({lo}, {hi})"
                    )));
                }
                (lo, hi)
            }
            None => {
                if self.last_n == 0 {
                    return Err(Error::InvalidConfig("last_n must be positive".into()));
                }
                (m.saturating_sub(self.last_n), m)
            }
        };
        if hi > m {
            return Err(Error::InvalidConfig(format!(
                "rejected window ({lo}, {hi}) exceeds samples_per_prompt {m}"
            )));
        }
        if self.top_n > lo {
            return Err(Error::InvalidConfig(format!(
                "chosen ranks 0..{} overlap rejected ranks {lo}..{hi}",
                self.top_n
            )));
        }
        Ok(())
    }
}

/// One chosen/rejected pair with the scores that ordered it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair<R> {
    pub chosen: R,
    pub rejected: R,
    pub chosen_score: f64,
    pub rejected_score: f64,
}

/// Core pairing rule over scores alone. Returns candidate index pairs
/// (chosen, rejected). All-equal scores produce an empty list, which callers
/// treat as a signal rather than an error.
pub fn build_pair_indices(policy: &PairPolicy, scores: &[f64]) -> Result<Vec<(usize, usize)>> {
    policy.validate()?;
    if scores.len() != policy.samples_per_prompt {
        return Err(Error::CandidateCount {
            expected: policy.samples_per_prompt,
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            context: "candidate scores",
        });
    }
    // Rank descending by score; ties break by candidate index ascending.
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores checked finite")
            .then(a.cmp(&b))
    });
    let (lo, hi) = policy.rejected_window();
    let mut pairs = Vec::with_capacity(policy.top_n * (hi - lo));
    for &c in &ranked[..policy.top_n] {
        for &r in &ranked[lo..hi] {
            // Preference training needs a strict ordering; equal-score pairs
            // carry no signal and are dropped.
            if scores[c] > scores[r] {
                pairs.push((c, r));
            }
        }
    }
    Ok(pairs)
}

/// Pairing over (representation, score) candidates, cloning the chosen and
/// rejected representations into the emitted pairs.
pub fn build_pairs<R: Clone>(
    policy: &PairPolicy,
    candidates: &[(R, f64)],
) -> Result<Vec<PreferencePair<R>>> {
    let scores: Vec<f64> = candidates.iter().map(|(_, s)| *s).collect();
    Ok(build_pair_indices(policy, &scores)?
        .into_iter()
        .map(|(c, r)| PreferencePair {
            chosen: candidates[c].0.clone(),
            rejected: candidates[r].0.clone(),
            chosen_score: scores[c],
            rejected_score: scores[r],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn policy(m: usize, top_n: usize, last_n: usize) -> PairPolicy {
        PairPolicy {
            samples_per_prompt: m,
            top_n,
            last_n,
            negative_range: None,
        }
    }

    #[test]
    fn default_policy_emits_one_hundred_pairs() {
        let mut rng = Rng::new(80);
        let scores: Vec<f64> = (0..30).map(|_| rng.next_f64()).collect();
        let pairs = build_pair_indices(&PairPolicy::default(), &scores).unwrap();
        assert_eq!(pairs.len(), 100);
        for (c, r) in pairs {
            assert!(scores[c] > scores[r]);
        }
    }

    #[test]
    fn discrete_default_emits_a_single_pair() {
        let mut rng = Rng::new(81);
        let scores: Vec<f64> = (0..10).map(|_| rng.next_f64()).collect();
        let pairs = build_pair_indices(&policy(10, 1, 1), &scores).unwrap();
        assert_eq!(pairs.len(), 1);
        let (c, r) = pairs[0];
        for &s in &scores {
            assert!(scores[c] >= s, "chosen must be the max");
            assert!(scores[r] <= s, "rejected must be the min");
        }
    }

    #[test]
    fn negative_range_window_reproduces_the_tail_exactly() {
        let mut rng = Rng::new(82);
        let scores: Vec<f64> = (0..30).map(|_| rng.next_f64()).collect();
        let tail = build_pair_indices(&policy(30, 10, 10), &scores).unwrap();
        let windowed = PairPolicy {
            samples_per_prompt: 30,
            top_n: 10,
            last_n: 10,
            negative_range: Some((20, 30)),
        };
        let via_window = build_pair_indices(&windowed, &scores).unwrap();
        assert_eq!(tail, via_window);
    }

    #[test]
    fn ties_rank_by_candidate_index() {
        let scores = [0.5, 0.9, 0.9, 0.1, 0.5, 0.1];
        let pairs = build_pair_indices(&policy(6, 2, 2), &scores).unwrap();
        // Descending ranking: 1, 2, 0, 4, 3, 5.
        assert_eq!(pairs, vec![(1, 3), (1, 5), (2, 3), (2, 5)]);
    }

    #[test]
    fn equal_score_pairs_are_dropped_and_all_equal_gives_empty() {
        let scores = [0.3, 0.3, 0.3, 0.3];
        let pairs = build_pair_indices(&policy(4, 2, 2), &scores).unwrap();
        assert!(pairs.is_empty());
        // A partial tie drops only the flat pairs.
        let scores = [0.5, 0.3, 0.3, 0.3];
        let pairs = build_pair_indices(&policy(4, 2, 2), &scores).unwrap();
        assert_eq!(pairs, vec![(0, 2), (0, 3)]);
    }

    #[test]
    fn candidate_count_mismatch_is_an_error() {
        let scores = [1.0, 0.5];
        assert!(matches!(
            build_pair_indices(&policy(3, 1, 1), &scores),
            Err(Error::CandidateCount {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn invalid_policies_are_rejected() {
        assert!(policy(10, 6, 5).validate().is_err(), "overlapping blocks");
        assert!(policy(10, 0, 1).validate().is_err());
        let bad_window = PairPolicy {
            samples_per_prompt: 10,
            top_n: 2,
            last_n: 1,
            negative_range: Some((8, 12)),
        };
        assert!(bad_window.validate().is_err());
        let overlapping_window = PairPolicy {
            samples_per_prompt: 10,
            top_n: 5,
            last_n: 1,
            negative_range: Some((3, 6)),
        };
        assert!(overlapping_window.validate().is_err());
        let ok_window = PairPolicy {
            samples_per_prompt: 10,
            top_n: 2,
            last_n: 1,
            negative_range: Some((5, 8)),
        };
        assert!(ok_window.validate().is_ok());
    }

    #[test]
    fn representation_pairs_carry_scores_and_payloads() {
        let candidates: Vec<(char, f64)> =
            vec![('a', 0.1), ('b', 0.9), ('c', 0.4), ('d', 0.2)];
        let pairs = build_pairs(&policy(4, 1, 2), &candidates).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|p| p.chosen == 'b'));
        assert!(pairs.iter().all(|p| p.chosen_score > p.rejected_score));
        let rejected: Vec<char> = pairs.iter().map(|p| p.rejected).collect();
        assert_eq!(rejected, vec!['d', 'a']);
    }

    #[test]
    fn non_finite_scores_are_rejected() {
        let scores = [0.2, f64::NAN, 0.4];
        assert!(build_pair_indices(&policy(3, 1, 1), &scores).is_err());
    }
}
