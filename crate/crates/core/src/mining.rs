//! Hard-sample mining: squared-margin scoring, mean-split pooling, and
//! balanced random selection of training ROIs.

use alloc::vec::Vec;

use crate::geom::BBox;
use crate::rng::CounterRng;
use crate::{Error, Result};

/// Squared margin between predicted probability and the true label,
/// `(p' - p)^2`. Larger means harder.
pub fn mining_score(true_label: bool, predicted_prob: f64) -> Result<f64> {
    if !(predicted_prob >= 0.0 && predicted_prob <= 1.0) {
        return Err(Error::InvalidProbability(predicted_prob));
    }
    let target = if true_label { 1.0 } else { 0.0 };
    let d = predicted_prob - target;
    Ok(d * d)
}

/// A proposal with its true label, RPN probability, and mining score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredProposal {
    pub bbox: BBox,
    pub true_label: bool,
    pub predicted_prob: f64,
    mining_score: f64,
}

impl ScoredProposal {
    pub fn new(bbox: BBox, true_label: bool, predicted_prob: f64) -> Result<Self> {
        let mining_score = mining_score(true_label, predicted_prob)?;
        Ok(Self {
            bbox,
            true_label,
            predicted_prob,
            mining_score,
        })
    }

    pub fn mining_score(&self) -> f64 {
        self.mining_score
    }
}

/// Proposals split at the per-class mean mining score, capped per
/// category. `mean_pos_score`/`mean_neg_score` are `None` when the class
/// is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningPool {
    pub easy_pos: Vec<ScoredProposal>,
    pub hard_pos: Vec<ScoredProposal>,
    pub easy_neg: Vec<ScoredProposal>,
    pub hard_neg: Vec<ScoredProposal>,
    pub mean_pos_score: Option<f64>,
    pub mean_neg_score: Option<f64>,
}

impl MiningPool {
    pub fn len(&self) -> usize {
        self.easy_pos.len() + self.hard_pos.len() + self.easy_neg.len() + self.hard_neg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Category union in a fixed order: easy positives, hard positives,
    /// easy negatives, hard negatives.
    pub fn union(&self) -> impl Iterator<Item = &ScoredProposal> {
        self.easy_pos
            .iter()
            .chain(&self.hard_pos)
            .chain(&self.easy_neg)
            .chain(&self.hard_neg)
    }
}

fn split_class(proposals: Vec<ScoredProposal>, cap: usize) -> (Vec<ScoredProposal>, Vec<ScoredProposal>, Option<f64>) {
    if proposals.is_empty() {
        return (Vec::new(), Vec::new(), None);
    }
    let mean = proposals.iter().map(|p| p.mining_score).sum::<f64>() / proposals.len() as f64;
    let (mut hard, mut easy): (Vec<_>, Vec<_>) =
        proposals.into_iter().partition(|p| p.mining_score >= mean);
    // Hardest first inside each category; the cap keeps the top scores.
    // Stable sort, so equal scores stay in input order.
    easy.sort_by(|a, b| b.mining_score.partial_cmp(&a.mining_score).expect("scores in [0,1]"));
    hard.sort_by(|a, b| b.mining_score.partial_cmp(&a.mining_score).expect("scores in [0,1]"));
    easy.truncate(cap);
    hard.truncate(cap);
    (easy, hard, Some(mean))
}

/// Splits each class at its mean mining score (ties go to hard) and caps
/// every category at `per_category_cap`, keeping the highest scores.
pub fn build_pool(proposals: &[ScoredProposal], per_category_cap: usize) -> Result<MiningPool> {
    if proposals.is_empty() {
        return Err(Error::EmptyInput("proposals"));
    }
    let (pos, neg): (Vec<_>, Vec<_>) = proposals.iter().cloned().partition(|p| p.true_label);
    let (easy_pos, hard_pos, mean_pos_score) = split_class(pos, per_category_cap);
    let (easy_neg, hard_neg, mean_neg_score) = split_class(neg, per_category_cap);
    Ok(MiningPool {
        easy_pos,
        hard_pos,
        easy_neg,
        hard_neg,
        mean_pos_score,
        mean_neg_score,
    })
}

/// Draws `n` proposals uniformly without replacement from the pooled
/// categories (all of them when the pool holds at most `n`). Deterministic
/// given the seed: a partial Fisher-Yates shuffle driven by a counter
/// stream.
pub fn sample_training_rois(pool: &MiningPool, n: usize, seed: u64) -> Vec<ScoredProposal> {
    let mut union: Vec<&ScoredProposal> = pool.union().collect();
    if union.len() <= n {
        return union.into_iter().cloned().collect();
    }
    let mut rng = CounterRng::new(seed);
    for i in 0..n {
        let j = i + rng.next_index(union.len() - i);
        union.swap(i, j);
    }
    union[..n].iter().map(|p| (*p).clone()).collect()
}
