//! Exhaustive enumeration of `Ω^N` for small instances.
//!
//! The oracle scores every label sequence straight from the model definition,
//! shifts by the global maximum and normalizes with compensated summation.
//! Scoring may run in parallel; the summation always runs in sequence order,
//! so the result does not depend on [`Exec`].

use crate::crf::CrfModel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hmc::HmcModel;
use crate::tables::{CompensatedSum, LabelSeq, LogValue, ObsSeq};

/// Default cap on the number of enumerated label sequences.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub budget: u64,
    pub exec: Exec,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            exec: Exec::default(),
        }
    }
}

/// `size^len`, saturating.
pub fn sequence_count(size: usize, len: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..len {
        total = total.saturating_mul(size as u128);
    }
    total
}

pub(crate) fn check_budget(size: usize, len: usize, budget: u64) -> Result<usize> {
    let needed = sequence_count(size, len);
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(needed as usize)
}

/// Writes the base-`size` digits of `code` into `out`, first position most
/// significant.
pub fn decode_index(mut code: usize, size: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = code % size;
        code /= size;
    }
}

/// A posterior over every label sequence for one fixed observation sequence,
/// stored densely in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedPosterior {
    states: usize,
    len: usize,
    probs: Vec<f64>,
    total: f64,
}

impl EnumeratedPosterior {
    pub fn states(&self) -> usize {
        self.states
    }

    /// Sequence length `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probabilities in enumeration order, zeros included.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Sum of all entries after normalization.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of sequences with nonzero probability.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }

    pub fn prob(&self, x: &LabelSeq) -> f64 {
        let code = x.iter().fold(0, |acc, &v| acc * self.states + v);
        self.probs[code]
    }

    /// Nonzero entries with their label sequences.
    pub fn entries(&self) -> impl Iterator<Item = (LabelSeq, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(code, &p)| {
                let mut x = vec![0; self.len];
                decode_index(code, self.states, &mut x);
                (LabelSeq::new(x), p)
            })
    }

    /// `p(x_n = x)` obtained by summing out every other position.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut acc = vec![vec![CompensatedSum::default(); self.states]; self.len];
        let mut x = vec![0; self.len];
        for (code, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode_index(code, self.states, &mut x);
            for (pos, &xn) in x.iter().enumerate() {
                acc[pos][xn].add(p);
            }
        }
        acc.into_iter()
            .map(|row| row.into_iter().map(|s| s.total()).collect())
            .collect()
    }

    /// Position-wise argmax of [`Self::marginals`], lowest index on ties.
    pub fn mpm_labels(&self) -> LabelSeq {
        LabelSeq::new(self.marginals().iter().map(|r| crate::tables::argmax(r)).collect())
    }
}

fn score_all<F>(states: usize, len: usize, count: usize, exec: Exec, score: F) -> Vec<LogValue>
where
    F: Fn(&[usize]) -> LogValue + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK);
    exec.map_range(chunks, |c| {
        let mut x = vec![0; len];
        let start = c * CHUNK;
        let end = (start + CHUNK).min(count);
        (start..end)
            .map(|code| {
                decode_index(code, states, &mut x);
                score(&x)
            })
            .collect::<Vec<_>>()
    })
    .concat()
}

fn normalize_scores(states: usize, len: usize, scores: Vec<LogValue>) -> Option<EnumeratedPosterior> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z = weights.iter().copied().collect::<CompensatedSum>().total();
    let probs: Vec<f64> = weights.into_iter().map(|w| w / z).collect();
    let total = probs.iter().copied().collect::<CompensatedSum>().total();
    Some(EnumeratedPosterior {
        states,
        len,
        probs,
        total,
    })
}

/// `p(x | y)` for every `x`, straight from the CRF's potentials.
pub fn enumerate_crf_posterior(model: &CrfModel, y: &ObsSeq, config: &OracleConfig) -> Result<EnumeratedPosterior> {
    model.check_obs(y)?;
    let (k, n) = (model.hidden().len(), model.len());
    let count = check_budget(k, n, config.budget)?;
    let scores = score_all(k, n, count, config.exec, |x| model.log_score_unchecked(x, y));
    normalize_scores(k, n, scores).ok_or_else(|| {
        Error::DegenerateModel("every label sequence has zero weight for this observation sequence".into())
    })
}

/// `q(x | y)` for every `x`, from the chain's joint divided by the enumerated
/// evidence.
pub fn enumerate_hmc_posterior(model: &HmcModel, y: &ObsSeq, config: &OracleConfig) -> Result<EnumeratedPosterior> {
    y.check(model.len(), model.obs().len())?;
    let (k, n) = (model.hidden().len(), model.len());
    let count = check_budget(k, n, config.budget)?;
    let scores = score_all(k, n, count, config.exec, |x| model.log_joint_unchecked(x, y));
    normalize_scores(k, n, scores).ok_or(Error::ImpossibleObservation)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorComparison {
    /// Largest `|a(x) - b(x)|` over every label sequence.
    pub max_abs_diff: f64,
    /// The first sequence attaining `max_abs_diff`.
    pub worst_sequence: LabelSeq,
    /// Per position, the largest `|a(x_n) - b(x_n)|` between the marginals.
    pub marginal_diffs: Vec<f64>,
}

impl PosteriorComparison {
    pub fn max_marginal_diff(&self) -> f64 {
        self.marginal_diffs.iter().copied().fold(0.0, f64::max)
    }
}

pub fn compare_posteriors(a: &EnumeratedPosterior, b: &EnumeratedPosterior) -> Result<PosteriorComparison> {
    if a.states != b.states || a.len != b.len {
        return Err(Error::ShapeMismatch {
            expected: format!("{} states x {} positions", a.states, a.len),
            found: format!("{} states x {} positions", b.states, b.len),
        });
    }
    let mut worst = 0;
    let mut max_abs_diff: f64 = 0.0;
    for (code, (p, q)) in a.probs.iter().zip(&b.probs).enumerate() {
        let d = (p - q).abs();
        if d > max_abs_diff {
            max_abs_diff = d;
            worst = code;
        }
    }
    let mut worst_sequence = vec![0; a.len];
    decode_index(worst, a.states, &mut worst_sequence);
    let marginal_diffs = a
        .marginals()
        .iter()
        .zip(b.marginals())
        .map(|(ra, rb)| ra.iter().zip(&rb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
        .collect();
    Ok(PosteriorComparison {
        max_abs_diff,
        worst_sequence: LabelSeq::new(worst_sequence),
        marginal_diffs,
    })
}
