//! Sweeps observation sequences and measures how far a CRF's posterior is
//! from a hidden Markov chain's.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::crf::CrfModel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hmc::HmcModel;
use crate::oracle::{
    check_budget, compare_posteriors, decode_index, enumerate_crf_posterior, enumerate_hmc_posterior, sequence_count,
    OracleConfig, DEFAULT_BUDGET,
};
use crate::tables::ObsSeq;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    /// Cap on both `|Λ|^N` (exhaustive sweep) and `|Ω|^N` (per-`y` oracle).
    pub budget: u64,
    pub tolerance: f64,
    /// Check this many random observation sequences instead of all of them.
    pub samples: Option<usize>,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            tolerance: DEFAULT_TOLERANCE,
            samples: None,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub observations_checked: usize,
    /// Observation sequences that both models give zero probability.
    pub zero_evidence: usize,
    pub sampled: bool,
    /// Whether full-sequence posteriors were enumerated.
    pub oracle_used: bool,
    /// Largest discrepancy over marginals and, when enumerated, full sequences.
    pub max_discrepancy: f64,
    pub max_marginal_discrepancy: f64,
    pub max_sequence_discrepancy: Option<f64>,
    pub worst_observation: Option<Vec<String>>,
    pub worst_position: Option<usize>,
    pub worst_sequence: Option<Vec<String>>,
    pub tolerance: f64,
    pub passed: bool,
}

struct Outcome {
    marginal: f64,
    sequence: Option<f64>,
    position: Option<usize>,
    worst_sequence: Option<Vec<usize>>,
    zero: bool,
}

impl Outcome {
    fn score(&self) -> f64 {
        self.marginal.max(self.sequence.unwrap_or(0.0))
    }
}

fn check_one(crf: &CrfModel, hmc: &HmcModel, y: &ObsSeq, oracle: Option<&OracleConfig>) -> Result<Outcome> {
    let p = crf.posterior_marginals(y);
    let q = hmc.posterior_marginals(y);
    let (p, q) = match (p, q) {
        (Err(Error::DegenerateModel(_)), Err(Error::ImpossibleObservation)) => {
            return Ok(Outcome {
                marginal: 0.0,
                sequence: None,
                position: None,
                worst_sequence: None,
                zero: true,
            })
        }
        // Exactly one side assigns zero mass to `y`.
        (Err(Error::DegenerateModel(_)), Ok(_)) | (Ok(_), Err(Error::ImpossibleObservation)) => {
            return Ok(Outcome {
                marginal: 1.0,
                sequence: oracle.map(|_| 1.0),
                position: None,
                worst_sequence: None,
                zero: false,
            })
        }
        (p, q) => (p?, q?),
    };
    let mut marginal: f64 = 0.0;
    let mut position = 0;
    for n in 0..p.len() {
        let d = p
            .probabilities(n)
            .iter()
            .zip(q.probabilities(n))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if d > marginal {
            marginal = d;
            position = n;
        }
    }
    let (sequence, worst_sequence) = match oracle {
        Some(config) => {
            let a = enumerate_crf_posterior(crf, y, config)?;
            let b = enumerate_hmc_posterior(hmc, y, config)?;
            let cmp = compare_posteriors(&a, &b)?;
            (Some(cmp.max_abs_diff), Some(cmp.worst_sequence.into_vec()))
        }
        None => (None, None),
    };
    Ok(Outcome {
        marginal,
        sequence,
        position: Some(position),
        worst_sequence,
        zero: false,
    })
}

/// Compares `p(x | y)` of `crf` against `q(x | y)` of `hmc` over every
/// observation sequence, or over `samples` random ones.
pub fn verify_equivalence(crf: &CrfModel, hmc: &HmcModel, config: &VerifyConfig) -> Result<VerifyReport> {
    if crf.hidden() != hmc.hidden() || crf.obs() != hmc.obs() || crf.len() != hmc.len() {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "{} hidden, {} observed, length {}",
                crf.hidden().len(),
                crf.obs().len(),
                crf.len()
            ),
            found: format!(
                "{} hidden, {} observed, length {}",
                hmc.hidden().len(),
                hmc.obs().len(),
                hmc.len()
            ),
        });
    }
    let (k, m, n) = (crf.hidden().len(), crf.obs().len(), crf.len());

    let observations: Vec<ObsSeq> = match config.samples {
        Some(count) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..count)
                .map(|_| ObsSeq::new((0..n).map(|_| rng.gen_range(0..m)).collect()))
                .collect()
        }
        None => {
            let count = check_budget(m, n, config.budget)?;
            check_budget(k, n, config.budget)?;
            (0..count)
                .map(|code| {
                    let mut y = vec![0; n];
                    decode_index(code, m, &mut y);
                    ObsSeq::new(y)
                })
                .collect()
        }
    };

    let oracle_used = sequence_count(k, n) <= config.budget as u128;
    // The sweep is already parallel over `y`; the inner oracle stays sequential.
    let inner = OracleConfig {
        budget: config.budget,
        exec: Exec::Sequential,
    };
    let oracle = oracle_used.then_some(&inner);
    let outcomes = config
        .exec
        .map_range(observations.len(), |i| check_one(crf, hmc, &observations[i], oracle))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut worst: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if worst.is_none_or(|w| o.score() > outcomes[w].score()) {
            worst = Some(i);
        }
    }
    let max_marginal = outcomes.iter().map(|o| o.marginal).fold(0.0, f64::max);
    let max_sequence = oracle_used.then(|| outcomes.iter().filter_map(|o| o.sequence).fold(0.0, f64::max));
    let max_discrepancy = max_marginal.max(max_sequence.unwrap_or(0.0));

    let symbols = |alphabet: &crate::tables::Alphabet, seq: &[usize]| -> Vec<String> {
        seq.iter().map(|&i| alphabet.symbols()[i].clone()).collect()
    };
    let worst_outcome = worst.map(|w| (&observations[w], &outcomes[w]));
    Ok(VerifyReport {
        observations_checked: observations.len(),
        zero_evidence: outcomes.iter().filter(|o| o.zero).count(),
        sampled: config.samples.is_some(),
        oracle_used,
        max_discrepancy,
        max_marginal_discrepancy: max_marginal,
        max_sequence_discrepancy: max_sequence,
        worst_observation: worst_outcome.map(|(y, _)| symbols(crf.obs(), y)),
        worst_position: worst_outcome.and_then(|(_, o)| o.position),
        worst_sequence: worst_outcome.and_then(|(_, o)| o.worst_sequence.as_deref().map(|x| symbols(crf.hidden(), x))),
        tolerance: config.tolerance,
        passed: max_discrepancy <= config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::Mode;
    use crate::equivalence::crf_to_hmc;
    use crate::tables::{Alphabet, Table1, Table2};

    fn fixture() -> CrfModel {
        let h = Alphabet::numbered("h", 3).unwrap();
        let o = Alphabet::numbered("o", 2).unwrap();
        let v = Table2::from_rows(vec![vec![0.5, -1.0, 2.0], vec![0.0, 1.5, -0.5], vec![-2.0, 0.25, 1.0]]).unwrap();
        let u = Table2::from_rows(vec![vec![1.0, -1.0], vec![0.0, 0.5], vec![-0.75, 2.0]]).unwrap();
        CrfModel::tiled(h, o, 4, v, u, Mode::Strict).unwrap()
    }

    #[test]
    fn uniform_crf_has_zero_discrepancy() {
        let crf = CrfModel::uniform(
            Alphabet::numbered("h", 2).unwrap(),
            Alphabet::numbered("o", 2).unwrap(),
            3,
        )
        .unwrap();
        let (hmc, _) = crf_to_hmc(&crf).unwrap();
        let report = verify_equivalence(&crf, &hmc, &VerifyConfig::default()).unwrap();
        assert_eq!(report.max_discrepancy, 0.0);
        assert_eq!(report.observations_checked, 8);
        assert!(report.passed);
    }

    #[test]
    fn fixture_passes_exhaustively_and_sampled() {
        let crf = fixture();
        let (hmc, _) = crf_to_hmc(&crf).unwrap();
        let report = verify_equivalence(&crf, &hmc, &VerifyConfig::default()).unwrap();
        assert!(report.oracle_used);
        assert!(report.max_discrepancy <= 1e-10, "{report:?}");
        let sampled = verify_equivalence(
            &crf,
            &hmc,
            &VerifyConfig {
                samples: Some(5),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(sampled.sampled && sampled.passed);
        assert_eq!(sampled.observations_checked, 5);
    }

    #[test]
    fn corrupted_chain_fails() {
        let crf = fixture();
        let (hmc, _) = crf_to_hmc(&crf).unwrap();
        let bad = HmcModel::from_log_tables(
            hmc.hidden().clone(),
            hmc.obs().clone(),
            Table1::filled(3, -(3f64.ln())).unwrap(),
            hmc.trans().to_vec(),
            hmc.emit().to_vec(),
        )
        .unwrap();
        let report = verify_equivalence(&crf, &bad, &VerifyConfig::default()).unwrap();
        assert!(!report.passed);
        assert!(report.max_discrepancy > 1e-3);
        assert!(report.worst_observation.is_some() && report.worst_position.is_some());
    }

    #[test]
    fn budget_and_shape_errors() {
        let crf = fixture();
        let (hmc, _) = crf_to_hmc(&crf).unwrap();
        let tight = VerifyConfig {
            budget: 10,
            ..Default::default()
        };
        assert!(matches!(
            verify_equivalence(&crf, &hmc, &tight),
            Err(Error::BudgetExceeded { .. })
        ));
        let sampled = verify_equivalence(
            &crf,
            &hmc,
            &VerifyConfig {
                samples: Some(3),
                ..tight
            },
        )
        .unwrap();
        assert!(!sampled.oracle_used && sampled.passed);

        let other = CrfModel::uniform(crf.hidden().clone(), crf.obs().clone(), 3).unwrap();
        assert!(matches!(
            verify_equivalence(&other, &hmc, &VerifyConfig::default()),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
