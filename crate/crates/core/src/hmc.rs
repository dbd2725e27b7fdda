//! Hidden Markov chains with time-indexed transitions and emissions:
//! `q(x, y) = q_1(x_1) q_1(y_1 | x_1) Π_{n≥2} q_n(x_n | x_{n-1}) q_n(y_n | x_n)`.

use crate::chain::{self, ZeroMass};
use crate::crf::PosteriorMarginals;
use crate::error::{Error, Result};
use crate::tables::{normalized, Alphabet, LabelSeq, LogValue, ObsSeq, Table1, Table2};

/// Largest accepted deviation of a row's probability mass from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HmcModel {
    hidden: Alphabet,
    obs: Alphabet,
    init: Table1,
    trans: Vec<Table2>,
    emit: Vec<Table2>,
}

fn renormalize(row: &[LogValue], what: impl FnOnce() -> String) -> Result<Vec<LogValue>> {
    let sum: f64 = row.iter().map(|v| v.exp()).sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::NotStochastic { what: what(), sum });
    }
    normalized(row)
}

fn renormalize_table(t: &Table2, name: impl Fn(usize) -> String) -> Result<Table2> {
    let mut entries = Vec::with_capacity(t.as_slice().len());
    for (i, row) in t.row_iter().enumerate() {
        entries.extend(renormalize(row, || name(i))?);
    }
    Ok(Table2::from_vec_unchecked(t.rows(), t.cols(), entries))
}

impl HmcModel {
    /// Builds from log-probability tables. `trans[n]` is the transition into
    /// position `n + 1` (0-based) and `emit[n]` the emission at position `n`.
    /// Every row must sum to one within [`ROW_SUM_TOLERANCE`]; rows are then
    /// renormalized exactly.
    pub fn from_log_tables(
        hidden: Alphabet,
        obs: Alphabet,
        init: Table1,
        trans: Vec<Table2>,
        emit: Vec<Table2>,
    ) -> Result<Self> {
        let (k, m) = (hidden.len(), obs.len());
        if emit.is_empty() {
            return Err(Error::LengthMismatch { expected: 1, found: 0 });
        }
        if trans.len() + 1 != emit.len() {
            return Err(Error::LengthMismatch {
                expected: emit.len() - 1,
                found: trans.len(),
            });
        }
        if init.len() != k {
            return Err(Error::ShapeMismatch {
                expected: format!("{k}"),
                found: format!("{}", init.len()),
            });
        }
        for t in &trans {
            t.check_shape(k, k)?;
        }
        for t in &emit {
            t.check_shape(k, m)?;
        }
        let init = Table1::from_vec_unchecked(renormalize(init.as_slice(), || "init".into())?);
        let trans = trans
            .iter()
            .enumerate()
            .map(|(n, t)| renormalize_table(t, |i| format!("trans[{n}] row {i}")))
            .collect::<Result<Vec<_>>>()?;
        let emit = emit
            .iter()
            .enumerate()
            .map(|(n, t)| renormalize_table(t, |i| format!("emit[{n}] row {i}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hidden,
            obs,
            init,
            trans,
            emit,
        })
    }

    /// Builds from probability-domain rows.
    pub fn from_probabilities(
        hidden: Alphabet,
        obs: Alphabet,
        init: &[f64],
        trans: &[Vec<Vec<f64>>],
        emit: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let table = |rows: &Vec<Vec<f64>>| -> Result<Table2> {
            let logs = rows
                .iter()
                .map(|r| Table1::from_probabilities(r).map(Table1::into_vec))
                .collect::<Result<Vec<_>>>()?;
            Table2::from_rows(logs)
        };
        Self::from_log_tables(
            hidden,
            obs,
            Table1::from_probabilities(init)?,
            trans.iter().map(table).collect::<Result<_>>()?,
            emit.iter().map(table).collect::<Result<_>>()?,
        )
    }

    /// Time-homogeneous chain of length `len`.
    pub fn tiled(
        hidden: Alphabet,
        obs: Alphabet,
        len: usize,
        init: Table1,
        trans: Table2,
        emit: Table2,
    ) -> Result<Self> {
        let len = len.max(1);
        Self::from_log_tables(hidden, obs, init, vec![trans; len - 1], vec![emit; len])
    }

    pub fn hidden(&self) -> &Alphabet {
        &self.hidden
    }

    pub fn obs(&self) -> &Alphabet {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.emit.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn init(&self) -> &Table1 {
        &self.init
    }

    pub fn trans(&self) -> &[Table2] {
        &self.trans
    }

    pub fn emit(&self) -> &[Table2] {
        &self.emit
    }

    pub fn is_homogeneous(&self) -> bool {
        self.trans.windows(2).all(|w| w[0] == w[1]) && self.emit.windows(2).all(|w| w[0] == w[1])
    }

    /// Largest `|Σ row - 1|` over the initial distribution and every row.
    pub fn max_row_defect(&self) -> f64 {
        let defect = |row: &[LogValue]| (row.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs();
        let mut worst = defect(self.init.as_slice());
        for t in self.trans.iter().chain(&self.emit) {
            for row in t.row_iter() {
                worst = worst.max(defect(row));
            }
        }
        worst
    }

    /// `ln q(x, y)`; `-inf` when any factor is zero.
    pub fn log_joint(&self, x: &LabelSeq, y: &ObsSeq) -> Result<LogValue> {
        x.check(self.len(), self.hidden.len())?;
        y.check(self.len(), self.obs.len())?;
        Ok(self.log_joint_unchecked(x, y))
    }

    pub(crate) fn log_joint_unchecked(&self, x: &[usize], y: &[usize]) -> LogValue {
        let mut total = self.init.get(x[0]);
        for (pos, e) in self.emit.iter().enumerate() {
            total += e.get(x[pos], y[pos]);
            if pos > 0 {
                total += self.trans[pos - 1].get(x[pos - 1], x[pos]);
            }
        }
        total
    }

    fn observed_chain(&self, y: &[usize]) -> (Vec<LogValue>, Vec<Table2>) {
        let k = self.hidden.len();
        let first = (0..k).map(|x| self.init.get(x) + self.emit[0].get(x, y[0])).collect();
        let factors = self
            .trans
            .iter()
            .enumerate()
            .map(|(pos, t)| {
                let e = &self.emit[pos + 1];
                let yn = y[pos + 1];
                let entries = (0..k * k).map(|c| t.get(c / k, c % k) + e.get(c % k, yn)).collect();
                Table2::from_vec_unchecked(k, k, entries)
            })
            .collect();
        (first, factors)
    }

    /// `ln q(y)`, possibly `-inf`.
    pub fn log_evidence(&self, y: &ObsSeq) -> Result<LogValue> {
        y.check(self.len(), self.obs.len())?;
        let (first, factors) = self.observed_chain(y);
        Ok(chain::log_normalizer(&first, &factors).unwrap_or(f64::NEG_INFINITY))
    }

    /// `q(x_n | y)` for every position.
    pub fn posterior_marginals(&self, y: &ObsSeq) -> Result<PosteriorMarginals> {
        y.check(self.len(), self.obs.len())?;
        let (first, factors) = self.observed_chain(y);
        let post = chain::posterior(&first, &factors).map_err(impossible)?;
        Ok(PosteriorMarginals::from_log_rows_unchecked(post.marginals))
    }

    /// Maximum posterior mode labelling.
    pub fn mpm_decode(&self, y: &ObsSeq) -> Result<LabelSeq> {
        Ok(self.posterior_marginals(y)?.decode())
    }
}

fn impossible(_: ZeroMass) -> Error {
    Error::ImpossibleObservation
}
