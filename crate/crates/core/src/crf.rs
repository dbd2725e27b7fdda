//! Linear-chain conditional random fields over finite alphabets.
//!
//! The model assigns `p(x | y) ∝ exp(Σ_n V_n(x_n, x_{n+1}) + Σ_n U_n(x_n, y_n))`
//! with one pairwise table `V_n` per adjacent pair of positions and one
//! hidden-by-observation table `U_n` per position.

use rand::Rng;

use crate::chain::{self, ZeroMass};
use crate::error::{Error, Result};
use crate::tables::{argmax, Alphabet, LabelSeq, LogValue, ObsSeq, Table1, Table2};

/// How potentials are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Every potential is a finite real, so every sequence has positive weight.
    #[default]
    Strict,
    /// Potentials are logs of nonnegative weights; `-inf` marks an exact zero.
    Generalized,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Generalized => "generalized",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Mode::Strict),
            "generalized" => Ok(Mode::Generalized),
            other => Err(Error::ModeMismatch(format!(
                "unknown mode `{other}`, expected `strict` or `generalized`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    hidden: Alphabet,
    obs: Alphabet,
    pairwise: Vec<Table2>,
    unary: Vec<Table2>,
    mode: Mode,
}

impl CrfModel {
    /// `pairwise` holds `V_1..V_{N-1}` over hidden × hidden and `unary` holds
    /// `U_1..U_N` over hidden × observation; `N` is `unary.len()`.
    pub fn new(hidden: Alphabet, obs: Alphabet, pairwise: Vec<Table2>, unary: Vec<Table2>, mode: Mode) -> Result<Self> {
        if unary.is_empty() {
            return Err(Error::LengthMismatch { expected: 1, found: 0 });
        }
        if pairwise.len() + 1 != unary.len() {
            return Err(Error::LengthMismatch {
                expected: unary.len() - 1,
                found: pairwise.len(),
            });
        }
        let (k, m) = (hidden.len(), obs.len());
        for t in &pairwise {
            t.check_shape(k, k)?;
        }
        for t in &unary {
            t.check_shape(k, m)?;
        }
        if mode == Mode::Strict {
            let named = pairwise
                .iter()
                .enumerate()
                .map(|(n, t)| (format!("V[{n}]"), t))
                .chain(unary.iter().enumerate().map(|(n, t)| (format!("U[{n}]"), t)));
            for (name, table) in named {
                if let Some(index) = table.as_slice().iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvalidValue {
                        table: name,
                        index,
                        value: table.as_slice()[index],
                    });
                }
            }
        }
        Ok(Self {
            hidden,
            obs,
            pairwise,
            unary,
            mode,
        })
    }

    /// Repeats a single `(V, U)` pair across `len` positions.
    pub fn tiled(
        hidden: Alphabet,
        obs: Alphabet,
        len: usize,
        pairwise: Table2,
        unary: Table2,
        mode: Mode,
    ) -> Result<Self> {
        let len = len.max(1);
        Self::new(hidden, obs, vec![pairwise; len - 1], vec![unary; len], mode)
    }

    /// All potentials zero: every label sequence equally likely.
    pub fn uniform(hidden: Alphabet, obs: Alphabet, len: usize) -> Result<Self> {
        let (k, m) = (hidden.len(), obs.len());
        Self::tiled(
            hidden,
            obs,
            len,
            Table2::filled(k, k, 0.0)?,
            Table2::filled(k, m, 0.0)?,
            Mode::Strict,
        )
    }

    /// Potentials drawn i.i.d. uniform on `[-magnitude, magnitude]`, `V` tables
    /// first, each row-major. With `zero_rate > 0` every cell is independently
    /// replaced by `-inf` with that probability and the model is generalized.
    pub fn random<R: Rng>(
        rng: &mut R,
        hidden: Alphabet,
        obs: Alphabet,
        len: usize,
        magnitude: f64,
        zero_rate: f64,
    ) -> Result<Self> {
        let (k, m) = (hidden.len(), obs.len());
        let len = len.max(1);
        let mut table = |rows: usize, cols: usize| {
            let entries = (0..rows * cols)
                .map(|_| {
                    if zero_rate > 0.0 && rng.gen_bool(zero_rate) {
                        f64::NEG_INFINITY
                    } else {
                        rng.gen_range(-magnitude..=magnitude)
                    }
                })
                .collect();
            Table2::new(rows, cols, entries)
        };
        let pairwise = (0..len - 1).map(|_| table(k, k)).collect::<Result<Vec<_>>>()?;
        let unary = (0..len).map(|_| table(k, m)).collect::<Result<Vec<_>>>()?;
        let mode = if zero_rate > 0.0 {
            Mode::Generalized
        } else {
            Mode::Strict
        };
        Self::new(hidden, obs, pairwise, unary, mode)
    }

    pub fn hidden(&self) -> &Alphabet {
        &self.hidden
    }

    pub fn obs(&self) -> &Alphabet {
        &self.obs
    }

    /// Sequence length `N`.
    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pairwise(&self) -> &[Table2] {
        &self.pairwise
    }

    pub fn unary(&self) -> &[Table2] {
        &self.unary
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// True when every `V_n` is the same table and every `U_n` is the same table.
    pub fn is_homogeneous(&self) -> bool {
        self.pairwise.windows(2).all(|w| w[0] == w[1]) && self.unary.windows(2).all(|w| w[0] == w[1])
    }

    /// Same model with `c` added to every entry of `V_n` (0-based).
    pub fn with_pairwise_shift(&self, n: usize, c: f64) -> Result<Self> {
        let mut out = self.clone();
        let table = out.pairwise.get_mut(n).ok_or(Error::IndexOutOfRange {
            index: n,
            size: self.pairwise.len(),
        })?;
        *table = table.shifted(c)?;
        Ok(out)
    }

    /// Same model with `c` added to every entry of `U_n` (0-based).
    pub fn with_unary_shift(&self, n: usize, c: f64) -> Result<Self> {
        let mut out = self.clone();
        let table = out.unary.get_mut(n).ok_or(Error::IndexOutOfRange {
            index: n,
            size: self.unary.len(),
        })?;
        *table = table.shifted(c)?;
        Ok(out)
    }

    pub(crate) fn check_obs(&self, y: &ObsSeq) -> Result<()> {
        y.check(self.len(), self.obs.len())
    }

    /// Log of the unnormalized weight of `(x, y)`.
    pub fn log_score(&self, x: &LabelSeq, y: &ObsSeq) -> Result<LogValue> {
        x.check(self.len(), self.hidden.len())?;
        self.check_obs(y)?;
        Ok(self.log_score_unchecked(x, y))
    }

    pub(crate) fn log_score_unchecked(&self, x: &[usize], y: &[usize]) -> LogValue {
        let pair: LogValue = self
            .pairwise
            .iter()
            .zip(x.windows(2))
            .map(|(v, w)| v.get(w[0], w[1]))
            .sum();
        let unary: LogValue = self
            .unary
            .iter()
            .zip(x.iter().zip(y))
            .map(|(u, (&xn, &yn))| u.get(xn, yn))
            .sum();
        pair + unary
    }

    /// The `y`-conditioned chain: `U_n(x_n, y_n)` is folded into the factor
    /// joining `n` and `n + 1`, and `U_N` into the last factor as well. With
    /// `N = 1` there is no factor and `U_1` becomes the first-position weight.
    pub(crate) fn conditioned_chain(&self, y: &[usize]) -> (Vec<LogValue>, Vec<Table2>) {
        let k = self.hidden.len();
        let n = self.len();
        if n == 1 {
            let first = (0..k).map(|x| self.unary[0].get(x, y[0])).collect();
            return (first, Vec::new());
        }
        let factors = self
            .pairwise
            .iter()
            .enumerate()
            .map(|(pos, v)| {
                let last = pos + 2 == n;
                let mut entries = Vec::with_capacity(k * k);
                for i in 0..k {
                    let left = self.unary[pos].get(i, y[pos]);
                    for j in 0..k {
                        let mut w = v.get(i, j) + left;
                        if last {
                            w += self.unary[pos + 1].get(j, y[pos + 1]);
                        }
                        entries.push(w);
                    }
                }
                Table2::from_vec_unchecked(k, k, entries)
            })
            .collect();
        (vec![0.0; k], factors)
    }

    /// `ln κ(y)`, the log of the sum of weights over every label sequence.
    pub fn log_normalizer(&self, y: &ObsSeq) -> Result<LogValue> {
        self.check_obs(y)?;
        let (first, factors) = self.conditioned_chain(y);
        chain::log_normalizer(&first, &factors).map_err(degenerate)
    }

    /// `p(x_n | y)` for every position.
    pub fn posterior_marginals(&self, y: &ObsSeq) -> Result<PosteriorMarginals> {
        self.check_obs(y)?;
        let (first, factors) = self.conditioned_chain(y);
        let post = chain::posterior(&first, &factors).map_err(degenerate)?;
        Ok(PosteriorMarginals::from_log_rows_unchecked(post.marginals))
    }

    /// Maximum posterior mode labelling.
    pub fn mpm_decode(&self, y: &ObsSeq) -> Result<LabelSeq> {
        Ok(self.posterior_marginals(y)?.decode())
    }
}

fn degenerate(_: ZeroMass) -> Error {
    Error::DegenerateModel("every label sequence has zero weight for this observation sequence".into())
}

/// Per-position posterior distributions over the hidden alphabet, as log rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMarginals {
    rows: Vec<Table1>,
}

impl PosteriorMarginals {
    /// Builds from probability rows, each of which must sum to 1 within 1e-9.
    pub fn from_probabilities(rows: &[Vec<f64>]) -> Result<Self> {
        let rows = rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                let sum: f64 = r.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::NotStochastic {
                        what: format!("marginal row {n}"),
                        sum,
                    });
                }
                Table1::from_probabilities(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub(crate) fn from_log_rows_unchecked(rows: Vec<Vec<LogValue>>) -> Self {
        Self {
            rows: rows.into_iter().map(Table1::from_vec_unchecked).collect(),
        }
    }

    pub fn rows(&self) -> &[Table1] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn probabilities(&self, n: usize) -> Vec<f64> {
        self.rows[n].to_probabilities()
    }

    /// Position-wise argmax, lowest index on ties.
    pub fn decode(&self) -> LabelSeq {
        LabelSeq::new(self.rows.iter().map(|r| argmax(r.as_slice())).collect())
    }

    /// Largest `|p - q|` over every position and label.
    pub fn max_abs_diff(&self, other: &PosteriorMarginals) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    expected: a.len(),
                    found: b.len(),
                });
            }
            for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
                worst = worst.max((p.exp() - q.exp()).abs());
            }
        }
        Ok(worst)
    }
}
