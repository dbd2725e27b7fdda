//! Finite alphabets, dense log-domain tables, and the numeric helpers shared
//! by the model modules.
//!
//! Every weight and probability in the crate is a natural-log value stored as
//! an `f64`. `-inf` is an ordinary value meaning an exact zero weight. `NaN`
//! and `+inf` are refused when a table is built, so everything downstream can
//! assume well-formed inputs.

use std::collections::HashMap;
use std::ops::Deref;

use crate::error::{Error, Result};

/// A natural-log weight. `f64::NEG_INFINITY` stands for weight zero.
pub type LogValue = f64;

/// An ordered set of distinct symbol names, indexed from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        let mut lookup = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if lookup.insert(s.clone(), i).is_some() {
                return Err(Error::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Self { symbols, lookup })
    }

    /// `prefix0, prefix1, ...` with `size` symbols.
    pub fn numbered(prefix: &str, size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| format!("{prefix}{i}")))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index(&self, symbol: &str) -> Result<usize> {
        self.lookup
            .get(symbol)
            .copied()
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_owned()))
    }

    pub fn symbol(&self, index: usize) -> Result<&str> {
        self.symbols
            .get(index)
            .map(String::as_str)
            .ok_or(Error::IndexOutOfRange {
                index,
                size: self.len(),
            })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

fn check_entries(entries: &[f64]) -> Result<()> {
    match entries.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
        Some(index) => Err(Error::InvalidValue {
            table: "table".into(),
            index,
            value: entries[index],
        }),
        None => Ok(()),
    }
}

/// A dense vector of log values indexed by one alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    entries: Vec<LogValue>,
}

impl Table1 {
    pub fn new(entries: Vec<LogValue>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        check_entries(&entries)?;
        Ok(Self { entries })
    }

    pub fn filled(len: usize, value: LogValue) -> Result<Self> {
        Self::new(vec![value; len])
    }

    /// Log of the given probabilities. Negative or non-finite inputs are refused.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        if let Some(index) = probs.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidValue {
                table: "probability row".into(),
                index,
                value: probs[index],
            });
        }
        Self::new(probs.iter().map(|p| p.ln()).collect())
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<LogValue>) -> Self {
        debug_assert!(entries.iter().all(|v| !v.is_nan()));
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> LogValue {
        self.entries[i]
    }

    pub fn as_slice(&self) -> &[LogValue] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<LogValue> {
        self.entries
    }

    pub fn to_probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|v| v.exp()).collect()
    }
}

/// A dense row-major matrix of log values over two alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2 {
    rows: usize,
    cols: usize,
    entries: Vec<LogValue>,
}

impl Table2 {
    pub fn new(rows: usize, cols: usize, entries: Vec<LogValue>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries ({rows}x{cols})", rows * cols),
                found: format!("{} entries", entries.len()),
            });
        }
        check_entries(&entries)?;
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: Vec<Vec<LogValue>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::ShapeMismatch {
                expected: format!("rows of length {n_cols}"),
                found: format!("row of length {}", bad.len()),
            });
        }
        Self::new(n_rows, n_cols, rows.into_iter().flatten().collect())
    }

    pub fn filled(rows: usize, cols: usize, value: LogValue) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, entries: Vec<LogValue>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        debug_assert!(entries.iter().all(|v| !v.is_nan()));
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> LogValue {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[LogValue] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[LogValue]> {
        self.entries.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[LogValue] {
        &self.entries
    }

    /// A copy with `c` added to every entry. `-inf` cells stay `-inf`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.entries.iter().map(|v| v + c).collect())
    }

    pub fn to_probability_rows(&self) -> Vec<Vec<f64>> {
        self.row_iter().map(|r| r.iter().map(|v| v.exp()).collect()).collect()
    }

    pub(crate) fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{cols}"),
                found: format!("{}x{}", self.rows, self.cols),
            });
        }
        Ok(())
    }
}

macro_rules! index_seq {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(Vec<usize>);

        impl $name {
            pub fn new(positions: Vec<usize>) -> Self {
                Self(positions)
            }

            /// Looks every symbol up in `alphabet`.
            pub fn from_symbols<S: AsRef<str>>(
                alphabet: &Alphabet,
                symbols: impl IntoIterator<Item = S>,
            ) -> Result<Self> {
                symbols
                    .into_iter()
                    .map(|s| alphabet.index(s.as_ref()))
                    .collect::<Result<Vec<_>>>()
                    .map(Self)
            }

            pub fn to_symbols<'a>(&self, alphabet: &'a Alphabet) -> Result<Vec<&'a str>> {
                self.0.iter().map(|&i| alphabet.symbol(i)).collect()
            }

            pub fn as_slice(&self) -> &[usize] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<usize> {
                self.0
            }

            pub(crate) fn check(&self, len: usize, alphabet_size: usize) -> Result<()> {
                if self.0.len() != len {
                    return Err(Error::LengthMismatch {
                        expected: len,
                        found: self.0.len(),
                    });
                }
                match self.0.iter().find(|&&i| i >= alphabet_size) {
                    Some(&index) => Err(Error::IndexOutOfRange {
                        index,
                        size: alphabet_size,
                    }),
                    None => Ok(()),
                }
            }
        }

        impl Deref for $name {
            type Target = [usize];

            fn deref(&self) -> &[usize] {
                &self.0
            }
        }

        impl From<Vec<usize>> for $name {
            fn from(positions: Vec<usize>) -> Self {
                Self(positions)
            }
        }
    };
}

index_seq!(
    /// Hidden labels `x_1..x_N` as indices into the hidden alphabet.
    LabelSeq
);
index_seq!(
    /// Observations `y_1..y_N` as indices into the observation alphabet.
    ObsSeq
);

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Index and value of the largest entry, first one on ties.
fn max_entry(values: &[LogValue]) -> (usize, LogValue) {
    values.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, v)| if v > best.1 { (i, v) } else { best },
    )
}

/// `ln(1 + Σ_{i ≠ top} exp(v_i - max))`.
fn log1p_rest(values: &[LogValue], top: usize, max: LogValue) -> LogValue {
    let rest: CompensatedSum = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, v)| (v - max).exp())
        .collect();
    rest.total().ln_1p()
}

/// `ln Σ exp(v_i)`, shifted by the maximum so finite inputs never overflow.
/// The empty sum is `-inf`.
pub fn log_sum_exp(values: &[LogValue]) -> LogValue {
    let (top, max) = max_entry(values);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + log1p_rest(values, top, max)
}

/// Shifts `row` so that its exponentials sum to one.
pub fn normalize_log(row: &Table1) -> Result<Table1> {
    Ok(Table1::from_vec_unchecked(normalized(row.as_slice())?))
}

pub(crate) fn normalized(row: &[LogValue]) -> Result<Vec<LogValue>> {
    let (top, max) = max_entry(row);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllZeroRow);
    }
    let tail = log1p_rest(row, top, max);
    // max + tail as an unevaluated pair (hi, lo): the rounding of hi must not
    // shift every entry, or a normalized row would not renormalize to itself.
    let hi = max + tail;
    let back = hi - max;
    let lo = (max - (hi - back)) + (tail - back);
    Ok(row.iter().map(|v| (v - hi) - lo).collect())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Number of positions at which two label sequences disagree.
pub fn hamming_loss(a: &LabelSeq, b: &LabelSeq) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b.iter()).filter(|(x, y)| x != y).count())
}

// Frozen reference values keep every digit the oracle printed.
#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NEG_INF: f64 = f64::NEG_INFINITY;

    #[test]
    fn alphabet_round_trips_symbols() {
        let a = Alphabet::new(["N", "V", "DET"]).unwrap();
        for (i, s) in a.symbols().iter().enumerate() {
            assert_eq!(a.index(s).unwrap(), i);
            assert_eq!(a.symbol(i).unwrap(), s);
        }
        assert!(matches!(a.index("ADJ"), Err(Error::UnknownSymbol(_))));
        assert!(matches!(a.symbol(3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn alphabet_rejects_empty_and_duplicates() {
        assert_eq!(Alphabet::new(Vec::<String>::new()), Err(Error::EmptyAlphabet));
        assert_eq!(Alphabet::new(["a", "b", "a"]), Err(Error::DuplicateSymbol("a".into())));
    }

    #[test]
    fn tables_reject_nan_and_positive_infinity() {
        assert!(matches!(
            Table1::new(vec![0.0, f64::NAN]),
            Err(Error::InvalidValue { index: 1, .. })
        ));
        assert!(matches!(
            Table2::new(1, 2, vec![f64::INFINITY, 0.0]),
            Err(Error::InvalidValue { index: 0, .. })
        ));
        assert!(Table2::new(1, 2, vec![NEG_INF, 0.0]).is_ok());
        assert!(matches!(
            Table2::new(2, 2, vec![0.0; 3]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            Table2::from_rows(vec![vec![0.0, 1.0], vec![0.0]]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn table2_lookup_is_row_major() {
        let t = Table2::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(t.get(0, 2), 3.0);
        assert_eq!(t.get(1, 0), 4.0);
        assert_eq!(t.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn log_sum_exp_small_integers() {
        let got = log_sum_exp(&[1f64.ln(), 3f64.ln()]);
        assert!((got - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_empty_and_all_zero() {
        assert_eq!(log_sum_exp(&[]), NEG_INF);
        assert_eq!(log_sum_exp(&[NEG_INF, NEG_INF]), NEG_INF);
        assert_eq!(log_sum_exp(&[NEG_INF, 2.5]), 2.5);
    }

    // Expected values were computed with mpmath at 50 significant digits.
    #[test]
    fn log_sum_exp_matches_high_precision() {
        let cases: &[(&[f64], f64)] = &[
            (&[1000.0; 50], 1003.912023005428146058619),
            (&[0.5, 2.0], 2.201413277982752409499483),
            (&[12.0, 5.0], 12.0009114664537742446917),
            (&[-745.0, -746.0, -744.5], -743.8958693946632717279525),
            (&[700.0, 700.0, -3.25, 699.0], 700.861994804058251081635),
        ];
        for (values, expected) in cases {
            let got = log_sum_exp(values);
            assert!(
                (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "{values:?}: {got} vs {expected}"
            );
        }
        // The naive route overflows.
        assert!((50.0 * 1000f64.exp()).ln().is_infinite());
    }

    #[test]
    fn normalize_log_examples() {
        let half = normalize_log(&Table1::new(vec![2f64.ln(), 2f64.ln()]).unwrap()).unwrap();
        for v in half.as_slice() {
            assert!((v - 0.5f64.ln()).abs() < 1e-15);
        }

        let point = normalize_log(&Table1::new(vec![0.0, NEG_INF]).unwrap()).unwrap();
        assert_eq!(point.as_slice(), &[0.0, NEG_INF]);

        // softmax(1, 2, 3) in log form, mpmath at 50 digits.
        let expected = [
            -2.40760596444438030448292,
            -1.40760596444438030448292,
            -0.4076059644443803044829199,
        ];
        let soft = normalize_log(&Table1::new(vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        for (got, want) in soft.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn normalize_log_all_zero_row_fails() {
        let row = Table1::new(vec![NEG_INF, NEG_INF]).unwrap();
        assert_eq!(normalize_log(&row), Err(Error::AllZeroRow));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[NEG_INF, NEG_INF]), 0);
    }

    #[test]
    fn hamming_loss_examples() {
        let s = |v: &[usize]| LabelSeq::new(v.to_vec());
        assert_eq!(hamming_loss(&s(&[0, 1, 1]), &s(&[0, 1, 1])), Ok(0));
        assert_eq!(hamming_loss(&s(&[0, 1, 1]), &s(&[0, 1, 0])), Ok(1));
        assert_eq!(hamming_loss(&s(&[0, 0]), &s(&[1, 1])), Ok(2));
        assert_eq!(
            hamming_loss(&s(&[0]), &s(&[0, 1])),
            Err(Error::LengthMismatch { expected: 1, found: 2 })
        );
    }

    fn all_sequences(len: usize, k: usize) -> Vec<LabelSeq> {
        (0..k.pow(len as u32))
            .map(|mut code| {
                let mut v = vec![0; len];
                for slot in v.iter_mut().rev() {
                    *slot = code % k;
                    code /= k;
                }
                LabelSeq::new(v)
            })
            .collect()
    }

    #[test]
    fn hamming_loss_is_a_metric_exhaustively() {
        for len in 1..=3 {
            for k in 1..=3 {
                let seqs = all_sequences(len, k);
                for a in &seqs {
                    for b in &seqs {
                        let ab = hamming_loss(a, b).unwrap();
                        assert_eq!(ab == 0, a == b);
                        assert_eq!(ab, hamming_loss(b, a).unwrap());
                        for c in &seqs {
                            let via = hamming_loss(a, c).unwrap() + hamming_loss(c, b).unwrap();
                            assert!(ab <= via);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn log_sum_exp_matches_compensated_sum(values in prop::collection::vec(-300.0f64..300.0, 1..40)) {
            let oracle: CompensatedSum = values.iter().map(|v| v.exp()).collect();
            let got = log_sum_exp(&values).exp();
            prop_assert!((got - oracle.total()).abs() <= 1e-12 * oracle.total());
        }

        #[test]
        fn log_sum_exp_never_overflows(values in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let got = log_sum_exp(&values);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(got.is_finite());
            prop_assert!(got >= max && got <= max + (values.len() as f64).ln() + 1e-9);
        }

        #[test]
        fn normalize_log_is_idempotent(values in prop::collection::vec(-50.0f64..50.0, 1..10)) {
            let once = normalize_log(&Table1::new(values.clone()).unwrap()).unwrap();
            let twice = normalize_log(&once).unwrap();
            let mass: f64 = once.to_probabilities().iter().sum();
            prop_assert!((mass - 1.0).abs() <= 1e-12);
            prop_assert_eq!(argmax(once.as_slice()), argmax(&values));
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
