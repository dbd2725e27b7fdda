//! JSON model files, trace files, and whitespace-separated sequence files.
//!
//! CRF files hold natural-log potentials; HMC files hold probabilities.
//! JSON has no infinities, so `-inf` is written as the string `"-inf"`.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::crf::{CrfModel, Mode};
use crate::equivalence::ConstructionTrace;
use crate::hmc::{HmcModel, ROW_SUM_TOLERANCE};
use crate::tables::{Alphabet, ObsSeq, Table1, Table2};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

impl From<serde_json::Error> for FileError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; it is reported separately.
        let message = match message.rfind(" at line ") {
            Some(cut) => message[..cut].to_owned(),
            None => message,
        };
        FileError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

fn field_error(field: impl Into<String>, message: impl fmt::Display) -> FileError {
    FileError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

/// A number in JSON, or the string `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsonValue(pub f64);

impl Serialize for JsonValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for JsonValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValueVisitor;

        impl Visitor<'_> for ValueVisitor {
            type Value = JsonValue;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<JsonValue, E> {
                Ok(JsonValue(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<JsonValue, E> {
                Ok(JsonValue(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<JsonValue, E> {
                Ok(JsonValue(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<JsonValue, E> {
                if v == "-inf" {
                    Ok(JsonValue(f64::NEG_INFINITY))
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(ValueVisitor)
    }
}

type JsonTable = Vec<Vec<JsonValue>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Crf,
    Hmc,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Kind::Crf => "crf",
            Kind::Hmc => "hmc",
        })
    }
}

fn default_mode() -> String {
    Mode::Strict.as_str().to_owned()
}

/// On-disk form of either model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kind: Kind,
    pub hidden_symbols: Vec<String>,
    pub obs_symbols: Vec<String>,
    pub n: usize,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<Vec<JsonTable>>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub unary: Option<Vec<JsonTable>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<JsonValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trans: Option<Vec<JsonTable>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emit: Option<Vec<JsonTable>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Crf(CrfModel),
    Hmc(HmcModel),
}

impl Model {
    pub fn kind(&self) -> Kind {
        match self {
            Model::Crf(_) => Kind::Crf,
            Model::Hmc(_) => Kind::Hmc,
        }
    }

    pub fn obs(&self) -> &Alphabet {
        match self {
            Model::Crf(m) => m.obs(),
            Model::Hmc(m) => m.obs(),
        }
    }

    pub fn hidden(&self) -> &Alphabet {
        match self {
            Model::Crf(m) => m.hidden(),
            Model::Hmc(m) => m.hidden(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Model::Crf(m) => m.len(),
            Model::Hmc(m) => m.len(),
        }
    }

    /// Model files always describe at least one position.
    pub fn is_empty(&self) -> bool {
        false
    }
}

fn json_table(t: &Table2, map: impl Fn(f64) -> f64) -> JsonTable {
    t.row_iter()
        .map(|r| r.iter().map(|&v| JsonValue(map(v))).collect())
        .collect()
}

impl ModelFile {
    pub fn from_crf(model: &CrfModel) -> Self {
        Self {
            kind: Kind::Crf,
            hidden_symbols: model.hidden().symbols().to_vec(),
            obs_symbols: model.obs().symbols().to_vec(),
            n: model.len(),
            mode: model.mode().as_str().to_owned(),
            pairwise: Some(model.pairwise().iter().map(|t| json_table(t, |v| v)).collect()),
            unary: Some(model.unary().iter().map(|t| json_table(t, |v| v)).collect()),
            init: None,
            trans: None,
            emit: None,
        }
    }

    /// Probabilities are written as `exp` of the stored log values.
    pub fn from_hmc(model: &HmcModel, mode: Mode) -> Self {
        Self {
            kind: Kind::Hmc,
            hidden_symbols: model.hidden().symbols().to_vec(),
            obs_symbols: model.obs().symbols().to_vec(),
            n: model.len(),
            mode: mode.as_str().to_owned(),
            pairwise: None,
            unary: None,
            init: Some(model.init().as_slice().iter().map(|v| JsonValue(v.exp())).collect()),
            trans: Some(model.trans().iter().map(|t| json_table(t, f64::exp)).collect()),
            emit: Some(model.emit().iter().map(|t| json_table(t, f64::exp)).collect()),
        }
    }

    pub fn parse(text: &str) -> Result<Self, FileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model files always serialize");
        s.push('\n');
        s
    }

    pub fn mode(&self) -> Result<Mode, FileError> {
        self.mode.parse().map_err(|e| field_error("mode", e))
    }

    pub fn into_model(self) -> Result<Model, FileError> {
        let hidden = Alphabet::new(self.hidden_symbols.clone()).map_err(|e| field_error("hidden_symbols", e))?;
        let obs = Alphabet::new(self.obs_symbols.clone()).map_err(|e| field_error("obs_symbols", e))?;
        if self.n == 0 {
            return Err(field_error("n", "must be at least 1"));
        }
        let mode = self.mode()?;
        match self.kind {
            Kind::Crf => self.crf_model(hidden, obs, mode).map(Model::Crf),
            Kind::Hmc => self.hmc_model(hidden, obs).map(Model::Hmc),
        }
    }

    fn crf_model(&self, hidden: Alphabet, obs: Alphabet, mode: Mode) -> Result<CrfModel, FileError> {
        let (k, m) = (hidden.len(), obs.len());
        let strict = mode == Mode::Strict;
        let check = |v: f64| -> Result<f64, &'static str> {
            if v.is_nan() || v == f64::INFINITY {
                Err("not a valid potential")
            } else if strict && !v.is_finite() {
                Err("-inf is only allowed in generalized mode")
            } else {
                Ok(v)
            }
        };
        let pairwise = tables(&self.pairwise, "V", self.n - 1, k, k, check)?;
        let unary = tables(&self.unary, "U", self.n, k, m, check)?;
        CrfModel::new(hidden, obs, pairwise, unary, mode).map_err(|e| field_error("V/U", e))
    }

    fn hmc_model(&self, hidden: Alphabet, obs: Alphabet) -> Result<HmcModel, FileError> {
        let (k, m) = (hidden.len(), obs.len());
        let check = |p: f64| -> Result<f64, &'static str> {
            if p.is_finite() && p >= 0.0 {
                Ok(p.ln())
            } else {
                Err("probabilities must be finite and nonnegative")
            }
        };
        let init = self.init.as_ref().ok_or_else(|| field_error("init", "missing"))?;
        let init = row(init, "init", k, check)?;
        check_row_sum(&init, "init")?;
        let trans = tables(&self.trans, "trans", self.n - 1, k, k, check)?;
        let emit = tables(&self.emit, "emit", self.n, k, m, check)?;
        for (name, ts) in [("trans", &trans), ("emit", &emit)] {
            for (t, table) in ts.iter().enumerate() {
                for (r, values) in table.row_iter().enumerate() {
                    check_row_sum(values, &format!("{name}[{t}][{r}]"))?;
                }
            }
        }
        HmcModel::from_log_tables(
            hidden,
            obs,
            Table1::new(init).map_err(|e| field_error("init", e))?,
            trans,
            emit,
        )
        .map_err(|e| field_error("init/trans/emit", e))
    }
}

fn check_row_sum(logs: &[f64], field: &str) -> Result<(), FileError> {
    let sum: f64 = logs.iter().map(|v| v.exp()).sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(field_error(field, format!("row sums to {sum}, not 1")));
    }
    Ok(())
}

fn row(
    values: &[JsonValue],
    field: &str,
    len: usize,
    check: impl Fn(f64) -> Result<f64, &'static str>,
) -> Result<Vec<f64>, FileError> {
    if values.len() != len {
        return Err(field_error(
            field,
            format!("expected {len} entries, found {}", values.len()),
        ));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| check(v.0).map_err(|msg| field_error(format!("{field}[{i}]"), msg)))
        .collect()
}

fn tables(
    source: &Option<Vec<JsonTable>>,
    name: &str,
    count: usize,
    rows: usize,
    cols: usize,
    check: impl Fn(f64) -> Result<f64, &'static str> + Copy,
) -> Result<Vec<Table2>, FileError> {
    let source = source.as_ref().ok_or_else(|| field_error(name, "missing"))?;
    if source.len() != count {
        return Err(field_error(
            name,
            format!("expected {count} tables, found {}", source.len()),
        ));
    }
    source
        .iter()
        .enumerate()
        .map(|(t, table)| {
            let field = format!("{name}[{t}]");
            if table.len() != rows {
                return Err(field_error(
                    &field,
                    format!("expected {rows} rows, found {}", table.len()),
                ));
            }
            let mut entries = Vec::with_capacity(rows * cols);
            for (r, values) in table.iter().enumerate() {
                entries.extend(row(values, &format!("{field}[{r}]"), cols, check)?);
            }
            Table2::new(rows, cols, entries).map_err(|e| field_error(&field, e))
        })
        .collect()
}

/// The ψ, φ and β tables of a construction, in log form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceFile {
    pub hidden_symbols: Vec<String>,
    pub n: usize,
    pub psi: JsonTable,
    pub phi: Vec<JsonTable>,
    pub beta: JsonTable,
    pub unreachable_transitions: Vec<Vec<bool>>,
    pub unreachable_emissions: Vec<Vec<bool>>,
    pub max_row_defect: f64,
}

impl TraceFile {
    pub fn new(hidden: &Alphabet, trace: &ConstructionTrace) -> Self {
        let rows = |ts: &[Table1]| -> JsonTable {
            ts.iter()
                .map(|t| t.as_slice().iter().map(|&v| JsonValue(v)).collect())
                .collect()
        };
        Self {
            hidden_symbols: hidden.symbols().to_vec(),
            n: trace.psi.len(),
            psi: rows(&trace.psi),
            phi: trace.phi.iter().map(|t| json_table(t, |v| v)).collect(),
            beta: rows(&trace.beta),
            unreachable_transitions: trace.unreachable_transitions.clone(),
            unreachable_emissions: trace.unreachable_emissions.clone(),
            max_row_defect: trace.max_row_defect,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace files always serialize");
        s.push('\n');
        s
    }
}

/// One line of a sequence file: whitespace-separated observation symbols.
pub fn parse_sequence(line: &str, obs: &Alphabet) -> crate::error::Result<ObsSeq> {
    ObsSeq::from_symbols(obs, line.split_whitespace())
}
