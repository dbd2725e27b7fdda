//! Construction of a hidden Markov chain whose posterior `q(x | y)` equals the
//! posterior `p(x | y)` of a given linear-chain CRF.
//!
//! The construction goes through three families of intermediate tables, all
//! kept in log form:
//!
//! * `ψ_n(x) = ln Σ_y exp U_n(x, y)`, the per-state emission mass;
//! * `φ_n(x, x')`, pairwise factors absorbing `V_n` and the `ψ` terms, so that
//!   `Π φ_n` is proportional to the prior over label sequences;
//! * `β_n(x)`, suffix sums of `Π φ` obtained by a backward recursion from
//!   `β_N ≡ 1`.
//!
//! From these, `q(x_1) ∝ β_1(x_1)`,
//! `q(x_{n+1} | x_n) = φ_n(x_n, x_{n+1}) β_{n+1}(x_{n+1}) / β_n(x_n)` and
//! `q(y_n | x_n) = exp U_n(x_n, y_n) / ψ_n(x_n)`.
//!
//! Zero weights (`-inf`) are allowed in generalized mode. A state whose `β`
//! or `ψ` is zero can never be visited by the constructed chain, so its
//! outgoing transition or emission row is filled with a uniform placeholder
//! and flagged in the trace.

use crate::crf::{CrfModel, Mode};
use crate::error::{Error, Result};
use crate::hmc::HmcModel;
use crate::tables::{log_sum_exp, LogValue, Table1, Table2};

/// Intermediates of [`crf_to_hmc`], kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionTrace {
    /// `ψ_1..ψ_N`.
    pub psi: Vec<Table1>,
    /// `φ_1..φ_{N-1}`.
    pub phi: Vec<Table2>,
    /// `β_1..β_N`; the last is identically zero.
    pub beta: Vec<Table1>,
    /// `[n][x]`: the transition row out of `x` at position `n` is a placeholder.
    pub unreachable_transitions: Vec<Vec<bool>>,
    /// `[n][x]`: the emission row of `x` at position `n` is a placeholder.
    pub unreachable_emissions: Vec<Vec<bool>>,
    /// Largest `|Σ row - 1|` over the constructed rows before renormalization.
    pub max_row_defect: f64,
}

/// `ψ_n(x) = ln Σ_y exp U_n(x, y)` for every position.
pub fn build_psi(model: &CrfModel) -> Result<Vec<Table1>> {
    model
        .unary()
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let row: Vec<LogValue> = u.row_iter().map(log_sum_exp).collect();
            if row.iter().all(|v| *v == f64::NEG_INFINITY) {
                return Err(Error::DegenerateModel(format!(
                    "no state can emit any symbol at position {n}"
                )));
            }
            Ok(Table1::from_vec_unchecked(row))
        })
        .collect()
}

/// `φ_1 = V_1 + ψ_1(x_1) + ψ_2(x_2)` and `φ_n = V_n + ψ_{n+1}(x_{n+1})` for
/// `n ≥ 2`, in log form.
pub fn build_phi(model: &CrfModel, psi: &[Table1]) -> Result<Vec<Table2>> {
    if psi.len() != model.len() {
        return Err(Error::LengthMismatch {
            expected: model.len(),
            found: psi.len(),
        });
    }
    let k = model.hidden().len();
    Ok(model
        .pairwise()
        .iter()
        .enumerate()
        .map(|(n, v)| {
            let next = &psi[n + 1];
            let mut entries = Vec::with_capacity(k * k);
            for i in 0..k {
                let lead = if n == 0 { psi[0].get(i) } else { 0.0 };
                for j in 0..k {
                    entries.push(v.get(i, j) + lead + next.get(j));
                }
            }
            Table2::from_vec_unchecked(k, k, entries)
        })
        .collect())
}

/// Backward recursion `β_N ≡ 0`, `β_n(x) = ln Σ_{x'} exp(φ_n(x, x') + β_{n+1}(x'))`.
/// Returns `N = phi.len() + 1` rows over `states` labels.
pub fn build_beta(phi: &[Table2], states: usize) -> Result<Vec<Table1>> {
    for t in phi {
        t.check_shape(states, states)?;
    }
    let mut beta = vec![vec![0.0; states]; phi.len() + 1];
    let mut scratch = vec![0.0; states];
    for n in (0..phi.len()).rev() {
        let (head, tail) = beta.split_at_mut(n + 1);
        let next = &tail[0];
        for (i, slot) in head[n].iter_mut().enumerate() {
            for (j, s) in scratch.iter_mut().enumerate() {
                *s = phi[n].get(i, j) + next[j];
            }
            *slot = log_sum_exp(&scratch);
        }
    }
    if beta[0].iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::DegenerateModel("every label sequence has zero weight".into()));
    }
    Ok(beta.into_iter().map(Table1::from_vec_unchecked).collect())
}

/// The equivalent hidden Markov chain of a strict-mode CRF.
pub fn crf_to_hmc(model: &CrfModel) -> Result<(HmcModel, ConstructionTrace)> {
    if model.mode() != Mode::Strict {
        return Err(Error::ModeMismatch(
            "crf_to_hmc needs a strict-mode model; use crf_to_hmc_generalized".into(),
        ));
    }
    construct(model)
}

/// The equivalent hidden Markov chain of a CRF whose potentials may contain
/// exact zeros (`-inf`). Strict-mode models are accepted as well.
pub fn crf_to_hmc_generalized(model: &CrfModel) -> Result<(HmcModel, ConstructionTrace)> {
    construct(model)
}

fn construct(model: &CrfModel) -> Result<(HmcModel, ConstructionTrace)> {
    let k = model.hidden().len();
    let m = model.obs().len();
    let psi = build_psi(model)?;
    let phi = build_phi(model, &psi)?;
    let beta = build_beta(&phi, k)?;

    let mut defect: f64 = 0.0;
    let mut track = |row: &[LogValue]| {
        let s: f64 = row.iter().map(|v| v.exp()).sum();
        defect = defect.max((s - 1.0).abs());
    };

    // With a single position there is no φ; the prior is carried by ψ_1.
    let prior = if model.len() == 1 { &psi[0] } else { &beta[0] };
    let z = log_sum_exp(prior.as_slice());
    let init: Vec<LogValue> = prior.as_slice().iter().map(|b| b - z).collect();
    track(&init);

    let uniform_k = -(k as f64).ln();
    let mut unreachable_transitions = Vec::with_capacity(phi.len());
    let mut trans = Vec::with_capacity(phi.len());
    for (n, f) in phi.iter().enumerate() {
        let mut flags = vec![false; k];
        let mut entries = Vec::with_capacity(k * k);
        for (i, flag) in flags.iter_mut().enumerate() {
            let from = beta[n].get(i);
            if from == f64::NEG_INFINITY {
                *flag = true;
                entries.extend(std::iter::repeat_n(uniform_k, k));
                continue;
            }
            let row: Vec<LogValue> = (0..k).map(|j| f.get(i, j) + beta[n + 1].get(j) - from).collect();
            track(&row);
            entries.extend(row);
        }
        unreachable_transitions.push(flags);
        trans.push(Table2::from_vec_unchecked(k, k, entries));
    }

    let uniform_m = -(m as f64).ln();
    let mut unreachable_emissions = Vec::with_capacity(model.len());
    let mut emit = Vec::with_capacity(model.len());
    for (u, p) in model.unary().iter().zip(&psi) {
        let mut flags = vec![false; k];
        let mut entries = Vec::with_capacity(k * m);
        for (i, flag) in flags.iter_mut().enumerate() {
            let mass = p.get(i);
            if mass == f64::NEG_INFINITY {
                *flag = true;
                entries.extend(std::iter::repeat_n(uniform_m, m));
                continue;
            }
            let row: Vec<LogValue> = u.row(i).iter().map(|v| v - mass).collect();
            track(&row);
            entries.extend(row);
        }
        unreachable_emissions.push(flags);
        emit.push(Table2::from_vec_unchecked(k, m, entries));
    }

    let hmc = HmcModel::from_log_tables(
        model.hidden().clone(),
        model.obs().clone(),
        Table1::from_vec_unchecked(init),
        trans,
        emit,
    )?;
    let trace = ConstructionTrace {
        psi,
        phi,
        beta,
        unreachable_transitions,
        unreachable_emissions,
        max_row_defect: defect,
    };
    Ok((hmc, trace))
}
