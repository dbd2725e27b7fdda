//! Forward-backward over a chain of pairwise log factors.
//!
//! A chain over `K` states and `N` positions is a unary log weight on the
//! first position followed by `N - 1` factors `F_n(x_n, x_{n+1})`. The CRF
//! and the HMC both fold their per-position terms into this shape before
//! running inference.

use crate::tables::{log_sum_exp, LogValue, Table2};

/// Total weight of the chain is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ZeroMass;

pub(crate) struct ChainPosterior {
    /// One normalized log row per position.
    pub marginals: Vec<Vec<LogValue>>,
}

/// Forward pass only, with the per-step normalizing constants summed back in: `ln Σ_x exp(first(x_1) + Σ F_n(x_n, x_{n+1}))`.
pub(crate) fn log_normalizer(first: &[LogValue], factors: &[Table2]) -> Result<LogValue, ZeroMass> {
    Ok(forward(first, factors)?.1)
}

/// Forward and backward passes. Messages are renormalized at every step; only
/// ratios matter for the marginals.
pub(crate) fn posterior(first: &[LogValue], factors: &[Table2]) -> Result<ChainPosterior, ZeroMass> {
    let k = first.len();
    let (alphas, _) = forward(first, factors)?;

    let n = factors.len() + 1;
    let mut betas = vec![vec![0.0; k]; n];
    let mut scratch = vec![0.0; k];
    for pos in (0..n - 1).rev() {
        let factor = &factors[pos];
        let (head, tail) = betas.split_at_mut(pos + 1);
        let next = &tail[0];
        let out = &mut head[pos];
        for (i, slot) in out.iter_mut().enumerate() {
            for (j, s) in scratch.iter_mut().enumerate() {
                *s = factor.get(i, j) + next[j];
            }
            *slot = log_sum_exp(&scratch);
        }
        let c = log_sum_exp(out);
        if c == f64::NEG_INFINITY {
            return Err(ZeroMass);
        }
        out.iter_mut().for_each(|v| *v -= c);
    }

    let marginals = alphas
        .iter()
        .zip(&betas)
        .map(|(a, b)| {
            let joint: Vec<LogValue> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            let c = log_sum_exp(&joint);
            if c == f64::NEG_INFINITY {
                return Err(ZeroMass);
            }
            Ok(joint.into_iter().map(|v| v - c).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ChainPosterior { marginals })
}

fn forward(first: &[LogValue], factors: &[Table2]) -> Result<(Vec<Vec<LogValue>>, LogValue), ZeroMass> {
    let k = first.len();
    let mut alphas = Vec::with_capacity(factors.len() + 1);
    let mut total = log_sum_exp(first);
    if total == f64::NEG_INFINITY {
        return Err(ZeroMass);
    }
    alphas.push(first.iter().map(|v| v - total).collect::<Vec<_>>());

    let mut scratch = vec![0.0; k];
    for factor in factors {
        let prev = alphas.last().expect("non-empty");
        let mut next = vec![0.0; k];
        for (j, slot) in next.iter_mut().enumerate() {
            for (i, s) in scratch.iter_mut().enumerate() {
                *s = prev[i] + factor.get(i, j);
            }
            *slot = log_sum_exp(&scratch);
        }
        let c = log_sum_exp(&next);
        if c == f64::NEG_INFINITY {
            return Err(ZeroMass);
        }
        next.iter_mut().for_each(|v| *v -= c);
        total += c;
        alphas.push(next);
    }
    Ok((alphas, total))
}
