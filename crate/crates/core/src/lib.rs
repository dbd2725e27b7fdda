//! Linear-chain conditional random fields, hidden Markov chains, and the
//! explicit construction of a hidden Markov chain with the same posterior as
//! a given CRF.
//!
//! * [`tables`]: alphabets, log-domain tables, `log_sum_exp`.
//! * [`crf`] and [`hmc`]: the two model families with forward-backward
//!   marginals and maximum posterior mode decoding.
//! * [`equivalence`]: CRF to HMC construction with its intermediate tables.
//! * [`oracle`]: brute-force enumeration used to certify everything else.
//! * [`verify`]: sweeps over observation sequences comparing two posteriors.
//! * [`cli`]: the `crf-hmc` command-line front end and its file formats.

mod chain;
pub mod cli;
pub mod crf;
pub mod equivalence;
pub mod error;
pub mod exec;
pub mod hmc;
pub mod oracle;
pub mod tables;
pub mod verify;

pub use crf::{CrfModel, Mode, PosteriorMarginals};
pub use equivalence::{crf_to_hmc, crf_to_hmc_generalized, ConstructionTrace};
pub use error::{Error, Result};
pub use exec::Exec;
pub use hmc::HmcModel;
pub use tables::{hamming_loss, log_sum_exp, normalize_log, Alphabet, LabelSeq, LogValue, ObsSeq, Table1, Table2};
