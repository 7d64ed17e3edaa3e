//! Non-binary polar codes over AWGN with equidistant 2x2 polarizing kernels.
//!
//! The crate covers the whole pipeline: signal sets, Latin-square kernels,
//! one-step distance spectra and union bounds, exhaustive kernel search,
//! a q-ary polar encoder with SC decoding, and Monte Carlo campaigns.

pub mod channel;
pub mod cli;
pub mod error;
pub mod format;
pub mod kernel;
pub mod parallel;
pub mod polar;
pub mod search;
pub mod signal_set;
pub mod sim;
pub mod spectrum;

pub use channel::{likelihoods, transmit, ChannelParams, LikelihoodVector, StreamSeed};
pub use error::{Error, Result};
pub use kernel::{permutation_kernel, reed_solomon_kernel, standard_kernel, Kernel, Permutation};
pub use polar::{encode, genie_reliabilities, sc_decode, select_information_set, PolarCodeConfig, StageAssignment};
pub use search::{search_permutations, Certificate, SearchOptions, SearchResult};
pub use signal_set::{psk, SignalSet};
pub use sim::{overlay_bounds, simulate_bad_channel, simulate_fer, simulate_good_channel, SimOptions, SimResult};
pub use spectrum::{bad_spectrum, good_spectrum, union_bound, ChannelRole, DistanceSpectrum};
