//! δ–ρ experiments over obstacle families, fits of the logarithmic rate law, the
//! `N(δ)` diagnostic, the Hankel-ratio counterexample and the command-line front end.

mod cli;
mod example1;
mod experiment;
mod ratefit;

pub use cli::{cli_main, read_config, write_ratefit_csv, ForwardJob, ReconstructJob};
pub use example1::{annulus_norm, boundary_norm, example1_demo, write_example1_csv, Example1Row, SCALED_PRODUCT_INTERVAL};
pub use experiment::{
    run_pair_family, ExperimentSpec, GridSpec, Perturbation, StabilityExperiment, StabilityRecord, Tolerances,
};
pub use ratefit::{delta_domain_limit, fit_rate, n_of_delta, rate_variable, RateFit, MIN_FIT_RECORDS};
