//! Estimation from observed fields: event selection, marginal fitting,
//! extremogram-based and score-based dependence fitting, the Poisson
//! exceedance likelihood, resampling standard errors and the refinement
//! loop for non-linear risk functionals.

mod exceedance;
mod extremogram;
mod intensity;
mod margins;
mod poisson;
mod refine;
mod resample;
mod score;

pub use exceedance::{decluster, ExceedanceSet, Membership};
pub use extremogram::{empirical_extremogram, fit_dependence_ls, pair_estimates, FitResult, PairEstimate, ResamplingMeta};
pub use intensity::{br_intensity, BrIntensity, IntensityEval};
pub use margins::{fit_margins, FlaggedSite, MarginOptions, MarginalModel};
pub use poisson::{fit_dependence_poisson, poisson_loglik, PoissonLik};
pub use refine::{iterative_refinement, Refinement, RefinementStep};
pub use resample::{resample_se, ResampleResult, ResampleScheme};
pub use score::{fit_dependence_score, gradient_score, gradient_score_value, ScoreOptions};
