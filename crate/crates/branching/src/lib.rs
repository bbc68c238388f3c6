//! Critical Markov branching processes with heavy-tailed offspring laws and
//! non-homogeneous Poisson immigration with heavy-tailed batch sizes.
//!
//! The crate has three layers:
//!
//! - exact machinery: parametric laws ([`laws`]), the `V`/`W`/`Psi`
//!   transform chain ([`transforms`]), and numerical evaluation of the
//!   process's distributional objects ([`analytic`]);
//! - asymptotic theory: regime classification, survival-probability
//!   asymptotes, and the catalog of limiting distributions
//!   ([`asymptotics`]);
//! - empirics: an exact event-driven simulator ([`simulate`]) and a Monte
//!   Carlo comparison harness ([`verify`]).

pub mod analytic;
pub mod asymptotics;
pub mod error;
pub mod laws;
pub mod quad;
pub mod simulate;
pub mod special;
pub mod transforms;
pub mod verify;

pub use analytic::{AnalyticEngine, IntegralValue, Normalization};
pub use asymptotics::{
    classify, limit_laws, predict_survival, LimitLaw, LimitTag, Regime, RegimeTag,
};
pub use error::{Error, Result};
pub use laws::{ImmigrationLaw, IntensityLaw, LawSet, OffspringLaw, SlowlyVarying, SvfKind};
pub use simulate::{SimConfig, SimOutcome, Simulator};
pub use transforms::TransformChain;
pub use verify::{ComparisonReport, Estimate, TolerancePolicy};

