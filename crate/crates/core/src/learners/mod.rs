//! Built-in prescriptive baselines.

pub mod encoding;
pub mod kmeans;
pub mod kmeans_q;
pub mod qlearning;
pub mod ridge;
pub mod slearner;

pub use encoding::{encode_prefix, prefix_features, PrefixEncoding, FEATURE_DIM};
pub use kmeans::{KMeans, Standardizer};
pub use kmeans_q::{KMeansQPolicy, StateAbstraction};
pub use qlearning::{q_learn, EpisodicEnv, QConfig, QTable, Transition};
pub use ridge::fit_ridge;
pub use slearner::{SLearner, SLearnerPolicy};
