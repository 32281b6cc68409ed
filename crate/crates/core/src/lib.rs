//! Shapley-value explanations computed through three routes that agree on
//! the full coalition design: the marginal-contribution formula, constrained
//! weighted least squares over a coalition design, and the functional ANOVA
//! decomposition of the model.

pub mod attribution;
pub mod coalition;
pub mod design;
pub mod distribution;
pub mod error;
pub mod exact;
pub mod fanova;
pub mod linalg;
pub mod model;
pub mod regression;
pub mod rng;
pub mod search;
pub mod sensitivity;
pub mod table3;

pub use coalition::Coalition;
pub use design::DesignMatrix;
pub use error::{Error, Result};
pub use model::{BuiltinFunction, ModelFunction};
