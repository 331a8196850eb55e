//! Dense linear algebra, the policy MLP, categorical helpers, seeded RNG
//! streams and a central-difference gradient checker. Everything here works
//! in `f64`.

mod categorical;
mod gradcheck;
mod matrix;
mod mlp;
mod rng;

pub use categorical::{entropy, log_softmax, sample_categorical, softmax};
pub use gradcheck::{check_gradients, DEFAULT_EPS};
pub use matrix::Matrix;
pub use mlp::{mlp_backward, mlp_forward, MlpCache, MlpParams};
pub use rng::Rng;
