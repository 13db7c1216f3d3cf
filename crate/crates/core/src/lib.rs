pub mod error;
pub mod numerics;

pub use error::{Error, FormatError, Result};
pub mod preprocess;
pub mod rnn;
pub mod training;
pub mod cnn;
pub mod cotrain;
pub mod metrics;
pub mod io;
