pub mod consistency;
pub mod error;
pub mod experiment;
pub mod lm;
pub mod mbr;
pub mod metrics;
pub mod oracle;
pub mod remote;
pub mod sampler;
pub mod seeds;
pub mod subsample;
pub mod toy;
pub mod transforms;

pub use error::{Error, Result};
