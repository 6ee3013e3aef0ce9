pub mod error;
pub mod questionnaire;
pub mod scoring;
pub mod harness;
pub mod backends;
pub mod stats;
pub mod steering;
pub mod transformer;
pub mod util;
