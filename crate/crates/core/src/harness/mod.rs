//! Instance IO, compute records and verification suites shared by the
//! command-line tools and the FFI layer.

pub mod instance;
pub mod record;
pub mod suites;

pub use instance::{generate_instance, ProblemInstance, Tolerances};
pub use record::{emit_curves, run_compute, GridSpec, ResultRecord};
pub use suites::{identities_check, moi_check, ssf_verify, SuiteReport, VerifyConfig};
