//! Model files, check suites and canonical reports for `g2dual`.

pub mod model;
pub mod report;
pub mod suite;
pub mod trace;

pub use model::{
    bundled, content_hash, parse_model, ModelBody, ModelError, ModelFile, ModelKind, BUNDLED,
};
pub use report::{canonical_json, CheckEntry, Report, Status};
pub use suite::{run_suite, Suite, SuiteOptions};
pub use trace::{trace_records, TraceOptions};
