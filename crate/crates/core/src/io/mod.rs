//! Instance files, result documents and the random instance generator.

mod file;
mod generate;
mod report;

pub use file::{
    canonicalize, emit_instance, parse_instance, EdgeRecord, FileIssue, InstanceFile,
    NodeRecord, ObjectiveRecord, ParseError, UserRecord, FORMAT_VERSION,
};
pub use generate::{generate_instance, GeneratorProfile};
pub use report::{ResultDocument, StateRecord};
