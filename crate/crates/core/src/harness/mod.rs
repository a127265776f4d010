//! Configuration, the named scenario library, and run-directory I/O
//! behind the command-line tool.

pub mod config;
pub mod library;
pub mod runner;

pub use config::{apply_override, split_override, Algorithm, ConfigErrors, ConfigIssue, Prepared, RunConfig};
pub use library::{find, LibraryEntry, LIBRARY};
pub use runner::{analyze_dir, check_graph, execute, run_to_dir, AnalysisOutput, Execution, GraphCheck, HarnessError, RunSummary};
