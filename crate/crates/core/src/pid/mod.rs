//! The PID text format, parsed in stages and written back canonically.

mod lexer;
mod parser;
mod serialize;
pub mod syntax;

pub use lexer::{E_BOM, E_LEX};
pub use parser::{
    parse_pid, parse_pid_str, parse_proposals, ParsedBundle, Source, BUNDLE_KINDS,
    E_DUPLICATE_FIELD, E_DUPLICATE_ID, E_MISSING_FIELD, E_UNIT, E_UNKNOWN_FIELD, E_VALUE,
};
pub use serialize::{serialize_pid, HEADER};
pub use syntax::{parse_blocks, Block, Field, ValueItem, E_SYNTAX, E_UNKNOWN_BLOCK};
