//! On-disk layout of a process directory. `state.json` is authoritative;
//! the other files are derived views written alongside it.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::harmonize::serialize_decisions;
use crate::pid::serialize_pid;
use crate::process::ProcessState;

pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("no process in {0}; run init first")]
    NotInitialized(PathBuf),
    #[error(transparent)]
    Reference(#[from] crate::model::ReferenceError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), ProjectError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn exists(dir: &Path) -> bool {
    dir.join(STATE_FILE).is_file()
}

pub fn load(dir: &Path) -> Result<ProcessState, ProjectError> {
    let path = dir.join(STATE_FILE);
    if !path.is_file() {
        return Err(ProjectError::NotInitialized(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| ProjectError::Json { path, source })
}

pub fn save(dir: &Path, state: &ProcessState) -> Result<(), ProjectError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = serde_json::to_string_pretty(state).map_err(|source| ProjectError::Json {
        path: dir.join(STATE_FILE),
        source,
    })? + "\n";
    write_atomic(&dir.join("bundle.pid"), &serialize_pid(&state.bundle)?)?;
    write_atomic(&dir.join("initial.pid"), &serialize_pid(&state.initial)?)?;
    write_atomic(
        &dir.join("decisions.pid"),
        &serialize_decisions(&state.decisions),
    )?;
    write_atomic(&dir.join("audit.log"), &state.audit_log())?;
    write_atomic(&dir.join("journal.jsonl"), &state.journal_jsonl())?;
    if let Some(a) = &state.artifacts {
        let out = dir.join("artifacts");
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        write_atomic(&out.join("icd.txt"), &a.icd)?;
        write_atomic(&out.join("schema.idl"), &a.idl)?;
        write_atomic(&out.join("nodes.tsv"), &a.nodes_tsv)?;
        write_atomic(&out.join("edges.tsv"), &a.edges_tsv)?;
    }
    write_atomic(&dir.join(STATE_FILE), &json)
}
