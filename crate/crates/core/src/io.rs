//! JSON file plumbing shared by every on-disk format.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{InputError, Issue};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let bytes = fs::read(path).map_err(|cause| InputError::Io {
        path: path.to_path_buf(),
        cause,
    })?;
    from_json_bytes(path, &bytes)
}

pub fn from_json_bytes<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, InputError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let at = err.path().to_string();
        InputError::Schema {
            path: path.to_path_buf(),
            at,
            message: err.into_inner().to_string(),
        }
    })
}

/// Pretty-printed JSON with a trailing newline. Key order follows struct
/// declaration order, so output is byte-stable for equal values.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory values always serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    fs::write(path, to_json_string(value))
}

pub(crate) fn check_format(found: &str, expected: &str, issues: &mut Vec<Issue>) {
    if found != expected {
        issues.push(Issue::error(
            "format",
            format!("expected format \"{expected}\", found \"{found}\""),
        ));
    }
}

pub(crate) fn into_result(path: &Path, issues: Vec<Issue>) -> Result<Vec<Issue>, InputError> {
    if issues.iter().any(Issue::is_error) {
        Err(InputError::Invalid {
            path: path.to_path_buf(),
            issues: issues.into_iter().filter(Issue::is_error).collect(),
        })
    } else {
        Ok(issues)
    }
}
