//! Versioned JSON documents.
//!
//! Every input file carries a top-level `"format"` tag (`"emip-v1"`,
//! `"cover-v1"`, `"election-v1"`). Decoding errors report the line and column
//! that serde_json stopped at.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("expected \"format\": \"{expected}\", found {}", found.as_deref().map_or("no format field".to_string(), |f| format!("{f:?}")))]
    Format {
        expected: &'static str,
        found: Option<String>,
    },
    #[error("{0}")]
    Invalid(String),
}

impl From<serde_json::Error> for InputError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep only the cause.
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        InputError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Deserialize)]
struct Tag {
    format: Option<String>,
}

/// Decodes `text` after checking its format tag.
pub fn read_document<T: DeserializeOwned>(
    text: &str,
    format: &'static str,
) -> Result<T, InputError> {
    let tag: Tag = serde_json::from_str(text)?;
    if tag.format.as_deref() != Some(format) {
        return Err(InputError::Format {
            expected: format,
            found: tag.format,
        });
    }
    Ok(serde_json::from_str(text)?)
}
