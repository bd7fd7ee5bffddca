//! Stage-tagged errors and process exit codes.

use std::fmt;

use debris_twin_core::{Error, ErrorFamily};
use serde::Serialize;

/// Exit codes. Stable; documented in the README.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const GEOMETRY: i32 = 6;
    pub const RISK: i32 = 7;
    pub const OUTPUT: i32 = 8;
}

pub fn exit_code(family: ErrorFamily) -> i32 {
    match family {
        ErrorFamily::Input => exit::INPUT,
        ErrorFamily::Validation => exit::VALIDATION,
        ErrorFamily::Config => exit::CONFIG,
        ErrorFamily::Geometry => exit::GEOMETRY,
        ErrorFamily::Risk => exit::RISK,
        ErrorFamily::Output => exit::OUTPUT,
    }
}

/// A core error and the stage it stopped.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl StageError {
    pub fn new(stage: &'static str, error: Error) -> Self {
        StageError { stage, error }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.error.family())
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            stage: &'a str,
            family: &'a str,
            code: i32,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper {
            error: Body {
                stage: self.stage,
                family: self.error.family().name(),
                code: self.exit_code(),
                message: self.error.to_string(),
            },
        })
        .expect("error report serializes")
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_family_has_a_distinct_nonzero_code() {
        let families = [
            ErrorFamily::Input,
            ErrorFamily::Validation,
            ErrorFamily::Config,
            ErrorFamily::Geometry,
            ErrorFamily::Risk,
            ErrorFamily::Output,
        ];
        let mut codes: Vec<i32> = families.iter().map(|&f| exit_code(f)).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), families.len());
        assert!(codes.iter().all(|&c| c > exit::USAGE));
    }

    #[test]
    fn json_is_one_line_with_stage_and_code() {
        let e = StageError::new(
            "risk",
            Error::MissingDensity {
                class: "plywood".into(),
            },
        );
        let line = e.to_json();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"]["stage"], "risk");
        assert_eq!(v["error"]["family"], "risk");
        assert_eq!(v["error"]["code"], 7);
        assert!(v["error"]["message"].as_str().unwrap().contains("plywood"));
    }
}
