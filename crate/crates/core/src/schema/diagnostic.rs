use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

macro_rules! codes {
    ($($variant:ident => $text:literal,)*) => {
        /// Stable machine-readable diagnostic codes.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum Code {
            $(#[serde(rename = $text)] $variant,)*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[$(Code::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Code::$variant => $text,)*
                }
            }
        }
    };
}

codes! {
    ParseError => "parse-error",
    UnsupportedVersion => "unsupported-version",
    DuplicateId => "duplicate-id",
    DanglingRef => "dangling-ref",
    EmptyRoots => "empty-roots",
    TopicMismatch => "topic-mismatch",
    EmptyScripts => "empty-scripts",
    BadWidget => "bad-widget",
    BadProperty => "bad-property",
    EmptyErrorPrompts => "empty-error-prompts",
    BadAttempts => "bad-attempts",
    RuleParseError => "rule-parse-error",
    UnknownVariable => "unknown-variable",
    ChoiceWithoutOptions => "choice-without-options",
    SelfLoop => "self-loop",
    DuplicatePriority => "duplicate-priority",
    BadFetch => "bad-fetch",
    InvertedWindow => "inverted-window",
    BadSchedule => "bad-schedule",
    CycleDetected => "cycle-detected",
    UnreachableNode => "unreachable-node",
    NonRootSchedule => "non-root-schedule",
    RemoteCheckUnsupported => "remote-check-unsupported",
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One finding about a schema document. Errors block execution; warnings do not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub entity_id: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: Code, entity_id: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            entity_id: entity_id.into(),
            message: message.into(),
        }
    }

    pub fn warning(code: Code, entity_id: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            entity_id: entity_id.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Rendered as `severity code entity_id: message`.
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}: {}", self.severity, self.code, self.entity_id, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}
