use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable error codes. These travel on the wire inside [`ErrorBody`] so a
/// failure raised in one service keeps its identity in the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    InvalidContent,
    InvalidConfig,
    PlanNotFound,
    OrchestrationStepFailed,
    StepCallFailed,
    UnknownComponentType,
    PodUnreachable,
    DeploymentFailed,
    ComponentNotFound,
    PackageNotFound,
    NoEligiblePod,
    NoMatchingComponentType,
    PostDeploymentFailed,
    AlreadyRegistered,
    SurrogateNotFound,
    CapacityExhausted,
    InstanceNotFound,
    ContentSourceUnavailable,
    RegistrationFailed,
    ContentNotFound,
    SegmentNotFound,
    IncompleteTrace,
    InvalidState,
    Timeout,
    Io,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidContent => "INVALID_CONTENT",
            ErrorCode::InvalidConfig => "INVALID_CONFIG",
            ErrorCode::PlanNotFound => "PLAN_NOT_FOUND",
            ErrorCode::OrchestrationStepFailed => "ORCHESTRATION_STEP_FAILED",
            ErrorCode::StepCallFailed => "STEP_CALL_FAILED",
            ErrorCode::UnknownComponentType => "UNKNOWN_COMPONENT_TYPE",
            ErrorCode::PodUnreachable => "POD_UNREACHABLE",
            ErrorCode::DeploymentFailed => "DEPLOYMENT_FAILED",
            ErrorCode::ComponentNotFound => "COMPONENT_NOT_FOUND",
            ErrorCode::PackageNotFound => "PACKAGE_NOT_FOUND",
            ErrorCode::NoEligiblePod => "NO_ELIGIBLE_POD",
            ErrorCode::NoMatchingComponentType => "NO_MATCHING_COMPONENT_TYPE",
            ErrorCode::PostDeploymentFailed => "POST_DEPLOYMENT_FAILED",
            ErrorCode::AlreadyRegistered => "ALREADY_REGISTERED",
            ErrorCode::SurrogateNotFound => "SURROGATE_NOT_FOUND",
            ErrorCode::CapacityExhausted => "CAPACITY_EXHAUSTED",
            ErrorCode::InstanceNotFound => "INSTANCE_NOT_FOUND",
            ErrorCode::ContentSourceUnavailable => "CONTENT_SOURCE_UNAVAILABLE",
            ErrorCode::RegistrationFailed => "REGISTRATION_FAILED",
            ErrorCode::ContentNotFound => "CONTENT_NOT_FOUND",
            ErrorCode::SegmentNotFound => "SEGMENT_NOT_FOUND",
            ErrorCode::IncompleteTrace => "INCOMPLETE_TRACE",
            ErrorCode::InvalidState => "INVALID_STATE",
            ErrorCode::Timeout => "TIMEOUT",
            ErrorCode::Io => "IO",
            ErrorCode::Internal => "INTERNAL",
        }
    }

    /// HTTP status used when this code is returned by a REST endpoint.
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::PlanNotFound
            | ErrorCode::UnknownComponentType
            | ErrorCode::ComponentNotFound
            | ErrorCode::PackageNotFound
            | ErrorCode::SurrogateNotFound
            | ErrorCode::InstanceNotFound
            | ErrorCode::ContentNotFound
            | ErrorCode::SegmentNotFound => 404,
            ErrorCode::InvalidContent | ErrorCode::InvalidConfig | ErrorCode::IncompleteTrace => {
                400
            }
            ErrorCode::AlreadyRegistered | ErrorCode::InvalidState => 409,
            ErrorCode::NoEligiblePod
            | ErrorCode::NoMatchingComponentType
            | ErrorCode::CapacityExhausted => 422,
            ErrorCode::PodUnreachable
            | ErrorCode::ContentSourceUnavailable
            | ErrorCode::StepCallFailed
            | ErrorCode::RegistrationFailed
            | ErrorCode::PostDeploymentFailed => 502,
            ErrorCode::Timeout => 504,
            ErrorCode::OrchestrationStepFailed
            | ErrorCode::DeploymentFailed
            | ErrorCode::Io
            | ErrorCode::Internal => 500,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// JSON error payload returned by every REST endpoint on failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{code}: {message}")]
    Coded { code: ErrorCode, message: String },

    #[error("ORCHESTRATION_STEP_FAILED: step {step_index} failed on instance {instance_id} after {attempts} attempts: {reason}")]
    StepFailed {
        step_index: usize,
        instance_id: String,
        attempts: u32,
        reason: String,
    },

    #[error("DEPLOYMENT_FAILED: {reason} (deployed before failure: {deployed:?})")]
    DeploymentFailed {
        reason: String,
        deployed: Vec<String>,
    },

    #[error("IO: {0}")]
    Io(#[from] std::io::Error),

    #[error("INVALID_CONFIG: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Error::Coded {
            code,
            message: message.into(),
        }
    }

    pub fn code(&self) -> ErrorCode {
        match self {
            Error::Coded { code, .. } => *code,
            Error::StepFailed { .. } => ErrorCode::OrchestrationStepFailed,
            Error::DeploymentFailed { .. } => ErrorCode::DeploymentFailed,
            Error::Io(_) => ErrorCode::Io,
            Error::Json(_) => ErrorCode::InvalidConfig,
        }
    }

    pub fn to_body(&self) -> ErrorBody {
        let message = match self {
            Error::Coded { message, .. } => message.clone(),
            other => other.to_string(),
        };
        ErrorBody {
            code: self.code(),
            message,
        }
    }
}

impl From<ErrorBody> for Error {
    fn from(body: ErrorBody) -> Self {
        Error::Coded {
            code: body.code,
            message: body.message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_wire_names() {
        let json = serde_json::to_string(&ErrorCode::PodUnreachable).unwrap();
        assert_eq!(json, "\"POD_UNREACHABLE\"");
        let back: ErrorCode = serde_json::from_str("\"ORCHESTRATION_STEP_FAILED\"").unwrap();
        assert_eq!(back, ErrorCode::OrchestrationStepFailed);
        assert_eq!(ErrorCode::NoEligiblePod.as_str(), "NO_ELIGIBLE_POD");
    }

    #[test]
    fn body_round_trip_keeps_code() {
        let err = Error::StepFailed {
            step_index: 1,
            instance_id: "i-1".into(),
            attempts: 4,
            reason: "timeout".into(),
        };
        let back: Error = err.to_body().into();
        assert_eq!(back.code(), ErrorCode::OrchestrationStepFailed);
    }
}
