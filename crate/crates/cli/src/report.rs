use std::fmt;
use std::process::ExitCode;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use pwlmip::approx::ApproxError;
use pwlmip::covering::CoverError;
use pwlmip::io::InputError;
use pwlmip::milp::{MilpError, SolveStats};
use pwlmip::reduction::ReductionError;
use pwlmip::voting::VotingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Feasible,
    Infeasible,
    Error,
    ResourceExhausted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::Error => "error",
            Status::ResourceExhausted => "resource-exhausted",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub nodes: u64,
    pub lp_pivots: u64,
    pub milp_solves: u64,
}

impl From<&SolveStats> for Stats {
    fn from(s: &SolveStats) -> Self {
        Self {
            nodes: s.nodes,
            lp_pivots: s.lp_pivots,
            milp_solves: s.milp_solves,
        }
    }
}

/// Outcome of one invocation. Wall time is only serialized on request so
/// that reports of identical runs are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub status: Status,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub solution: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<Stats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl RunReport {
    pub fn new(command: &'static str, status: Status) -> Self {
        Self {
            command,
            status,
            solution: Value::Null,
            cost: None,
            stats: None,
            seed: None,
            message: None,
            wall_time_ms: None,
        }
    }

    pub fn solved(command: &'static str, feasible: bool) -> Self {
        Self::new(
            command,
            if feasible {
                Status::Feasible
            } else {
                Status::Infeasible
            },
        )
    }

    pub fn with_solution(mut self, solution: impl Serialize) -> Self {
        self.solution = serde_json::to_value(solution).expect("solution serializes");
        self
    }

    pub fn with_cost(mut self, cost: impl Serialize) -> Self {
        self.cost = Some(serde_json::to_value(cost).expect("cost serializes"));
        self
    }

    pub fn with_stats(mut self, stats: &SolveStats) -> Self {
        self.stats = Some(stats.into());
        self
    }

    pub fn set_wall_time(&mut self, elapsed: Duration) {
        self.wall_time_ms = Some(elapsed.as_secs_f64() * 1000.0);
    }
}

/// How a failed run ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Malformed or unsupported input; exit code 2.
    Input(String),
    /// Node limit hit; exit code 3.
    Exhausted(String),
    /// Anything else; exit code 1.
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Input(_) => ExitCode::from(2),
            Failure::Exhausted(_) => ExitCode::from(3),
            Failure::Internal(_) => ExitCode::FAILURE,
        }
    }

    pub fn status(&self) -> Status {
        match self {
            Failure::Exhausted(_) => Status::ResourceExhausted,
            _ => Status::Error,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Exhausted(m) | Failure::Internal(m) => m,
        }
    }

    /// Input error located in `path`.
    pub fn in_file(path: &str, err: InputError) -> Self {
        Failure::Input(format!("{path}: {err}"))
    }
}

impl From<MilpError> for Failure {
    fn from(e: MilpError) -> Self {
        match e {
            MilpError::ResourceExhausted { .. } => Failure::Exhausted(e.to_string()),
            MilpError::UnboundedInteger { .. } | MilpError::EmptyBracket { .. } => {
                Failure::Input(e.to_string())
            }
            MilpError::Internal(_) => Failure::Internal(e.to_string()),
        }
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        match e {
            ReductionError::Milp(inner) => inner.into(),
            ReductionError::Invalid(_)
            | ReductionError::NotNormalized { .. }
            | ReductionError::UnboundedTransformedInteger { .. }
            | ReductionError::UnboundedObjective { .. } => Failure::Input(e.to_string()),
            ReductionError::WitnessLength { .. } | ReductionError::LiftFailed(_) => {
                Failure::Internal(e.to_string())
            }
        }
    }
}

impl From<CoverError> for Failure {
    fn from(e: CoverError) -> Self {
        match e {
            CoverError::Reduction(inner) => inner.into(),
            CoverError::Inconsistent(_) => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ApproxError> for Failure {
    fn from(e: ApproxError) -> Self {
        match e {
            ApproxError::Cover(inner) => inner.into(),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<VotingError> for Failure {
    fn from(e: VotingError) -> Self {
        match e {
            VotingError::Cover(inner) => inner.into(),
            VotingError::Reduction(inner) => inner.into(),
            VotingError::Inconsistent(_) => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}
