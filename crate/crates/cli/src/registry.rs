use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::artifacts::ArtifactSink;
use crate::error::{CliError, CliResult};
use crate::scenario::Resolved;

/// One pass/fail outcome reported by a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Check {
    pub fn flag(name: &str, passed: bool) -> Self {
        Check {
            name: name.to_string(),
            passed,
            value: None,
            threshold: None,
        }
    }

    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            passed: value <= threshold,
            value: Some(value),
            threshold: Some(threshold),
        }
    }
}

pub trait Task: Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    /// Checks that the scenario carries everything the task needs, without
    /// running it.
    fn validate(&self, sc: &Resolved) -> CliResult<()>;

    fn run(&self, sc: &Resolved, out: &mut ArtifactSink) -> CliResult<Vec<Check>>;
}

/// Tasks keyed by name.
#[derive(Default)]
pub struct TaskRegistry {
    tasks: BTreeMap<&'static str, Box<dyn Task>>,
}

impl TaskRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding every built-in task.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        for t in crate::tasks::builtin() {
            r.register(t);
        }
        r
    }

    /// Adds a task, replacing any task of the same name.
    pub fn register(&mut self, task: Box<dyn Task>) {
        self.tasks.insert(task.name(), task);
    }

    pub fn get(&self, name: &str) -> CliResult<&dyn Task> {
        self.tasks.get(name).map(|t| t.as_ref()).ok_or_else(|| {
            CliError::validation(
                "task",
                format!("unknown task {name:?}; available: {}", self.names().join(", ")),
            )
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tasks.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Task> {
        self.tasks.values().map(|t| t.as_ref())
    }
}
