//! Theory-driven conceptual scaling: categorical propositions about instances,
//! grouped by perspective, become a formal context with one quality dimension
//! per perspective and one attribute per proposition.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextError, FormalContext, QualityDimension};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perspective {
    pub name: String,
    pub propositions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineEntry {
    pub granule: u64,
    pub instance: String,
    pub truth: BTreeMap<String, bool>,
}

/// Raw input to scaling. Field order matches the JSON schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub perspectives: Vec<Perspective>,
    pub timeline: Vec<TimelineEntry>,
}

impl Scenario {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ScaleError> {
        serde_json::from_slice(bytes).map_err(|e| ScaleError::Parse { line: e.line(), column: e.column(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    MissingTruth { instance: String, proposition: String },
    DuplicateInstance { instance: String, granule: u64 },
    DuplicateProposition { perspective: String, proposition: String },
    UnknownProposition { instance: String, proposition: String },
    GranuleRegression { instance: String, granule: u64, previous: u64 },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::MissingTruth { instance, proposition } => {
                write!(f, "instance `{instance}` has no truth value for `{proposition}`")
            }
            Finding::DuplicateInstance { instance, granule } => {
                write!(f, "instance `{instance}` appears again at granule {granule}")
            }
            Finding::DuplicateProposition { perspective, proposition } => {
                write!(f, "perspective `{perspective}` lists `{proposition}` twice")
            }
            Finding::UnknownProposition { instance, proposition } => {
                write!(f, "instance `{instance}` assigns undeclared proposition `{proposition}`")
            }
            Finding::GranuleRegression { instance, granule, previous } => {
                write!(f, "instance `{instance}` at granule {granule} follows granule {previous}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ScaleReport {
    pub instances: usize,
    pub perspectives: usize,
    pub propositions: usize,
    pub warnings: Vec<Finding>,
}

impl ScaleReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScaleError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scenario is invalid: {}", .0.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(ScaleReport),
    #[error(transparent)]
    Context(#[from] ContextError),
}

/// Collects every problem with `s` without building a context.
pub fn validate_scenario(s: &Scenario) -> ScaleReport {
    let mut warnings = Vec::new();
    let mut declared = HashSet::new();
    for p in &s.perspectives {
        let mut local = HashSet::new();
        for prop in &p.propositions {
            if !local.insert(prop.as_str()) {
                warnings.push(Finding::DuplicateProposition { perspective: p.name.clone(), proposition: prop.clone() });
            }
            declared.insert(prop.as_str());
        }
    }

    let mut seen: HashMap<&str, u64> = HashMap::new();
    let mut previous: Option<u64> = None;
    for entry in &s.timeline {
        if let Some(prev) = previous {
            if entry.granule < prev {
                warnings.push(Finding::GranuleRegression {
                    instance: entry.instance.clone(),
                    granule: entry.granule,
                    previous: prev,
                });
            }
        }
        previous = Some(previous.map_or(entry.granule, |p| p.max(entry.granule)));
        if seen.insert(entry.instance.as_str(), entry.granule).is_some() {
            warnings.push(Finding::DuplicateInstance { instance: entry.instance.clone(), granule: entry.granule });
            continue;
        }
        for p in &s.perspectives {
            for prop in &p.propositions {
                if !entry.truth.contains_key(prop) {
                    warnings.push(Finding::MissingTruth { instance: entry.instance.clone(), proposition: prop.clone() });
                }
            }
        }
        for key in entry.truth.keys() {
            if !declared.contains(key.as_str()) {
                warnings.push(Finding::UnknownProposition { instance: entry.instance.clone(), proposition: key.clone() });
            }
        }
    }

    ScaleReport {
        instances: seen.len(),
        perspectives: s.perspectives.len(),
        propositions: s.perspectives.iter().map(|p| p.propositions.len()).sum(),
        warnings,
    }
}

/// Builds the formal context of a scenario.
///
/// The outer loop runs over perspectives in declaration order and the inner
/// loop over the timeline, so columns are grouped by perspective and rows
/// follow the order instances first appear.
pub fn scale_scenario(s: &Scenario) -> Result<(FormalContext, ScaleReport), ScaleError> {
    let report = validate_scenario(s);
    if !report.is_clean() {
        return Err(ScaleError::Invalid(report));
    }
    let objects: Vec<String> = s.timeline.iter().map(|e| e.instance.clone()).collect();
    let width: usize = report.propositions;
    let mut incidence = vec![Vec::with_capacity(width); objects.len()];
    for perspective in &s.perspectives {
        for (row, entry) in incidence.iter_mut().zip(&s.timeline) {
            for prop in &perspective.propositions {
                row.push(entry.truth[prop]);
            }
        }
    }
    let dimensions = s
        .perspectives
        .iter()
        .map(|p| QualityDimension { name: p.name.clone(), attributes: p.propositions.clone() })
        .collect();
    let granules = s.timeline.iter().map(|e| (e.instance.clone(), e.granule)).collect();
    let ctx = FormalContext::new(objects, dimensions, incidence, Some(granules))?;
    Ok((ctx, report))
}
