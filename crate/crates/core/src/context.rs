//! Formal contexts `K = (G, M, I)` whose attributes are grouped into quality
//! dimensions and whose objects carry the time granule they were learnt at.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("incidence shape mismatch: expected {expected_rows}x{expected_cols}, got {actual_rows}x{actual_cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        actual_rows: usize,
        actual_cols: usize,
    },
    #[error("quality dimension `{0}` has no attributes")]
    EmptyDimension(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("no granule given for object `{0}`")]
    MissingGranule(String),
    #[error("granule {granule} precedes the latest granule {latest}")]
    GranuleRegression { granule: u64, latest: u64 },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("cxt cannot represent this context: {0}")]
    CxtLossy(String),
}

/// Discrete step index of a learning trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeGranule(pub u64);

impl TimeGranule {
    pub fn next(self) -> TimeGranule {
        TimeGranule(self.0 + 1)
    }
}

impl fmt::Display for TimeGranule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}", self.0)
    }
}

/// A named group of attributes describing one perspective on the objects.
///
/// Field order matches the sorted-key canonical JSON.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityDimension {
    pub attributes: Vec<String>,
    pub name: String,
}

impl QualityDimension {
    pub fn new<S: Into<String>, A: Into<String>>(name: S, attributes: impl IntoIterator<Item = A>) -> Self {
        QualityDimension {
            name: name.into(),
            attributes: attributes.into_iter().map(Into::into).collect(),
        }
    }
}

/// An immutable formal context. Every "change" produces a new value.
#[derive(Clone)]
pub struct FormalContext {
    objects: Vec<String>,
    dimensions: Vec<QualityDimension>,
    attributes: Vec<String>,
    rows: Vec<BitSet>,
    granules: Vec<TimeGranule>,
    object_index: HashMap<String, usize>,
    attribute_index: HashMap<String, usize>,
}

impl PartialEq for FormalContext {
    fn eq(&self, other: &Self) -> bool {
        self.objects == other.objects
            && self.dimensions == other.dimensions
            && self.rows == other.rows
            && self.granules == other.granules
    }
}

impl Eq for FormalContext {}

impl fmt::Debug for FormalContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormalContext")
            .field("objects", &self.objects)
            .field("dimensions", &self.dimensions)
            .field("rows", &self.rows)
            .field("granules", &self.granules)
            .finish()
    }
}

impl FormalContext {
    /// Validates names and shape. Omitted granules default to 0 for every object.
    pub fn new(
        objects: Vec<String>,
        dimensions: Vec<QualityDimension>,
        incidence: Vec<Vec<bool>>,
        granules: Option<BTreeMap<String, u64>>,
    ) -> Result<Self, ContextError> {
        let attribute_index = index_attributes(&dimensions)?;
        let attributes: Vec<String> = dimensions.iter().flat_map(|d| d.attributes.iter().cloned()).collect();

        let mut object_index = HashMap::with_capacity(objects.len());
        for (i, name) in objects.iter().enumerate() {
            if object_index.insert(name.clone(), i).is_some() {
                return Err(ContextError::DuplicateName(name.clone()));
            }
        }

        let cols = attributes.len();
        let bad_row = incidence.iter().find(|r| r.len() != cols);
        if incidence.len() != objects.len() || bad_row.is_some() {
            return Err(ContextError::ShapeMismatch {
                expected_rows: objects.len(),
                expected_cols: cols,
                actual_rows: incidence.len(),
                actual_cols: bad_row.or(incidence.first()).map_or(cols, |r| r.len()),
            });
        }
        let rows = incidence
            .iter()
            .map(|r| BitSet::from_indices(cols, r.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)))
            .collect();

        let granules = match granules {
            None => vec![TimeGranule(0); objects.len()],
            Some(map) => {
                if let Some(stray) = map.keys().find(|k| !object_index.contains_key(*k)) {
                    return Err(ContextError::UnknownObject(stray.clone()));
                }
                objects
                    .iter()
                    .map(|o| map.get(o).map(|&g| TimeGranule(g)).ok_or_else(|| ContextError::MissingGranule(o.clone())))
                    .collect::<Result<_, _>>()?
            }
        };

        Ok(FormalContext { objects, dimensions, attributes, rows, granules, object_index, attribute_index })
    }

    /// A context with the given dimensions and no objects.
    pub fn attributes_only(dimensions: Vec<QualityDimension>) -> Result<Self, ContextError> {
        Self::new(Vec::new(), dimensions, Vec::new(), None)
    }

    /// Same dimensions as `self`, no objects.
    pub fn without_objects(&self) -> FormalContext {
        FormalContext {
            objects: Vec::new(),
            dimensions: self.dimensions.clone(),
            attributes: self.attributes.clone(),
            rows: Vec::new(),
            granules: Vec::new(),
            object_index: HashMap::new(),
            attribute_index: self.attribute_index.clone(),
        }
    }

    /// Returns a new context with `name` appended; `self` is left untouched.
    pub fn add_object<S: AsRef<str>>(
        &self,
        name: &str,
        intent: &[S],
        granule: TimeGranule,
    ) -> Result<FormalContext, ContextError> {
        let row = self.attribute_set(intent)?;
        self.add_object_row(name, row, granule)
    }

    pub fn add_object_row(&self, name: &str, row: BitSet, granule: TimeGranule) -> Result<FormalContext, ContextError> {
        if self.object_index.contains_key(name) {
            return Err(ContextError::DuplicateName(name.to_string()));
        }
        assert_eq!(row.universe(), self.attributes.len(), "row width must match the attribute count");
        if let Some(latest) = self.latest_granule() {
            if granule < latest {
                return Err(ContextError::GranuleRegression { granule: granule.0, latest: latest.0 });
            }
        }
        let mut next = self.clone();
        next.object_index.insert(name.to_string(), next.objects.len());
        next.objects.push(name.to_string());
        next.rows.push(row);
        next.granules.push(granule);
        Ok(next)
    }

    /// The sub-context of objects born at or before `granule`.
    pub fn as_of(&self, granule: TimeGranule) -> FormalContext {
        let mut out = self.without_objects();
        for (i, name) in self.objects.iter().enumerate() {
            if self.granules[i] <= granule {
                out.object_index.insert(name.clone(), out.objects.len());
                out.objects.push(name.clone());
                out.rows.push(self.rows[i].clone());
                out.granules.push(self.granules[i]);
            }
        }
        out
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn dimensions(&self) -> &[QualityDimension] {
        &self.dimensions
    }

    /// Global attribute order: the concatenation of the dimension attribute lists.
    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn object_position(&self, name: &str) -> Option<usize> {
        self.object_index.get(name).copied()
    }

    pub fn attribute_position(&self, name: &str) -> Option<usize> {
        self.attribute_index.get(name).copied()
    }

    /// Intent of object `i` as a bit set over the attribute order.
    pub fn row(&self, i: usize) -> &BitSet {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BitSet] {
        &self.rows
    }

    pub fn incidence(&self, object: usize, attribute: usize) -> bool {
        self.rows[object].contains(attribute)
    }

    pub fn birth_granule(&self, i: usize) -> TimeGranule {
        self.granules[i]
    }

    pub fn granules(&self) -> &[TimeGranule] {
        &self.granules
    }

    pub fn latest_granule(&self) -> Option<TimeGranule> {
        self.granules.iter().copied().max()
    }

    /// Index range of each dimension's attributes within the global order.
    pub fn dimension_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.dimensions
            .iter()
            .map(|d| {
                let r = start..start + d.attributes.len();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn attribute_set<S: AsRef<str>>(&self, names: &[S]) -> Result<BitSet, ContextError> {
        let mut set = BitSet::new(self.attributes.len());
        for n in names {
            let n = n.as_ref();
            let i = self.attribute_position(n).ok_or_else(|| ContextError::UnknownAttribute(n.to_string()))?;
            set.insert(i);
        }
        Ok(set)
    }

    pub fn object_set<S: AsRef<str>>(&self, names: &[S]) -> Result<BitSet, ContextError> {
        let mut set = BitSet::new(self.objects.len());
        for n in names {
            let n = n.as_ref();
            let i = self.object_position(n).ok_or_else(|| ContextError::UnknownObject(n.to_string()))?;
            set.insert(i);
        }
        Ok(set)
    }

    pub fn attribute_names(&self, set: &BitSet) -> Vec<String> {
        set.iter().map(|i| self.attributes[i].clone()).collect()
    }

    pub fn object_names(&self, set: &BitSet) -> Vec<String> {
        set.iter().map(|i| self.objects[i].clone()).collect()
    }

    /// Incidence as a boolean matrix, objects by attributes.
    pub fn incidence_matrix(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|r| (0..self.attributes.len()).map(|j| r.contains(j)).collect())
            .collect()
    }

    pub fn granule_map(&self) -> BTreeMap<String, u64> {
        self.objects.iter().cloned().zip(self.granules.iter().map(|g| g.0)).collect()
    }
}

fn index_attributes(dimensions: &[QualityDimension]) -> Result<HashMap<String, usize>, ContextError> {
    let mut dim_names = HashSet::new();
    let mut index = HashMap::new();
    for d in dimensions {
        if !dim_names.insert(d.name.as_str()) {
            return Err(ContextError::DuplicateName(d.name.clone()));
        }
        if d.attributes.is_empty() {
            return Err(ContextError::EmptyDimension(d.name.clone()));
        }
        for a in &d.attributes {
            let next = index.len();
            if index.insert(a.clone(), next).is_some() {
                return Err(ContextError::DuplicateName(a.clone()));
            }
        }
    }
    Ok(index)
}
