//! Belief states: real, non-negative amplitude vectors over the attribute
//! basis of a context.
//!
//! Each attribute is one basis vector, so orthonormality of the basis is
//! implicit and the inner product is the plain dot product. Measurement
//! follows the Born rule and divides by the state's squared norm, which keeps
//! it well defined for the sub-normalized object states.

use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::bitset::BitSet;
use crate::context::{ContextError, FormalContext};

/// Tolerance for the unit-norm invariant.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("basis must contain at least one attribute")]
    EmptyBasis,
    #[error("state has no nonzero amplitude")]
    ZeroState,
    #[error("states are over different bases")]
    BasisMismatch,
    #[error("outcome has probability zero")]
    ZeroProbability,
    #[error("context has no incidence pairs")]
    EmptyContext,
    #[error("object `{0}` has no attributes and therefore no state")]
    NoAttributes(String),
    #[error("amplitude {0} is not a finite non-negative number")]
    InvalidAmplitude(f64),
    #[error("{basis} basis attributes but {amplitudes} amplitudes")]
    LengthMismatch { basis: usize, amplitudes: usize },
    #[error("observable blocks must partition the basis: {0}")]
    InvalidPartition(String),
    #[error("`normalized` flag disagrees with the amplitudes")]
    NormalizationFlag,
    #[error("malformed ensemble document: {0}")]
    Parse(String),
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    basis: Vec<String>,
    amplitudes: Vec<f64>,
    normalized: bool,
}

fn squared_norm(amplitudes: &[f64]) -> f64 {
    amplitudes.iter().map(|a| a * a).sum()
}

impl BeliefState {
    /// Amplitudes must be finite and non-negative. The `normalized` flag is
    /// derived from the amplitudes.
    pub fn new(basis: Vec<String>, amplitudes: Vec<f64>) -> Result<Self, EnsembleError> {
        if basis.len() != amplitudes.len() {
            return Err(EnsembleError::LengthMismatch { basis: basis.len(), amplitudes: amplitudes.len() });
        }
        if let Some(&bad) = amplitudes.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(EnsembleError::InvalidAmplitude(bad));
        }
        let normalized = (squared_norm(&amplitudes) - 1.0).abs() <= NORM_TOLERANCE;
        Ok(BeliefState { basis, amplitudes, normalized })
    }

    /// Every amplitude `1/sqrt(B)`.
    pub fn uniform_prior(basis: Vec<String>) -> Result<Self, EnsembleError> {
        if basis.is_empty() {
            return Err(EnsembleError::EmptyBasis);
        }
        let a = 1.0 / (basis.len() as f64).sqrt();
        let amplitudes = vec![a; basis.len()];
        Ok(BeliefState { basis, amplitudes, normalized: true })
    }

    /// The state learnt from one object: the prior amplitude of each owned
    /// attribute scaled by `1/sqrt(k)` for `k` owned attributes, zero
    /// elsewhere. Over a uniform prior of size `B` that is `1/sqrt(B*k)`, and
    /// the squared norm is `1/B`.
    pub fn object_state(ctx: &FormalContext, object: &str, prior: &BeliefState) -> Result<Self, EnsembleError> {
        if prior.basis.as_slice() != ctx.attributes() {
            return Err(EnsembleError::BasisMismatch);
        }
        let g = ctx.object_position(object).ok_or_else(|| ContextError::UnknownObject(object.to_string()))?;
        let row = ctx.row(g);
        let k = row.count();
        if k == 0 {
            return Err(EnsembleError::NoAttributes(object.to_string()));
        }
        let scale = 1.0 / (k as f64).sqrt();
        let amplitudes = prior
            .amplitudes
            .iter()
            .enumerate()
            .map(|(b, a)| if row.contains(b) { a * scale } else { 0.0 })
            .collect();
        BeliefState::new(prior.basis.clone(), amplitudes)
    }

    /// Amplitude proportional to the square root of each attribute's support
    /// (the number of objects having it), normalized.
    pub fn reinforce_from_support(ctx: &FormalContext) -> Result<Self, EnsembleError> {
        let support: Vec<usize> = (0..ctx.attribute_count())
            .map(|m| ctx.rows().iter().filter(|r| r.contains(m)).count())
            .collect();
        let total: usize = support.iter().sum();
        if total == 0 {
            return Err(EnsembleError::EmptyContext);
        }
        let amplitudes: Vec<f64> = support.iter().map(|&s| (s as f64 / total as f64).sqrt()).collect();
        BeliefState::new(ctx.attributes().to_vec(), amplitudes)
    }

    pub fn basis(&self) -> &[String] {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn amplitude(&self, attribute: &str) -> Option<f64> {
        self.basis.iter().position(|b| b == attribute).map(|i| self.amplitudes[i])
    }

    pub fn squared_norm(&self) -> f64 {
        squared_norm(&self.amplitudes)
    }

    pub fn normalize(&self) -> Result<Self, EnsembleError> {
        if self.normalized {
            return Ok(self.clone());
        }
        let norm = self.squared_norm().sqrt();
        if norm == 0.0 {
            return Err(EnsembleError::ZeroState);
        }
        Ok(BeliefState {
            basis: self.basis.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a / norm).collect(),
            normalized: true,
        })
    }

    pub fn inner_product(&self, other: &BeliefState) -> Result<f64, EnsembleError> {
        if self.basis != other.basis {
            return Err(EnsembleError::BasisMismatch);
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a * b).sum())
    }

    /// Subspace as a bit set over the basis order.
    pub fn subspace<S: AsRef<str>>(&self, attributes: &[S]) -> Result<BitSet, EnsembleError> {
        let mut set = BitSet::new(self.basis.len());
        for a in attributes {
            let a = a.as_ref();
            let i = self
                .basis
                .iter()
                .position(|b| b == a)
                .ok_or_else(|| ContextError::UnknownAttribute(a.to_string()))?;
            set.insert(i);
        }
        Ok(set)
    }

    /// Probability of the outcome `subspace` without collapsing.
    pub fn probability(&self, subspace: &BitSet) -> Result<f64, EnsembleError> {
        let total = self.squared_norm();
        if total == 0.0 {
            return Err(EnsembleError::ZeroState);
        }
        let inside: f64 = subspace.iter().map(|b| self.amplitudes[b] * self.amplitudes[b]).sum();
        Ok(inside / total)
    }

    /// Projects onto `subspace` and renormalizes.
    pub fn measure(&self, subspace: &BitSet) -> Result<Measurement, EnsembleError> {
        assert_eq!(subspace.universe(), self.basis.len(), "subspace width must match the basis");
        let probability = self.probability(subspace)?;
        if probability == 0.0 {
            return Err(EnsembleError::ZeroProbability);
        }
        let inside: f64 = subspace.iter().map(|b| self.amplitudes[b] * self.amplitudes[b]).sum();
        let norm = inside.sqrt();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(b, a)| if subspace.contains(b) { a / norm } else { 0.0 })
            .collect();
        Ok(Measurement {
            probability,
            collapsed: BeliefState { basis: self.basis.clone(), amplitudes, normalized: true },
        })
    }

    pub fn measure_named<S: AsRef<str>>(&self, attributes: &[S]) -> Result<Measurement, EnsembleError> {
        self.measure(&self.subspace(attributes)?)
    }

    /// `{"amplitudes":[..],"basis":[..],"normalized":bool}`, floats at 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\"amplitudes\":[");
        for (i, a) in self.amplitudes.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{a:.16e}");
        }
        s.push_str("],\"basis\":");
        s.push_str(&serde_json::to_string(&self.basis).expect("strings serialize"));
        let _ = writeln!(s, ",\"normalized\":{}}}", self.normalized);
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EnsembleError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            amplitudes: Vec<f64>,
            basis: Vec<String>,
            normalized: bool,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| EnsembleError::Parse(e.to_string()))?;
        let mut state = BeliefState::new(doc.basis, doc.amplitudes)?;
        if doc.normalized && !state.normalized {
            return Err(EnsembleError::NormalizationFlag);
        }
        state.normalized = doc.normalized;
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub probability: f64,
    pub collapsed: BeliefState,
}

/// A partition of the basis into orthogonal blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observable {
    blocks: Vec<(String, BitSet)>,
}

impl Observable {
    pub fn new(basis_len: usize, blocks: Vec<(String, BitSet)>) -> Result<Self, EnsembleError> {
        let mut seen = BitSet::new(basis_len);
        for (name, block) in &blocks {
            if block.universe() != basis_len {
                return Err(EnsembleError::InvalidPartition(format!("block `{name}` has the wrong width")));
            }
            if block.is_empty() {
                return Err(EnsembleError::InvalidPartition(format!("block `{name}` is empty")));
            }
            if !block.is_disjoint(&seen) {
                return Err(EnsembleError::InvalidPartition(format!("block `{name}` overlaps an earlier block")));
            }
            seen.union_with(block);
        }
        if seen != BitSet::full(basis_len) {
            return Err(EnsembleError::InvalidPartition("blocks do not cover the basis".into()));
        }
        Ok(Observable { blocks })
    }

    /// One block per quality dimension.
    pub fn from_dimensions(ctx: &FormalContext) -> Self {
        let n = ctx.attribute_count();
        let blocks = ctx
            .dimensions()
            .iter()
            .zip(ctx.dimension_ranges())
            .map(|(d, r)| (d.name.clone(), BitSet::from_indices(n, r)))
            .collect();
        Observable { blocks }
    }

    pub fn blocks(&self) -> &[(String, BitSet)] {
        &self.blocks
    }

    pub fn probabilities(&self, state: &BeliefState) -> Result<Vec<(String, f64)>, EnsembleError> {
        self.blocks
            .iter()
            .map(|(name, block)| Ok((name.clone(), state.probability(block)?)))
            .collect()
    }
}

/// One object's incidence row, grouped by quality dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionVector {
    pub object: String,
    pub dimensions: Vec<DimensionProjection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionProjection {
    pub dimension: String,
    /// `(attribute, 0 | 1)` in declaration order.
    pub coordinates: Vec<(String, u8)>,
}

impl ProjectionVector {
    pub fn of(ctx: &FormalContext, object: &str) -> Result<Self, ContextError> {
        let g = ctx.object_position(object).ok_or_else(|| ContextError::UnknownObject(object.to_string()))?;
        let dimensions = ctx
            .dimensions()
            .iter()
            .zip(ctx.dimension_ranges())
            .map(|(d, r)| DimensionProjection {
                dimension: d.name.clone(),
                coordinates: r.map(|m| (ctx.attributes()[m].clone(), u8::from(ctx.incidence(g, m)))).collect(),
            })
            .collect();
        Ok(ProjectionVector { object: object.to_string(), dimensions })
    }

    /// Coordinates flattened into the global attribute order.
    pub fn flat(&self) -> Vec<u8> {
        self.dimensions.iter().flat_map(|d| d.coordinates.iter().map(|(_, c)| *c)).collect()
    }
}
