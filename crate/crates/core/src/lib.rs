//! Formal concept analysis with amplitude-based belief states.
//!
//! * [`context`] and [`format`]: formal contexts with quality dimensions and
//!   time granules, plus their JSON and Burmeister encodings.
//! * [`scaling`]: turns categorical propositions about instances into a context.
//! * [`lattice`]: derivation operators, concept enumeration, implications.
//! * [`ensemble`]: belief states over the attribute basis.
//! * [`session`]: the cue / oracle learning protocol and its trace.

pub mod bitset;
pub mod context;
pub mod ensemble;
pub mod fixtures;
pub mod format;
pub mod lattice;
pub mod scaling;
pub mod session;

pub use bitset::BitSet;
pub use context::{ContextError, FormalContext, QualityDimension, TimeGranule};
pub use ensemble::{BeliefState, EnsembleError, Measurement, Observable, ProjectionVector};
pub use format::{parse_context, serialize_context, Format};
pub use lattice::{Concept, ConceptLattice, Implication, LabelMode, LatticeError, Verdict, VerdictKind};
pub use scaling::{scale_scenario, validate_scenario, ScaleError, ScaleReport, Scenario};
pub use session::{
    replay, replay_from, OracleAnswer, OracleKind, Phase, ScriptedOracle, Session, SessionError, SessionState,
    SupportingObject, Trace, TraceEvent,
};
