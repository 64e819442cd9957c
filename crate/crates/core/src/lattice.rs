//! Derivation operators, concept enumeration and implications over a
//! [`FormalContext`].
//!
//! All set-valued work happens on [`BitSet`]s keyed by the context's object
//! and attribute order. The name-based functions are thin wrappers that
//! resolve names first and report unknown ones.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::context::{ContextError, FormalContext, TimeGranule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("implication conclusion must not be empty")]
    EmptyConclusion,
}

/// Attributes shared by every object of `objects`; all of `M` for the empty set.
pub fn derive_intent(ctx: &FormalContext, objects: &BitSet) -> BitSet {
    let mut out = BitSet::full(ctx.attribute_count());
    for g in objects.iter() {
        out.intersect_with(ctx.row(g));
    }
    out
}

/// Objects having every attribute of `attributes`; all of `G` for the empty set.
pub fn derive_extent(ctx: &FormalContext, attributes: &BitSet) -> BitSet {
    BitSet::from_indices(
        ctx.object_count(),
        ctx.rows().iter().enumerate().filter(|(_, r)| attributes.is_subset(r)).map(|(g, _)| g),
    )
}

pub fn closure(ctx: &FormalContext, attributes: &BitSet) -> BitSet {
    derive_intent(ctx, &derive_extent(ctx, attributes))
}

pub fn derive_intent_named<S: AsRef<str>>(ctx: &FormalContext, objects: &[S]) -> Result<Vec<String>, ContextError> {
    let set = ctx.object_set(objects)?;
    Ok(ctx.attribute_names(&derive_intent(ctx, &set)))
}

pub fn derive_extent_named<S: AsRef<str>>(ctx: &FormalContext, attributes: &[S]) -> Result<Vec<String>, ContextError> {
    let set = ctx.attribute_set(attributes)?;
    Ok(ctx.object_names(&derive_extent(ctx, &set)))
}

pub fn closure_named<S: AsRef<str>>(ctx: &FormalContext, attributes: &[S]) -> Result<Vec<String>, ContextError> {
    let set = ctx.attribute_set(attributes)?;
    Ok(ctx.attribute_names(&closure(ctx, &set)))
}

/// A formal concept: `extent` and `intent` derive each other.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Concept {
    pub extent: BitSet,
    pub intent: BitSet,
}

/// The lectic successor of the closed set `current`, if any.
fn next_closure(ctx: &FormalContext, current: &BitSet) -> Option<BitSet> {
    let mut prefix = current.clone();
    for i in (0..ctx.attribute_count()).rev() {
        if prefix.contains(i) {
            prefix.remove(i);
            continue;
        }
        let mut candidate = prefix.clone();
        candidate.insert(i);
        let closed = closure(ctx, &candidate);
        if closed.difference(&prefix).iter().next() == Some(i) {
            return Some(closed);
        }
    }
    None
}

/// Every closed intent of `ctx`, in lectic order.
pub fn closed_intents(ctx: &FormalContext) -> Vec<BitSet> {
    let mut out = Vec::new();
    let mut current = Some(closure(ctx, &BitSet::new(ctx.attribute_count())));
    while let Some(intent) = current {
        current = next_closure(ctx, &intent);
        out.push(intent);
    }
    out
}

/// All concepts of a context in canonical order, with their covering relation.
///
/// Concepts are sorted by intent size, then lexicographically on the intent,
/// so index 0 is the top concept and the last index is the bottom concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptLattice {
    context: FormalContext,
    concepts: Vec<Concept>,
    hasse: Vec<(usize, usize)>,
}

impl ConceptLattice {
    pub fn enumerate(ctx: &FormalContext) -> ConceptLattice {
        Self::from_intents(ctx.clone(), closed_intents(ctx))
    }

    fn from_intents(context: FormalContext, mut intents: Vec<BitSet>) -> ConceptLattice {
        intents.sort_by(|a, b| a.count().cmp(&b.count()).then_with(|| a.cmp_lex(b)));
        intents.dedup();
        let concepts: Vec<Concept> = intents
            .into_iter()
            .map(|intent| Concept { extent: derive_extent(&context, &intent), intent })
            .collect();
        let hasse = covering_pairs(&context, &concepts);
        ConceptLattice { context, concepts, hasse }
    }

    /// Adds one object and updates the concept set without re-enumerating.
    ///
    /// The new intents are the old ones plus their intersections with the new
    /// object's row; extents are re-derived against the extended context.
    pub fn insert_object<S: AsRef<str>>(
        &self,
        name: &str,
        intent: &[S],
        granule: TimeGranule,
    ) -> Result<ConceptLattice, ContextError> {
        let context = self.context.add_object(name, intent, granule)?;
        let row = context.row(context.object_count() - 1).clone();
        let mut seen: HashSet<BitSet> = HashSet::with_capacity(self.concepts.len() * 2);
        let mut intents = Vec::with_capacity(self.concepts.len() * 2);
        for c in &self.concepts {
            for candidate in [c.intent.clone(), c.intent.intersection(&row)] {
                if seen.insert(candidate.clone()) {
                    intents.push(candidate);
                }
            }
        }
        Ok(Self::from_intents(context, intents))
    }

    pub fn context(&self) -> &FormalContext {
        &self.context
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Covering pairs `(lower, upper)`: the lower extent is a maximal proper
    /// subset of the upper one. Sorted by lower, then upper index.
    pub fn hasse_edges(&self) -> &[(usize, usize)] {
        &self.hasse
    }

    pub fn top(&self) -> usize {
        0
    }

    pub fn bottom(&self) -> usize {
        self.concepts.len() - 1
    }

    pub fn index_of_intent(&self, intent: &BitSet) -> Option<usize> {
        self.concepts.iter().position(|c| &c.intent == intent)
    }

    /// Concept set as named (extent, intent) pairs with sorted extent names,
    /// for comparison across object orders.
    pub fn named_concepts(&self) -> BTreeSet<(Vec<String>, Vec<String>)> {
        self.concepts
            .iter()
            .map(|c| {
                let mut extent = self.context.object_names(&c.extent);
                extent.sort();
                (extent, self.context.attribute_names(&c.intent))
            })
            .collect()
    }

    /// Where each object and attribute first appears under reduced labelling.
    fn reduced_labels(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let by_intent: HashMap<&BitSet, usize> = self.concepts.iter().enumerate().map(|(i, c)| (&c.intent, i)).collect();
        let by_extent: HashMap<&BitSet, usize> = self.concepts.iter().enumerate().map(|(i, c)| (&c.extent, i)).collect();
        let mut objects = vec![Vec::new(); self.concepts.len()];
        let mut attributes = vec![Vec::new(); self.concepts.len()];
        for g in 0..self.context.object_count() {
            objects[by_intent[self.context.row(g)]].push(g);
        }
        for m in 0..self.context.attribute_count() {
            let extent = derive_extent(&self.context, &BitSet::from_indices(self.context.attribute_count(), [m]));
            attributes[by_extent[&extent]].push(m);
        }
        (objects, attributes)
    }

    /// Canonical JSON: `{"concepts":[{"extent":[..],"intent":[..]}],"hasse":[[lower,upper]]}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct ConceptDoc {
            extent: Vec<String>,
            intent: Vec<String>,
        }
        #[derive(Serialize)]
        struct LatticeDoc {
            concepts: Vec<ConceptDoc>,
            hasse: Vec<[usize; 2]>,
        }
        let doc = LatticeDoc {
            concepts: self
                .concepts
                .iter()
                .map(|c| ConceptDoc {
                    extent: self.context.object_names(&c.extent),
                    intent: self.context.attribute_names(&c.intent),
                })
                .collect(),
            hasse: self.hasse.iter().map(|&(l, u)| [l, u]).collect(),
        };
        let mut s = serde_json::to_string(&doc).expect("lattice serializes");
        s.push('\n');
        s
    }

    /// Graphviz rendering with the top concept as the single source.
    pub fn export_dot(&self, labels: LabelMode) -> String {
        let reduced = match labels {
            LabelMode::Reduced => Some(self.reduced_labels()),
            LabelMode::Full => None,
        };
        let join = |names: Vec<String>| names.iter().map(|n| escape(n)).collect::<Vec<_>>().join(", ");
        let mut s = String::from("digraph lattice {\n  node [shape=box];\n");
        for (i, c) in self.concepts.iter().enumerate() {
            let (attrs, objs) = match &reduced {
                Some((objects, attributes)) => (
                    join(attributes[i].iter().map(|&m| self.context.attributes()[m].clone()).collect()),
                    join(objects[i].iter().map(|&g| self.context.objects()[g].clone()).collect()),
                ),
                None => (
                    join(self.context.attribute_names(&c.intent)),
                    join(self.context.object_names(&c.extent)),
                ),
            };
            let _ = writeln!(s, "  c{i} [label=\"{{{attrs}}}\\n{{{objs}}}\"];");
        }
        let _ = writeln!(s, "  {{ rank=source; c{}; }}", self.top());
        for &(lower, upper) in &self.hasse {
            let _ = writeln!(s, "  c{upper} -> c{lower};");
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Every node shows its whole extent and intent.
    #[default]
    Full,
    /// Each object and attribute is shown once, at the concept that introduces it.
    Reduced,
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Upper neighbours of each concept via the "count the generators" test: the
/// closure of `X + g` is an upper cover of `X` iff every one of its new objects
/// generates it.
fn covering_pairs(ctx: &FormalContext, concepts: &[Concept]) -> Vec<(usize, usize)> {
    let by_extent: HashMap<&BitSet, usize> = concepts.iter().enumerate().map(|(i, c)| (&c.extent, i)).collect();
    let mut edges = Vec::new();
    for (lower, c) in concepts.iter().enumerate() {
        let mut hits: HashMap<BitSet, usize> = HashMap::new();
        for g in 0..ctx.object_count() {
            if c.extent.contains(g) {
                continue;
            }
            let mut grown = c.extent.clone();
            grown.insert(g);
            let closed = derive_extent(ctx, &derive_intent(ctx, &grown));
            *hits.entry(closed).or_default() += 1;
        }
        let mut uppers: Vec<usize> = hits
            .into_iter()
            .filter(|(ext, n)| ext.count() - c.extent.count() == *n)
            .map(|(ext, _)| by_extent[&ext])
            .collect();
        uppers.sort_unstable();
        edges.extend(uppers.into_iter().map(|u| (lower, u)));
    }
    edges
}

/// "Every object with all of `premise` also has all of `conclusion`."
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Implication {
    pub premise: Vec<String>,
    pub conclusion: Vec<String>,
}

impl Implication {
    pub fn new<P, C>(premise: P, conclusion: C) -> Result<Self, LatticeError>
    where
        P: IntoIterator,
        P::Item: Into<String>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let imp = Implication {
            premise: premise.into_iter().map(Into::into).collect(),
            conclusion: conclusion.into_iter().map(Into::into).collect(),
        };
        if imp.conclusion.is_empty() {
            return Err(LatticeError::EmptyConclusion);
        }
        Ok(imp)
    }

    /// Premise and conclusion as bit sets over `ctx`'s attributes.
    pub fn resolve(&self, ctx: &FormalContext) -> Result<(BitSet, BitSet), LatticeError> {
        if self.conclusion.is_empty() {
            return Err(LatticeError::EmptyConclusion);
        }
        Ok((ctx.attribute_set(&self.premise)?, ctx.attribute_set(&self.conclusion)?))
    }
}

impl std::fmt::Display for Implication {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}}} -> {{{}}}", self.premise.join(", "), self.conclusion.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Holds,
    Vacuous,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Present iff `kind` is `Fails`.
    pub counterexample: Option<String>,
}

impl Verdict {
    pub fn holds() -> Self {
        Verdict { kind: VerdictKind::Holds, counterexample: None }
    }

    pub fn vacuous() -> Self {
        Verdict { kind: VerdictKind::Vacuous, counterexample: None }
    }

    pub fn fails(counterexample: impl Into<String>) -> Self {
        Verdict { kind: VerdictKind::Fails, counterexample: Some(counterexample.into()) }
    }

    /// Holds or holds vacuously.
    pub fn is_true(&self) -> bool {
        self.kind != VerdictKind::Fails
    }
}

/// Checks `imp` against `ctx`. A failure names the first violating object in
/// declaration order.
pub fn holds(ctx: &FormalContext, imp: &Implication) -> Result<Verdict, LatticeError> {
    let (premise, conclusion) = imp.resolve(ctx)?;
    Ok(check(ctx, &premise, &conclusion))
}

pub(crate) fn check(ctx: &FormalContext, premise: &BitSet, conclusion: &BitSet) -> Verdict {
    let extent = derive_extent(ctx, premise);
    if extent.is_empty() {
        return Verdict::vacuous();
    }
    let violator = extent.iter().find(|&g| !conclusion.is_subset(ctx.row(g)));
    match violator {
        Some(g) => Verdict::fails(ctx.objects()[g].clone()),
        None => Verdict::holds(),
    }
}

/// Whether the object row `row` refutes `premise -> conclusion`.
pub fn is_counterexample(row: &BitSet, premise: &BitSet, conclusion: &BitSet) -> bool {
    premise.is_subset(row) && !conclusion.is_subset(row)
}
