//! The digit-typing learning task: the reference context of nine digits over
//! five types and the ten measurement cues posed to the learner.

use crate::context::{FormalContext, QualityDimension};
use crate::lattice::Implication;
use crate::scaling::{Perspective, Scenario, TimelineEntry};

pub const DIGIT_TYPES: [&str; 5] = ["Composite", "Even", "Odd", "Prime", "Square"];

/// Digit name and the row over [`DIGIT_TYPES`].
pub const DIGITS: [(&str, [bool; 5]); 9] = [
    ("One", [false, false, true, false, true]),
    ("Two", [false, true, false, true, false]),
    ("Three", [false, false, true, true, false]),
    ("Four", [true, true, false, false, true]),
    ("Five", [false, false, true, true, false]),
    ("Six", [true, true, false, false, false]),
    ("Seven", [false, false, true, true, false]),
    ("Eight", [true, true, false, false, false]),
    ("Nine", [true, false, true, false, true]),
];

pub fn digit_dimension() -> QualityDimension {
    QualityDimension::new("types", DIGIT_TYPES)
}

/// All nine digits, every object at granule 0.
pub fn digits_context() -> FormalContext {
    FormalContext::new(
        DIGITS.iter().map(|(n, _)| n.to_string()).collect(),
        vec![digit_dimension()],
        DIGITS.iter().map(|(_, r)| r.to_vec()).collect(),
        None,
    )
    .expect("digit context is valid")
}

fn imp(premise: &[&str], conclusion: &[&str]) -> Implication {
    Implication::new(premise.iter().copied(), conclusion.iter().copied()).expect("non-empty conclusion")
}

/// The measurement cues of the digit learning run, one per granule 0..=9.
pub fn digits_script() -> Vec<Implication> {
    vec![
        imp(&[], &DIGIT_TYPES),
        imp(&[], &["Odd", "Square"]),
        imp(&["Square"], &["Odd"]),
        imp(&["Prime"], &["Even"]),
        imp(&["Prime", "Square"], &["Composite", "Even", "Odd"]),
        imp(&["Even", "Square"], &["Composite"]),
        imp(&["Composite"], &["Even", "Square"]),
        imp(&["Even", "Odd"], &["Composite", "Prime", "Square"]),
        imp(&["Composite"], &["Even"]),
        imp(&["Composite", "Odd"], &["Square"]),
    ]
}

/// The digits as a raw scenario: one perspective, every digit at granule 0.
pub fn digits_scenario() -> Scenario {
    Scenario {
        perspectives: vec![Perspective {
            name: "types".into(),
            propositions: DIGIT_TYPES.iter().map(|s| s.to_string()).collect(),
        }],
        timeline: DIGITS
            .iter()
            .map(|(name, row)| TimelineEntry {
                granule: 0,
                instance: name.to_string(),
                truth: DIGIT_TYPES.iter().zip(row).map(|(p, &b)| (p.to_string(), b)).collect(),
            })
            .collect(),
    }
}

/// A sweet red apple seen under two perspectives.
pub fn apple_scenario() -> Scenario {
    Scenario {
        perspectives: vec![
            Perspective { name: "taste".into(), propositions: vec!["sweet".into(), "sour".into()] },
            Perspective { name: "colour".into(), propositions: vec!["red".into(), "green".into()] },
        ],
        timeline: vec![TimelineEntry {
            granule: 0,
            instance: "apple".into(),
            truth: [("sweet", true), ("sour", false), ("red", true), ("green", false)]
                .into_iter()
                .map(|(p, b)| (p.to_string(), b))
                .collect(),
        }],
    }
}
