//! Prints the digit lattice as reduced-label DOT.
fn main() {
    let lat = noesis_core::ConceptLattice::enumerate(&noesis_core::fixtures::digits_context());
    print!("{}", lat.export_dot(noesis_core::LabelMode::Reduced));
}
