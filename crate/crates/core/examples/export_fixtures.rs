//! Writes the built-in fixtures as files: `cargo run --example export_fixtures -- fixtures/`

use std::path::PathBuf;

use noesis_core::fixtures::{apple_scenario, digits_scenario, digits_context, digits_script};
use noesis_core::{serialize_context, Format};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("digits_scenario.json"), digits_scenario().to_json())?;
    std::fs::write(dir.join("apple_scenario.json"), apple_scenario().to_json())?;
    std::fs::write(dir.join("digits.json"), serialize_context(&digits_context(), Format::Json).expect("json"))?;
    std::fs::write(dir.join("digits.cxt"), serialize_context(&digits_context(), Format::Cxt).expect("one dimension"))?;
    let mut script = serde_json::to_string_pretty(&digits_script()).expect("cues serialize");
    script.push('\n');
    std::fs::write(dir.join("digits_script.json"), script)
}
