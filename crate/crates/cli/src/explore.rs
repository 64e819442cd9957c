//! Terminal session with the user as oracle.
//!
//! Commands at the prompt:
//!
//! ```text
//! <enter> | ask            pose the suggested cue
//! cue A, B -> C            pose your own cue
//! quit                     end the session
//! ```
//!
//! When a cue needs the oracle the prompt changes to `yes`, `no NAME: A, B`
//! (a counterexample and its attributes) or `quit`.

use std::io::{BufRead, Write};
use std::path::Path;

use noesis_core::session::CueOpening;
use noesis_core::{FormalContext, Implication, OracleAnswer, OracleKind, Phase, Session, SupportingObject};

use crate::{use_color, Failure};

enum Reply {
    Line(String),
    Eof,
}

fn read_line(input: &mut dyn BufRead) -> Result<Reply, Failure> {
    let mut line = String::new();
    match input.read_line(&mut line) {
        Ok(0) => Ok(Reply::Eof),
        Ok(_) => Ok(Reply::Line(line.trim().to_string())),
        Err(e) => Err(Failure::Io(format!("reading stdin: {e}"))),
    }
}

fn names(list: &str) -> Vec<String> {
    list.trim()
        .trim_start_matches('{')
        .trim_end_matches('}')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parse_cue(text: &str) -> Result<Implication, String> {
    let (premise, conclusion) = text.split_once("->").ok_or("expected `A, B -> C`")?;
    Implication::new(names(premise), names(conclusion)).map_err(|e| e.to_string())
}

fn parse_counterexample(text: &str) -> Result<SupportingObject, String> {
    let (name, intent) = text.split_once(':').ok_or("expected `no NAME: A, B`")?;
    let name = name.trim();
    if name.is_empty() {
        return Err("the counterexample needs a name".into());
    }
    Ok(SupportingObject { name: name.to_string(), intent: names(intent) })
}

struct Term<'a> {
    out: &'a mut dyn Write,
    color: bool,
}

impl Term<'_> {
    fn say(&mut self, text: impl AsRef<str>) -> Result<(), Failure> {
        writeln!(self.out, "{}", text.as_ref()).map_err(|e| Failure::Io(format!("writing stdout: {e}")))
    }

    fn prompt(&mut self, session: &Session) -> Result<(), Failure> {
        let phase = session.phase().to_string();
        let phase = if self.color { format!("\x1b[1m{phase}\x1b[0m") } else { phase };
        write!(self.out, "[{phase} g={}] > ", session.granule().0).map_err(|e| Failure::Io(e.to_string()))?;
        self.out.flush().map_err(|e| Failure::Io(e.to_string()))
    }
}

/// Asks the user about `cue` until they give a usable answer.
fn consult(session: &mut Session, cue: &Implication, input: &mut dyn BufRead, term: &mut Term) -> Result<(), Failure> {
    loop {
        term.say(format!("does {cue} hold? (yes | no NAME: A, B | quit)"))?;
        term.prompt(session)?;
        let line = match read_line(input)? {
            Reply::Eof => "quit".to_string(),
            Reply::Line(l) => l,
        };
        let outcome = match line.as_str() {
            "y" | "yes" => session.answer(OracleAnswer::Accept).map(|_| ()),
            "q" | "quit" => session.answer(OracleAnswer::GiveUp).map(|_| ()),
            other => match other.strip_prefix("no").or_else(|| other.strip_prefix('n')) {
                Some(rest) => match parse_counterexample(rest) {
                    Ok(obj) => session.answer(OracleAnswer::Counterexample(obj.clone())).and_then(|_| session.resolve(obj)).map(|_| ()),
                    Err(msg) => {
                        term.say(msg)?;
                        continue;
                    }
                },
                None => {
                    term.say("answer yes, no NAME: A, B, or quit")?;
                    continue;
                }
            },
        };
        match outcome {
            Ok(()) => return Ok(()),
            Err(e) => term.say(format!("rejected: {e}"))?,
        }
    }
}

pub(crate) fn run(initial: &FormalContext, input: &mut dyn BufRead, out: &mut dyn Write, trace: Option<&Path>) -> Result<(), Failure> {
    let mut session = Session::start(initial.clone(), OracleKind::Interactive).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut term = Term { out, color: use_color() };
    term.say(format!("attributes: {}", initial.attributes().join(", ")))?;
    while session.phase() != Phase::Terminal {
        let suggestion = session.suggest_cue();
        match &suggestion {
            Some(cue) => term.say(format!("suggested cue: {cue}"))?,
            None => term.say("no open cue left to suggest")?,
        }
        term.prompt(&session)?;
        let line = match read_line(input)? {
            Reply::Eof => "quit".to_string(),
            Reply::Line(l) => l,
        };
        let cue = match line.as_str() {
            "q" | "quit" => {
                session.give_up().map_err(|e| Failure::Protocol(e.to_string()))?;
                break;
            }
            "" | "ask" => match suggestion {
                Some(cue) => cue,
                None => continue,
            },
            other => match other.strip_prefix("cue").map(parse_cue) {
                Some(Ok(cue)) => cue,
                Some(Err(msg)) => {
                    term.say(msg)?;
                    continue;
                }
                None => {
                    term.say("commands: <enter> | ask, cue A, B -> C, quit")?;
                    continue;
                }
            },
        };
        match session.open_cue(cue.clone()) {
            Ok(CueOpening::Settled(event)) => {
                let by = event.local_verdict.and_then(|v| v.counterexample).unwrap_or_default();
                term.say(format!("{cue} already fails on {by}"))?;
            }
            Ok(CueOpening::AwaitingOracle { .. }) => consult(&mut session, &cue, input, &mut term)?,
            Err(e) => term.say(format!("rejected: {e}"))?,
        }
    }
    let ctx = session.context();
    term.say(format!("session ended at granule {} with {} objects", session.granule().0, ctx.object_count()))?;
    for name in ctx.objects() {
        let row = ctx.attribute_names(ctx.row(ctx.object_position(name).expect("own object")));
        term.say(format!("  {name}: {}", row.join(", ")))?;
    }
    if let Some(path) = trace {
        std::fs::write(path, noesis_core::session::trace_to_jsonl(session.trace()))
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
