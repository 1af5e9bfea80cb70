pub mod eval;
pub mod ground;
pub mod kg;
pub mod score;
pub mod sim;
pub mod synth;

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Read a whole input file, mapping failures to usage errors.
pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

/// Writer for machine output: a file when a path is given, stdout otherwise.
pub enum Sink {
    Stdout(std::io::Stdout),
    File(std::io::BufWriter<std::fs::File>, String),
}

impl Sink {
    pub fn new(path: Option<&Path>) -> Result<Sink, CliError> {
        match path {
            None => Ok(Sink::Stdout(std::io::stdout())),
            Some(p) => {
                let file = std::fs::File::create(p).map_err(|e| {
                    CliError::io(format!("cannot write {}: {e}", p.display()))
                })?;
                Ok(Sink::File(
                    std::io::BufWriter::new(file),
                    p.display().to_string(),
                ))
            }
        }
    }

    pub fn write_line(&mut self, line: &str) -> Result<(), CliError> {
        let result = match self {
            Sink::Stdout(out) => writeln!(out, "{line}"),
            Sink::File(out, _) => writeln!(out, "{line}"),
        };
        result.map_err(|e| CliError::io(format!("write failed: {e}")))
    }

    pub fn finish(self) -> Result<(), CliError> {
        if let Sink::File(mut out, name) = self {
            out.flush()
                .map_err(|e| CliError::io(format!("flush {name} failed: {e}")))?;
        }
        Ok(())
    }
}

/// Iterate non-empty JSONL lines with 1-based line numbers.
pub fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}
