//! Run manifest written next to every CSV artifact: the full resolved
//! configuration, the engine version, timing and the output file list.
//! Wall-clock content stays here, never in the data files.

use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub run: String,
    pub engine_version: String,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
    pub summary: Vec<(String, String)>,
    pub configuration: String,
}

impl Manifest {
    pub fn new(run: &str, configuration: String) -> Self {
        Manifest {
            run: run.to_string(),
            engine_version: format!("pendula {}", env!("CARGO_PKG_VERSION")),
            elapsed_seconds: 0.0,
            outputs: Vec::new(),
            summary: Vec::new(),
            configuration,
        }
    }

    pub fn push_summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "run: {}", self.run)?;
        writeln!(w, "engine: {}", self.engine_version)?;
        writeln!(w, "determinism: outputs depend only on this configuration")?;
        writeln!(w, "elapsed_seconds: {:.3}", self.elapsed_seconds)?;
        writeln!(w, "outputs:")?;
        for o in &self.outputs {
            writeln!(w, "  {o}")?;
        }
        writeln!(w, "summary:")?;
        for (k, v) in &self.summary {
            writeln!(w, "  {k}: {v}")?;
        }
        writeln!(w, "configuration:")?;
        for line in self.configuration.lines() {
            writeln!(w, "  {line}")?;
        }
        Ok(())
    }
}
