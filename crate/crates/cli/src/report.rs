use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

/// Line-oriented output: `# caw <command>`, `# config <json>`, then
/// tab-separated records. Goes to stdout without a path.
pub struct Table {
    sink: Box<dyn Write>,
    path: Option<PathBuf>,
}

impl Table {
    pub fn create<C: Serialize>(path: Option<&Path>, command: &str, config: &C) -> Result<Self, Failure> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::internal(&format!("create {}", p.display()), e))?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        let mut t = Self {
            sink,
            path: path.map(Path::to_path_buf),
        };
        let json = serde_json::to_string(config).map_err(|e| Failure::internal("serialize config", e))?;
        t.line(&format!("# caw {command}"))?;
        t.line(&format!("# config {json}"))?;
        Ok(t)
    }

    pub fn line(&mut self, text: &str) -> Result<(), Failure> {
        writeln!(self.sink, "{text}").map_err(|e| self.err(e))
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let cells: Vec<String> = fields.into_iter().map(|f| f.to_string()).collect();
        self.line(&cells.join("\t"))
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.sink.flush().map_err(|e| self.err(e))
    }

    fn err(&self, e: io::Error) -> Failure {
        let target = self.path.as_ref().map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
        Failure::internal(&format!("write {target}"), e)
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}
