//! Run reports: CSV for sweeps, `key: value` lines for single reports.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentKind;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub kind: ExperimentKind,
    /// Seed, RNG, grid and the other run parameters.
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub aggregates: Vec<(String, String)>,
    /// Exact invariants that failed.
    pub invariant_failures: usize,
}

/// Shortest round-trip representation, so equal reports mean bit-equal values.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

impl RunReport {
    pub fn new(kind: ExperimentKind, header: Vec<(String, String)>) -> Self {
        Self { kind, header, columns: Vec::new(), rows: Vec::new(), aggregates: Vec::new(), invariant_failures: 0 }
    }

    pub fn aggregate(&mut self, key: &str, value: impl ToString) {
        self.aggregates.push((key.to_string(), value.to_string()));
    }

    /// `0` when every exact invariant held, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.invariant_failures == 0 { 0 } else { 1 }
    }

    /// Sweeps render as CSV wrapped in `# key: value` comment lines; reports without rows as plain
    /// `key: value` lines.
    pub fn render(&self) -> Result<String> {
        let mut out = String::new();
        let kv = |out: &mut String, prefix: &str, pairs: &[(String, String)]| {
            for (k, v) in pairs {
                out.push_str(&format!("{prefix}{k}: {v}\n"));
            }
        };
        let prefix = if self.rows.is_empty() { "" } else { "# " };
        kv(&mut out, prefix, &self.header);
        if !self.rows.is_empty() {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&self.columns).map_err(csv_error)?;
            for r in &self.rows {
                w.write_record(r).map_err(csv_error)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
            out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
        }
        kv(&mut out, prefix, &self.aggregates);
        kv(&mut out, prefix, &[("invariant_failures".to_string(), self.invariant_failures.to_string())]);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_key_value_layouts() {
        let mut r = RunReport::new(ExperimentKind::OracleEquivalence, vec![("seed".into(), "3".into())]);
        r.columns = vec!["a".into(), "b".into()];
        r.rows.push(vec!["1".into(), "x,y".into()]);
        r.aggregate("max", fmt_f64(0.5));
        assert_eq!(r.render().unwrap(), "# seed: 3\na,b\n1,\"x,y\"\n# max: 5e-1\n# invariant_failures: 0\n");
        let mut s = RunReport::new(ExperimentKind::Invariants, vec![("seed".into(), "3".into())]);
        s.invariant_failures = 2;
        assert_eq!(s.render().unwrap(), "seed: 3\ninvariant_failures: 2\n");
        assert_eq!(s.exit_code(), 1);
    }
}
