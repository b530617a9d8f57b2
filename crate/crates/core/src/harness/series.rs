use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::learners::Algorithm;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "algorithm,run,step,mspbe,mstde,diverged";

/// One exact measurement of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRecord {
    pub algorithm: Algorithm,
    pub run: usize,
    pub step: usize,
    pub mspbe: f64,
    pub mstde: f64,
    pub diverged: bool,
}

/// Measurements of every run, ordered by run then step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricSeries {
    pub records: Vec<MetricRecord>,
}

impl MetricSeries {
    pub fn new(records: Vec<MetricRecord>) -> Self {
        Self { records }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Distinct run indices in order of appearance.
    pub fn run_indices(&self) -> Vec<usize> {
        let mut runs: Vec<usize> = Vec::new();
        for r in &self.records {
            if runs.last() != Some(&r.run) && !runs.contains(&r.run) {
                runs.push(r.run);
            }
        }
        runs
    }

    pub fn run(&self, run: usize) -> impl Iterator<Item = &MetricRecord> + '_ {
        self.records.iter().filter(move |r| r.run == run)
    }

    pub fn mspbe_of_run(&self, run: usize) -> Vec<f64> {
        self.run(run).map(|r| r.mspbe).collect()
    }

    pub fn first_of_run(&self, run: usize) -> Option<&MetricRecord> {
        self.run(run).next()
    }

    pub fn last_of_run(&self, run: usize) -> Option<&MetricRecord> {
        self.run(run).last()
    }

    /// True when the final record of every run carries the diverged flag.
    pub fn all_runs_diverged(&self) -> bool {
        let runs = self.run_indices();
        !runs.is_empty()
            && runs
                .iter()
                .all(|&run| self.last_of_run(run).is_some_and(|r| r.diverged))
    }

    pub fn any_diverged(&self) -> bool {
        self.records.iter().any(|r| r.diverged)
    }

    /// Mean over runs of `(initial, final)` MSPBE.
    pub fn mean_initial_and_final_mspbe(&self) -> Option<(f64, f64)> {
        let runs = self.run_indices();
        if runs.is_empty() {
            return None;
        }
        let n = runs.len() as f64;
        let initial = runs.iter().filter_map(|&r| self.first_of_run(r)).map(|r| r.mspbe).sum::<f64>();
        let last = runs.iter().filter_map(|&r| self.last_of_run(r)).map(|r| r.mspbe).sum::<f64>();
        Some((initial / n, last / n))
    }

    /// CSV text with a header line. Reals use Rust's shortest round-trip
    /// formatting.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(32 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.algorithm,
                r.run,
                r.step,
                r.mspbe,
                r.mstde,
                u8::from(r.diverged)
            );
        }
        out
    }

    /// Writes to a temporary file next to `path` and renames it into place.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
        tmp.write_all(self.to_csv_string().as_bytes())
            .and_then(|_| tmp.flush())
            .map_err(|e| Error::io(path, e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end() == CSV_HEADER => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{CSV_HEADER}`, found `{header}`"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty file".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let algorithm = fields[0]
                .parse::<Algorithm>()
                .map_err(|e| err(e.to_string()))?;
            let int = |s: &str, name: &str| {
                s.parse::<usize>()
                    .map_err(|e| err(format!("bad {name} `{s}`: {e}")))
            };
            let real = |s: &str, name: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad {name} `{s}`: {e}")))
            };
            let diverged = match fields[5] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("bad diverged flag `{other}`"))),
            };
            records.push(MetricRecord {
                algorithm,
                run: int(fields[1], "run")?,
                step: int(fields[2], "step")?,
                mspbe: real(fields[3], "mspbe")?,
                mstde: real(fields[4], "mstde")?,
                diverged,
            });
        }
        Ok(Self { records })
    }
}
