//! Scorer selection and the external-command scorer.

use std::path::{Path, PathBuf};
use std::process::Command;

use inpaint_core::curation::{HeuristicScorer, PairwiseVerdict, Scorer};
use inpaint_core::{HoleMask, PlaneImage};

use crate::error::{Error, Result};
use crate::io::{write_mask, write_png};

/// Tolerance on the sum of the three probabilities a command reports.
pub const SUM_TOLERANCE: f64 = 1e-3;

/// Judges each pair by running `program <dir>`, where `dir` holds
/// `left.png`, `right.png` and `mask.png`. The program prints three
/// probabilities (left, tie, right) separated by whitespace.
#[derive(Clone, Debug)]
pub struct CommandScorer {
    pub program: PathBuf,
}

/// Parses a command's output into a verdict, renormalizing small
/// deviations from a unit sum.
pub fn parse_verdict(stdout: &str) -> std::result::Result<PairwiseVerdict, String> {
    let values: Vec<f64> = stdout
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let [a, b, c] = values[..] else {
        return Err(format!("expected 3 probabilities, got {}", values.len()));
    };
    if [a, b, c].iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(format!("probabilities must be finite and non-negative: {a} {b} {c}"));
    }
    let sum = a + b + c;
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(format!("probabilities sum to {sum}"));
    }
    PairwiseVerdict::new(a / sum, b / sum, c / sum).map_err(|e| e.to_string())
}

impl CommandScorer {
    fn run(&self, left: &PlaneImage, right: &PlaneImage, mask: &HoleMask) -> std::result::Result<PairwiseVerdict, String> {
        let dir = tempfile::tempdir().map_err(|e| format!("cannot create a temp directory: {e}"))?;
        let put = |r: Result<()>| r.map_err(|e| e.to_string());
        put(write_png(&dir.path().join("left.png"), left))?;
        put(write_png(&dir.path().join("right.png"), right))?;
        put(write_mask(&dir.path().join("mask.png"), mask))?;
        let out = Command::new(&self.program)
            .arg(dir.path())
            .output()
            .map_err(|e| format!("cannot run {}: {e}", self.program.display()))?;
        if !out.status.success() {
            let err = String::from_utf8_lossy(&out.stderr);
            return Err(format!("{} exited with {}: {}", self.program.display(), out.status, err.trim()));
        }
        parse_verdict(&String::from_utf8_lossy(&out.stdout))
    }
}

impl Scorer for CommandScorer {
    fn name(&self) -> String {
        format!("cmd:{}", self.program.display())
    }

    fn judge(&self, left: &PlaneImage, right: &PlaneImage, mask: &HoleMask) -> inpaint_core::Result<PairwiseVerdict> {
        self.run(left, right, mask).map_err(inpaint_core::Error::InvalidValue)
    }
}

/// A scorer chosen on the command line.
pub enum AnyScorer {
    Heuristic(HeuristicScorer),
    Command(CommandScorer),
}

impl AnyScorer {
    /// `heuristic` or `cmd:<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        if spec == "heuristic" {
            return Ok(AnyScorer::Heuristic(HeuristicScorer::default()));
        }
        match spec.strip_prefix("cmd:") {
            Some(p) if !p.is_empty() => Ok(AnyScorer::Command(CommandScorer {
                program: Path::new(p).to_path_buf(),
            })),
            _ => Err(Error::Config(format!("unknown scorer {spec:?} (expected heuristic or cmd:<path>)"))),
        }
    }
}

impl Scorer for AnyScorer {
    fn name(&self) -> String {
        match self {
            AnyScorer::Heuristic(s) => s.name(),
            AnyScorer::Command(s) => s.name(),
        }
    }

    fn judge(&self, left: &PlaneImage, right: &PlaneImage, mask: &HoleMask) -> inpaint_core::Result<PairwiseVerdict> {
        match self {
            AnyScorer::Heuristic(s) => s.judge(left, right, mask),
            AnyScorer::Command(s) => s.judge(left, right, mask),
        }
    }
}
