//! JSON records written next to pipeline outputs.
//!
//! The manifest holds only deterministic content; wall-clock timings go to
//! a separate file so that repeated runs produce identical manifests.

use std::collections::BTreeMap;

use inpaint_core::curation::Selection;
use inpaint_core::guides::GuideCombo;
use inpaint_core::synthesis::{LevelReport, PipelineOutput};
use serde::{Deserialize, Serialize};

/// File name of candidate `index` with guide combination `combo`.
pub fn candidate_file_name(index: usize, combo: GuideCombo) -> String {
    format!("candidate_{index}_{}.png", combo.letters())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub em_iterations: usize,
    /// Sum of nearest-neighbour distances after each EM step.
    pub search_totals: Vec<f64>,
}

impl From<&LevelReport> for LevelRecord {
    fn from(r: &LevelReport) -> Self {
        Self {
            level: r.level,
            width: r.width,
            height: r.height,
            em_iterations: r.em_iterations,
            search_totals: r.search_totals.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub combo: String,
    pub seed: u64,
    pub file: Option<String>,
    pub levels: Vec<LevelRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurationRecord {
    pub scorer: String,
    /// `[x, y, side]` of the scorer crop in candidate coordinates.
    pub crop: [i64; 3],
    pub matrix: Vec<Vec<f64>>,
    pub preferences: Vec<f64>,
    pub winner: usize,
}

impl From<&Selection> for CurationRecord {
    fn from(s: &Selection) -> Self {
        Self {
            scorer: s.scorer.clone(),
            crop: [s.crop.x, s.crop.y, s.crop.side as i64],
            matrix: s.matrix.rows(),
            preferences: s.preferences.clone(),
            winner: s.winner,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: String,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub inputs: BTreeMap<String, String>,
    pub config: BTreeMap<String, String>,
    pub candidate_width: usize,
    pub candidate_height: usize,
    pub candidates: Vec<CandidateRecord>,
    pub curation: CurationRecord,
    pub winner_combo: String,
    pub winner_file: String,
    pub refinement: Vec<LevelRecord>,
}

impl Manifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: &str,
        seed: u64,
        dims: (usize, usize),
        inputs: BTreeMap<String, String>,
        config: BTreeMap<String, String>,
        out: &PipelineOutput,
        candidate_files: bool,
        winner_file: &str,
    ) -> Self {
        let candidates = out
            .candidates
            .entries
            .iter()
            .enumerate()
            .map(|(i, c)| CandidateRecord {
                index: i,
                combo: c.combo.letters(),
                seed,
                file: candidate_files.then(|| candidate_file_name(i, c.combo)),
                levels: c.levels.iter().map(LevelRecord::from).collect(),
            })
            .collect();
        Self {
            mode: mode.to_string(),
            seed,
            width: dims.0,
            height: dims.1,
            inputs,
            config,
            candidate_width: out.candidate_dims.0,
            candidate_height: out.candidate_dims.1,
            candidates,
            curation: CurationRecord::from(&out.selection),
            winner_combo: out.combo.letters(),
            winner_file: winner_file.to_string(),
            refinement: out.refinement.iter().map(LevelRecord::from).collect(),
        }
    }
}

/// Wall-clock seconds per stage and per candidate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub threads: usize,
    pub load: f64,
    pub guides: f64,
    pub candidates: Option<f64>,
    pub per_candidate: Vec<Option<f64>>,
    pub curation: Option<f64>,
    pub refinement: Option<f64>,
    pub total: f64,
}
