//! Evaluation of method output directories against a ground-truth corpus.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use inpaint_core::exec::Executor;
use inpaint_core::metrics::{capped, evaluate, EvalMode, EvalProtocol};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{read_mask_for, read_rgb};

/// One corpus entry; paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub id: String,
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<CorpusEntry> = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        e.image = base.join(&e.image);
        e.mask = base.join(&e.mask);
    }
    let mut ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::format(path, format!("duplicate id {:?}", w[0])));
    }
    Ok(entries)
}

/// Output of `method` for corpus entry `id`.
pub fn output_path(method: &Path, id: &str) -> PathBuf {
    method.join(format!("{id}.png"))
}

/// One row of the per-image report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    pub method: String,
    pub mode: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub images: usize,
    /// Mean of per-image PSNR with infinities capped.
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: String,
    pub seed: u64,
    pub patch_count: usize,
    pub patch_size: usize,
    pub config_hash: String,
    pub rows: Vec<Row>,
    pub summary: Vec<MethodSummary>,
    pub seconds: f64,
}

pub fn mode_name(mode: EvalMode) -> &'static str {
    match mode {
        EvalMode::Full => "full",
        EvalMode::Patch => "patch",
    }
}

/// SHA-256 of the protocol settings that determine the numbers.
pub fn config_hash(protocol: &EvalProtocol) -> String {
    let text = format!(
        "mode={}\nseed={}\npatch_count={}\npatch_size={}\n",
        mode_name(protocol.mode),
        protocol.seed,
        protocol.patch_count,
        protocol.patch_size
    );
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Method label: the directory's final component.
pub fn method_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Scores every method on every corpus entry. All missing outputs are
/// reported together before any work starts. Rows are sorted by id, then
/// method, so corpus order does not matter.
pub fn run_eval<E: Executor>(corpus: &[CorpusEntry], methods: &[PathBuf], protocol: &EvalProtocol, exec: &E) -> Result<Report> {
    let start = Instant::now();
    let missing: Vec<String> = corpus
        .iter()
        .flat_map(|e| methods.iter().map(move |m| output_path(m, &e.id)))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "{} missing method output(s):\n  {}",
            missing.len(),
            missing.join("\n  ")
        )));
    }
    let mut entries: Vec<&CorpusEntry> = corpus.iter().collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let scored = exec.map(entries.len(), |i| -> Result<Vec<Row>> {
        let e = entries[i];
        let truth = read_rgb(&e.image)?;
        let mask = read_mask_for(&e.mask, truth.dims())?;
        methods
            .iter()
            .map(|m| {
                let path = output_path(m, &e.id);
                let out = read_rgb(&path)?;
                if out.dims() != truth.dims() {
                    return Err(Error::format(&path, "size differs from the ground truth"));
                }
                let s = evaluate(&truth, &out, &mask, protocol)?;
                Ok(Row {
                    id: e.id.clone(),
                    method: method_name(m),
                    mode: mode_name(protocol.mode).to_string(),
                    psnr: s.psnr,
                    ssim: s.ssim,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in scored {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| (&a.id, &a.method).cmp(&(&b.id, &b.method)));
    let mut acc: BTreeMap<String, (usize, f64, f64)> = BTreeMap::new();
    for r in &rows {
        let a = acc.entry(r.method.clone()).or_default();
        *a = (a.0 + 1, a.1 + capped(r.psnr), a.2 + r.ssim);
    }
    let summary = methods
        .iter()
        .map(|m| {
            let name = method_name(m);
            let (n, p, s) = acc.get(&name).copied().unwrap_or_default();
            let d = n.max(1) as f64;
            MethodSummary {
                method: name,
                images: n,
                mean_psnr: p / d,
                mean_ssim: s / d,
            }
        })
        .collect();
    Ok(Report {
        mode: mode_name(protocol.mode).to_string(),
        seed: protocol.seed,
        patch_count: protocol.patch_count,
        patch_size: protocol.patch_size,
        config_hash: config_hash(protocol),
        rows,
        summary,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Writes `report.csv` (one row per image and method) and `report.json`.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::format(&csv_path, e.to_string()))?;
    for r in &report.rows {
        w.serialize(r).map_err(|e| Error::format(&csv_path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))
}
