//! Plain-text `key = value` run configuration.
//!
//! Values are resolved from defaults, then the config file, then `INPAINT_*`
//! environment variables, then command-line flags. Unknown keys are errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use inpaint_core::curation::AutoCropParams;
use inpaint_core::patchmatch::GainBiasLimits;
use inpaint_core::rtv::RtvParams;
use inpaint_core::synthesis::{SynthesisParams, VoteMode};

use crate::error::{Error, Result};

/// Prefix of environment overrides: key `patch_size` is `INPAINT_PATCH_SIZE`.
pub const ENV_PREFIX: &str = "INPAINT_";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Naive,
    Optimized,
}

/// Every documented key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for all random streams"),
    ("threads", "worker threads, 0 = one per logical core"),
    ("mode", "naive (8 candidates at native size) or optimized (candidates at the proxy size)"),
    ("scorer", "heuristic or cmd:<path>"),
    ("patch_size", "odd patch edge length"),
    ("pm_iterations", "PatchMatch iterations for standalone searches"),
    ("search_radius_decay", "random-search radius shrink factor"),
    ("band_rows", "rows per band for banded propagation, 0 = serial scan"),
    ("gain_bias", "true or false"),
    ("gain_min", "lower gain clamp"),
    ("gain_max", "upper gain clamp"),
    ("bias_min", "lower bias clamp"),
    ("bias_max", "upper bias clamp"),
    ("coarse_em_iterations", "EM iterations at the coarsest level"),
    ("fine_em_iterations", "EM iterations at full resolution"),
    ("search_iterations", "PatchMatch passes per EM step"),
    ("vote", "uniform or weighted"),
    ("mismatch_cost", "distance added per disagreeing segmentation label (squared)"),
    ("min_pyramid_edge", "short edge of the coarsest pyramid level"),
    ("proxy_long_edge", "long edge of optimized-mode candidates"),
    ("crop_gamma", "auto-crop growth factor"),
    ("crop_tau", "auto-crop hole-fraction threshold"),
    ("crop_base", "auto-crop starting side"),
    ("scorer_size", "side of the crops shown to the scorer"),
    ("rtv_lambda", "RTV smoothness weight"),
    ("rtv_sigma", "RTV window scale"),
    ("rtv_iterations", "RTV outer iterations"),
    ("save_candidates", "write every candidate PNG (true or false)"),
    ("dump_nnf", "write the winner's nearest-neighbour field (true or false)"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub threads: usize,
    pub mode: Mode,
    pub scorer: String,
    pub synthesis: SynthesisParams,
    pub crop: AutoCropParams,
    pub rtv: RtvParams,
    pub save_candidates: bool,
    pub dump_nnf: bool,
    /// Limits used when `gain_bias` is switched on.
    limits: GainBiasLimits,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let synthesis = SynthesisParams::default();
        Self {
            seed: 0,
            threads: 0,
            mode: Mode::Optimized,
            scorer: "heuristic".into(),
            limits: synthesis.patch.gain_bias.unwrap_or_default(),
            synthesis,
            crop: AutoCropParams::default(),
            rtv: RtvParams::default(),
            save_candidates: false,
            dump_nnf: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {value:?} for {key} (expected true or false)"))),
    }
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let s = &mut self.synthesis;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "mode" => {
                self.mode = match v {
                    "naive" => Mode::Naive,
                    "optimized" => Mode::Optimized,
                    _ => return Err(Error::Config(format!("invalid mode {v:?} (expected naive or optimized)"))),
                }
            }
            "scorer" => self.scorer = v.to_string(),
            "patch_size" => s.patch.patch_size = parse(key, v)?,
            "pm_iterations" => s.patch.pm_iterations = parse(key, v)?,
            "search_radius_decay" => s.patch.search_radius_decay = parse(key, v)?,
            "band_rows" => s.patch.band_rows = Some(parse(key, v)?).filter(|&b: &usize| b > 0),
            "gain_bias" => s.patch.gain_bias = parse_bool(key, v)?.then_some(self.limits),
            "gain_min" | "gain_max" | "bias_min" | "bias_max" => {
                let x: f32 = parse(key, v)?;
                let l = &mut self.limits;
                match key {
                    "gain_min" => l.gain_min = x,
                    "gain_max" => l.gain_max = x,
                    "bias_min" => l.bias_min = x,
                    _ => l.bias_max = x,
                }
                if s.patch.gain_bias.is_some() {
                    s.patch.gain_bias = Some(*l);
                }
            }
            "coarse_em_iterations" => s.coarse_em_iterations = parse(key, v)?,
            "fine_em_iterations" => s.fine_em_iterations = parse(key, v)?,
            "search_iterations" => s.search_iterations = parse(key, v)?,
            "vote" => {
                s.vote_mode = match v {
                    "uniform" => VoteMode::Uniform,
                    "weighted" => VoteMode::DistanceWeighted,
                    _ => return Err(Error::Config(format!("invalid vote {v:?} (expected uniform or weighted)"))),
                }
            }
            "mismatch_cost" => s.mismatch_cost = parse(key, v)?,
            "min_pyramid_edge" => s.min_pyramid_edge = parse(key, v)?,
            "proxy_long_edge" => s.proxy_long_edge = parse(key, v)?,
            "crop_gamma" => self.crop.gamma = parse(key, v)?,
            "crop_tau" => self.crop.tau = parse(key, v)?,
            "crop_base" => self.crop.base = parse(key, v)?,
            "scorer_size" => self.crop.scorer_size = parse(key, v)?,
            "rtv_lambda" => self.rtv.lambda = parse(key, v)?,
            "rtv_sigma" => self.rtv.sigma = parse(key, v)?,
            "rtv_iterations" => self.rtv.iterations = parse(key, v)?,
            "save_candidates" => self.save_candidates = parse_bool(key, v)?,
            "dump_nnf" => self.dump_nnf = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.synthesis;
        let gb = s.patch.gain_bias.unwrap_or(self.limits);
        Some(match key {
            "seed" => self.seed.to_string(),
            "threads" => self.threads.to_string(),
            "mode" => match self.mode {
                Mode::Naive => "naive".into(),
                Mode::Optimized => "optimized".into(),
            },
            "scorer" => self.scorer.clone(),
            "patch_size" => s.patch.patch_size.to_string(),
            "pm_iterations" => s.patch.pm_iterations.to_string(),
            "search_radius_decay" => s.patch.search_radius_decay.to_string(),
            "band_rows" => s.patch.band_rows.unwrap_or(0).to_string(),
            "gain_bias" => s.patch.gain_bias.is_some().to_string(),
            "gain_min" => gb.gain_min.to_string(),
            "gain_max" => gb.gain_max.to_string(),
            "bias_min" => gb.bias_min.to_string(),
            "bias_max" => gb.bias_max.to_string(),
            "coarse_em_iterations" => s.coarse_em_iterations.to_string(),
            "fine_em_iterations" => s.fine_em_iterations.to_string(),
            "search_iterations" => s.search_iterations.to_string(),
            "vote" => match s.vote_mode {
                VoteMode::Uniform => "uniform".into(),
                VoteMode::DistanceWeighted => "weighted".into(),
            },
            "mismatch_cost" => s.mismatch_cost.to_string(),
            "min_pyramid_edge" => s.min_pyramid_edge.to_string(),
            "proxy_long_edge" => s.proxy_long_edge.to_string(),
            "crop_gamma" => self.crop.gamma.to_string(),
            "crop_tau" => self.crop.tau.to_string(),
            "crop_base" => self.crop.base.to_string(),
            "scorer_size" => self.crop.scorer_size.to_string(),
            "rtv_lambda" => self.rtv.lambda.to_string(),
            "rtv_sigma" => self.rtv.sigma.to_string(),
            "rtv_iterations" => self.rtv.iterations.to_string(),
            "save_candidates" => self.save_candidates.to_string(),
            "dump_nnf" => self.dump_nnf.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `INPAINT_<KEY>` variables; any other variable with the prefix
    /// is rejected.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<()> {
        let mut found: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
            .collect();
        found.sort();
        for (k, v) in found {
            self.set(&k, &v)
                .map_err(|e| Error::Config(format!("{ENV_PREFIX}{}: {e}", k.to_ascii_uppercase())))?;
        }
        Ok(())
    }

    /// Every key in documented order, one `key = value` line each.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("documented key"));
        }
        out
    }

    /// Resolved parameters with the master seed applied.
    pub fn synthesis_params(&self) -> SynthesisParams {
        let mut p = self.synthesis.clone();
        p.patch.rng_seed = self.seed;
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.synthesis_params().validate()?;
        self.crop.validate()?;
        Ok(())
    }
}
