//! Command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inpaint_core::curation::select;
use inpaint_core::guides::{structure_guide, GuideSet};
use inpaint_core::holes::{self, HoleKind};
use inpaint_core::metrics::{EvalMode, EvalProtocol};
use inpaint_core::rtv::rtv_structure;
use inpaint_core::synthesis::{naive_pipeline, optimized_pipeline, CoarseFill};
use inpaint_core::{HoleMask, PlaneImage};

use crate::bench::{read_corpus, run_eval, write_report};
use crate::config::{Mode, PipelineConfig};
use crate::error::{Error, Result};
use crate::exec::Pool;
use crate::io::{
    read_depth, read_image, read_mask, read_mask_for, read_rgb, read_segmentation, read_structure, write_mask, write_nnf,
    write_png,
};
use crate::manifest::{candidate_file_name, Manifest, Timings};
use crate::scorer::AnyScorer;

#[derive(Parser, Debug)]
#[command(name = "inpaint", version, about = "Guided PatchMatch inpainting with candidate curation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize the eight guide combinations and keep the preferred one.
    Pipeline(PipelineArgs),
    /// Extract a structure image with relative total variation.
    Rtv(RtvArgs),
    /// Generate synthetic hole masks.
    Holegen(HolegenArgs),
    /// Rank pre-rendered candidates with a pairwise scorer.
    Curate(CurateArgs),
    /// Score method outputs against a ground-truth corpus.
    Bench(BenchArgs),
}

/// Settings shared by commands that read the run configuration.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per logical core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// `heuristic` or `cmd:<path>`.
    #[arg(long)]
    pub scorer: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Naive,
    Optimized,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Hole mask; any nonzero sample is a hole.
    #[arg(long)]
    pub mask: PathBuf,
    /// Low-resolution inpainting used to initialize the hole.
    #[arg(long)]
    pub coarse: PathBuf,
    /// Depth map (PFM or 16-bit PNG).
    #[arg(long)]
    pub depth: PathBuf,
    /// Segmentation labels (red channel or 16-bit gray).
    #[arg(long)]
    pub segmentation: PathBuf,
    /// Structure image, or `auto` to extract it from the coarse fill.
    #[arg(long, default_value = "auto")]
    pub structure: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Write every candidate as `candidate_<index>_<letters>.png`.
    #[arg(long)]
    pub save_candidates: bool,
    /// Write the winner's nearest-neighbour field to `nnf.bin`.
    #[arg(long)]
    pub dump_nnf: bool,
    /// Validate inputs and print the resolved configuration only.
    #[arg(long)]
    pub dry_run: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct RtvArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "structure.png")]
    pub out: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub dry_run: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum KindArg {
    Freeform,
    Object,
    Mixed,
}

#[derive(Args, Debug)]
pub struct HolegenArgs {
    #[arg(long, value_enum, default_value = "mixed")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory of object-shaped masks (PNG).
    #[arg(long)]
    pub mask_lib: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
    #[arg(long, default_value_t = 1024)]
    pub height: usize,
    /// Take the mask size from this image instead.
    #[arg(long)]
    pub like: Option<PathBuf>,
    #[arg(long, default_value = "masks")]
    pub out: PathBuf,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args, Debug)]
pub struct CurateArgs {
    /// Two to sixteen candidate images of identical size.
    #[arg(required = true, num_args = 2..=16)]
    pub candidates: Vec<PathBuf>,
    #[arg(long)]
    pub mask: PathBuf,
    /// Also write the ranking as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum EvalModeArg {
    Full,
    Patch,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// JSON list of `{image, mask, id}`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directories, each holding `<id>.png` per corpus entry.
    #[arg(long, required = true, num_args = 1..)]
    pub methods: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: EvalModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub patch_count: usize,
    #[arg(long, default_value_t = 256)]
    pub patch_size: usize,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub dry_run: bool,
}

/// Resolves the configuration: defaults, file, environment, then flags.
pub fn resolve_config(args: &ConfigArgs, env: impl IntoIterator<Item = (String, String)>) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    if let Some(path) = &args.config {
        c.apply_file(path)?;
    }
    c.apply_env(env)?;
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        c.set(k.trim(), v)?;
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(t) = args.threads {
        c.threads = t;
    }
    if let Some(s) = &args.scorer {
        c.scorer = s.clone();
    }
    c.validate()?;
    AnyScorer::parse(&c.scorer)?;
    Ok(c)
}

fn log_config(c: &PipelineConfig) {
    eprintln!("resolved configuration:");
    for line in c.render().lines() {
        eprintln!("  {line}");
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct PipelineInputs {
    image: PlaneImage,
    mask: HoleMask,
    coarse: CoarseFill,
    guides: GuideSet,
}

fn load_inputs(args: &PipelineArgs, config: &PipelineConfig, compute_structure: bool) -> Result<PipelineInputs> {
    let image = read_rgb(&args.image)?;
    let dims = image.dims();
    let mask = read_mask_for(&args.mask, dims)?;
    let coarse_img = read_rgb(&args.coarse)?;
    let coarse = CoarseFill::new(coarse_img, args.coarse.display().to_string());
    coarse.check_aspect(dims.0, dims.1).map_err(|source| Error::Input {
        path: args.coarse.clone(),
        source,
    })?;
    let mut guides = GuideSet::default();
    guides.insert(read_depth(&args.depth, dims)?);
    guides.insert(read_segmentation(&args.segmentation, dims)?);
    if args.structure != "auto" {
        guides.insert(read_structure(Path::new(&args.structure), dims)?);
    } else if compute_structure {
        guides.insert(structure_guide(&rtv_structure(&coarse.image, &config.rtv)?)?);
    }
    Ok(PipelineInputs {
        image,
        mask,
        coarse,
        guides,
    })
}

pub fn cmd_pipeline(args: &PipelineArgs, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let t0 = Instant::now();
    let mut config = resolve_config(&args.config, env)?;
    if let Some(m) = args.mode {
        config.mode = match m {
            ModeArg::Naive => Mode::Naive,
            ModeArg::Optimized => Mode::Optimized,
        };
    }
    config.save_candidates |= args.save_candidates;
    config.dump_nnf |= args.dump_nnf;
    if args.dry_run {
        load_inputs(args, &config, false)?;
        print!("{}", config.render());
        return Ok(());
    }
    log_config(&config);
    let pool = Pool::new(config.threads)?;
    let scorer = AnyScorer::parse(&config.scorer)?;
    let inputs = load_inputs(args, &config, false)?;
    let t_load = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let mut guides = inputs.guides;
    if guides.structure.is_none() {
        eprintln!("extracting structure from the coarse fill");
        guides.insert(structure_guide(&rtv_structure(&inputs.coarse.image, &config.rtv)?)?);
    }
    let t_guides = t1.elapsed().as_secs_f64();
    let params = config.synthesis_params();
    eprintln!(
        "synthesizing {}x{} ({} hole pixels) in {} mode on {} threads",
        inputs.image.width(),
        inputs.image.height(),
        inputs.mask.hole_count(),
        config.get("mode").unwrap_or_default(),
        pool.threads()
    );
    let run = match config.mode {
        Mode::Naive => naive_pipeline,
        Mode::Optimized => optimized_pipeline,
    };
    let out = run(&inputs.image, &inputs.mask, &inputs.coarse, &guides, &params, &scorer, &config.crop, &pool)?;
    eprintln!("winner: candidate {} ({})", out.selection.winner, out.combo.letters());

    create_dir(&args.out)?;
    let winner_file = "winner.png";
    write_png(&args.out.join(winner_file), &out.image)?;
    if config.save_candidates {
        for (i, c) in out.candidates.entries.iter().enumerate() {
            write_png(&args.out.join(candidate_file_name(i, c.combo)), &c.image)?;
        }
    }
    if config.dump_nnf {
        write_nnf(&args.out.join("nnf.bin"), &out.field)?;
    }
    let mut inputs_map = BTreeMap::new();
    inputs_map.insert("image".to_string(), args.image.display().to_string());
    inputs_map.insert("mask".to_string(), args.mask.display().to_string());
    inputs_map.insert("coarse".to_string(), args.coarse.display().to_string());
    inputs_map.insert("depth".to_string(), args.depth.display().to_string());
    inputs_map.insert("segmentation".to_string(), args.segmentation.display().to_string());
    inputs_map.insert("structure".to_string(), args.structure.clone());
    let mut config_map: BTreeMap<String, String> = crate::config::KEYS
        .iter()
        .map(|(k, _)| (k.to_string(), config.get(k).expect("documented key")))
        .collect();
    // The thread budget does not change results.
    config_map.remove("threads");
    let manifest = Manifest::new(
        &config.get("mode").unwrap_or_default(),
        config.seed,
        inputs.image.dims(),
        inputs_map,
        config_map,
        &out,
        config.save_candidates,
        winner_file,
    );
    write_json(&args.out.join("manifest.json"), &manifest)?;
    let timings = Timings {
        threads: pool.threads(),
        load: t_load,
        guides: t_guides,
        candidates: out.timings.candidates,
        per_candidate: out.candidates.entries.iter().map(|c| c.seconds).collect(),
        curation: out.timings.curation,
        refinement: out.timings.refinement,
        total: t0.elapsed().as_secs_f64(),
    };
    write_json(&args.out.join("timings.json"), &timings)?;
    eprintln!("done in {:.2} s", timings.total);
    Ok(())
}

pub fn cmd_rtv(args: &RtvArgs, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut config = resolve_config(&args.config, env)?;
    if let Some(l) = args.lambda {
        config.rtv.lambda = l;
    }
    if let Some(s) = args.sigma {
        config.rtv.sigma = s;
    }
    if let Some(i) = args.iterations {
        config.rtv.iterations = i;
    }
    let image = read_rgb(&args.input)?;
    if args.dry_run {
        print!("{}", config.render());
        return Ok(());
    }
    let s = rtv_structure(&image, &config.rtv)?;
    write_png(&args.out, &s)
}

fn read_library(dir: &Path) -> Result<Vec<HoleMask>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_mask(p)).collect()
}

pub fn cmd_holegen(args: &HolegenArgs) -> Result<()> {
    let (w, h) = match &args.like {
        Some(p) => read_image(p)?.dims(),
        None => (args.width, args.height),
    };
    let library = match &args.mask_lib {
        Some(d) => read_library(d)?,
        None => Vec::new(),
    };
    let kind = match args.kind {
        KindArg::Freeform => Some(HoleKind::FreeForm),
        KindArg::Object => Some(HoleKind::ObjectShape),
        KindArg::Mixed => None,
    };
    if kind == Some(HoleKind::ObjectShape) && library.is_empty() {
        return Err(Error::Config("--kind object needs --mask-lib with at least one mask".into()));
    }
    if args.dry_run {
        println!("{} masks of {w}x{h}, library of {}", args.count, library.len());
        return Ok(());
    }
    let masks = holes::generate(kind, w, h, args.seed, args.count, &library)?;
    create_dir(&args.out)?;
    for (i, m) in masks.iter().enumerate() {
        write_mask(&args.out.join(format!("mask_{i:03}.png")), m)?;
    }
    eprintln!("wrote {} masks to {}", masks.len(), args.out.display());
    Ok(())
}

pub fn cmd_curate(args: &CurateArgs, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let config = resolve_config(&args.config, env)?;
    let images: Vec<PlaneImage> = args.candidates.iter().map(|p| read_rgb(p)).collect::<Result<_>>()?;
    let dims = images[0].dims();
    for (p, img) in args.candidates.iter().zip(&images) {
        if img.dims() != dims {
            return Err(Error::format(p, "candidates differ in size"));
        }
    }
    let mask = read_mask_for(&args.mask, dims)?;
    if args.dry_run {
        print!("{}", config.render());
        return Ok(());
    }
    let pool = Pool::new(config.threads)?;
    let scorer = AnyScorer::parse(&config.scorer)?;
    let refs: Vec<&PlaneImage> = images.iter().collect();
    let sel = select(&refs, &mask, &scorer, &config.crop, &pool)?;
    println!("winner {} {}", sel.winner, args.candidates[sel.winner].display());
    for (i, row) in sel.matrix.rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:+.4}")).collect();
        println!("{i:>2} [{}] p={:+.4}", cells.join(" "), sel.preferences[i]);
    }
    if let Some(path) = &args.report {
        write_json(path, &crate::manifest::CurationRecord::from(&sel))?;
    }
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let corpus = read_corpus(&args.manifest)?;
    let protocol = EvalProtocol {
        mode: match args.mode {
            EvalModeArg::Full => EvalMode::Full,
            EvalModeArg::Patch => EvalMode::Patch,
        },
        patch_count: args.patch_count,
        patch_size: args.patch_size,
        seed: args.seed,
    };
    if args.dry_run {
        println!("{} images, {} methods", corpus.len(), args.methods.len());
        return Ok(());
    }
    let pool = Pool::new(args.threads)?;
    let report = run_eval(&corpus, &args.methods, &protocol, &pool)?;
    write_report(&args.out, &report)?;
    for s in &report.summary {
        eprintln!("{}: psnr {:.3} dB, ssim {:.4} over {} images", s.method, s.mean_psnr, s.mean_ssim, s.images);
    }
    Ok(())
}

/// Runs a parsed command line; returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let env = || std::env::vars();
    let result = match &cli.command {
        Command::Pipeline(a) => cmd_pipeline(a, env()),
        Command::Rtv(a) => cmd_rtv(a, env()),
        Command::Holegen(a) => cmd_holegen(a),
        Command::Curate(a) => cmd_curate(a, env()),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
