//! Command-line front end. The `fasthand` binary only forwards to [`run`].
//!
//! Exit codes: 0 success, 1 invalid arguments or input data, 2 I/O, image or
//! model-file failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::annotations::{read_annotations, write_annotations, AnnotationRecord};
use crate::bench;
use crate::dataset::{annotate_mesh, augment, AugmentConfig, Intrinsics, JointVertexMap, MeshFrame};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::heatmap::HeatmapStack;
use crate::image_io::{load_rgb, save_rgb};
use crate::metrics::{evaluate, samples_from_records, DEFAULT_SIGMAS};
use crate::model::{build_fasthand, Model, ModelConfig, WeightSource};
use crate::render::{draw_keypoints, heatmap_overlay};
use crate::tensor::Tensor;
use crate::tracking::{DetectionFile, FrameOutcome, Pipeline, PipelineConfig, DEFAULT_MARGIN};

#[derive(Debug, Parser)]
#[command(name = "fasthand", version, about = "2D hand landmark inference, evaluation and dataset tools")]
pub struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, env = "FASTHAND_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a randomly initialized weight file.
    Init(InitArgs),
    /// Locate landmarks in a sequence of frames.
    Infer(InferArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Time crop + forward + decode.
    Bench(BenchArgs),
    /// Build annotations from hand meshes, optionally augmented.
    GenDataset(GenDatasetArgs),
    /// Draw heatmaps or keypoints over an image.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Default,
    Tiny,
    Deep,
}

impl Preset {
    pub fn config(self) -> ModelConfig {
        match self {
            Preset::Default => ModelConfig::default(),
            Preset::Tiny => ModelConfig::tiny(),
            Preset::Deep => ModelConfig::deep(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Weight file.
    #[arg(long)]
    pub model: PathBuf,
    /// Layer schedule the weights were built for.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub config: Preset,
}

impl ModelArgs {
    fn load(&self) -> Result<Model> {
        Model::load(&self.config.config(), &self.model)
    }
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub config: Preset,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Frames in stream order; directories expand to their PNG/PPM files.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// `frame x1 y1 x2 y2` per line; without it each frame's full extent is
    /// used as the hand box.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Prediction file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MARGIN, allow_negative_numbers = true)]
    pub margin: f64,
    #[arg(long)]
    pub no_stabilize: bool,
    #[arg(long)]
    pub no_subpixel: bool,
    /// Directory for keypoint overlay images.
    #[arg(long)]
    pub overlay_dir: Option<PathBuf>,
    /// Directory for raw heatmap stacks, one file per frame.
    #[arg(long)]
    pub heatmaps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// PCK threshold, repeatable.
    #[arg(long = "sigma")]
    pub sigmas: Vec<f64>,
    /// Full report; the summary line always goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    /// Frame to time on; a synthetic 640x480 frame otherwise.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MARGIN, allow_negative_numbers = true)]
    pub margin: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Mesh frames, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub vertex_map: PathBuf,
    /// `fx,fy,cx,cy` for frames that carry no intrinsics.
    #[arg(long, value_delimiter = ',')]
    pub intrinsics: Option<Vec<f64>>,
    /// Annotation file; augmented images go next to it.
    #[arg(long)]
    pub output: PathBuf,
    /// Variants per frame; 0 writes the projected annotations as they are.
    #[arg(long, default_value_t = 0)]
    pub augment: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MARGIN, allow_negative_numbers = true)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Background image; black when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Heatmap stack to blend over the (ROI) image.
    #[arg(long, conflicts_with = "keypoints", required_unless_present = "keypoints")]
    pub heatmaps: Option<PathBuf>,
    /// Annotation file whose record is drawn.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub record: usize,
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    validate(&cli.command)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Init(a) => cmd_init(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::GenDataset(a) => cmd_gen_dataset(a),
        Command::Render(a) => cmd_render(a),
    })
}

fn check_margin(margin: f64) -> Result<()> {
    if margin > 0.0 && margin.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("--margin must be positive, got {margin}")))
    }
}

/// Argument checks that need no file access.
fn validate(command: &Command) -> Result<()> {
    match command {
        Command::Infer(a) => check_margin(a.margin),
        Command::Eval(a) => match a.sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            Some(s) => Err(Error::Config(format!("--sigma must be positive, got {s}"))),
            None => Ok(()),
        },
        Command::Bench(a) => {
            if a.iterations == 0 {
                return Err(Error::Config("--iterations must be at least 1".into()));
            }
            check_margin(a.margin)
        }
        Command::GenDataset(a) => {
            if let Some(k) = &a.intrinsics {
                intrinsics_from(k)?;
            }
            check_margin(a.margin)
        }
        Command::Init(_) | Command::Render(_) => Ok(()),
    }
}

fn intrinsics_from(v: &[f64]) -> Result<Intrinsics> {
    let [fx, fy, cx, cy] = v[..] else {
        return Err(Error::Config("--intrinsics takes fx,fy,cx,cy".into()));
    };
    let k = Intrinsics { fx, fy, cx, cy };
    k.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(k)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = open_output(path)?;
    let target = path.unwrap_or(Path::new("<stdout>"));
    w.write_all(text.as_bytes()).map_err(|e| Error::io(target, e))?;
    w.flush().map_err(|e| Error::io(target, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_init(a: &InitArgs) -> Result<()> {
    let model = build_fasthand(&a.config.config(), WeightSource::Seed(a.seed))?;
    model.save_weights(&a.output)?;
    log::info!("wrote {} parameters to {}", model.param_count(), a.output.display());
    Ok(())
}

fn is_frame_file(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "ppm" | "pnm")
    )
}

/// Expands directories into their sorted frame files.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_frame_file(f))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn frame_stem(path: &Path, index: usize) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    format!("{index:05}_{stem}")
}

fn cmd_infer(a: &InferArgs) -> Result<()> {
    let model = Arc::new(a.model.load()?);
    let frames = expand_inputs(&a.input)?;
    if frames.is_empty() {
        return Err(Error::Config("no input frames".into()));
    }
    let detections = a.detections.as_ref().map(DetectionFile::load).transpose()?;
    for dir in [&a.overlay_dir, &a.heatmaps].into_iter().flatten() {
        create_dir(dir)?;
    }
    let mut pipeline = Pipeline::new(
        model,
        PipelineConfig {
            margin: a.margin,
            stabilize: !a.no_stabilize,
            subpixel: !a.no_subpixel,
            ..PipelineConfig::default()
        },
    );

    let mut records = Vec::new();
    let mut last_error = None;
    let mut failures = 0;
    for (index, path) in frames.iter().enumerate() {
        match infer_frame(a, &mut pipeline, detections.as_ref(), index, path) {
            Ok(Some(rec)) => records.push(rec),
            Ok(None) => log::info!("{}: no hand", path.display()),
            Err(e) => {
                log::error!("{}: {e}", path.display());
                failures += 1;
                last_error = Some(e);
            }
        }
    }
    if failures == frames.len() {
        return Err(last_error.expect("at least one frame failed"));
    }
    let mut w = open_output(a.output.as_deref())?;
    let target = a.output.as_deref().unwrap_or(Path::new("<stdout>"));
    for r in &records {
        writeln!(w, "{}", r.to_line()).map_err(|e| Error::io(target, e))?;
    }
    w.flush().map_err(|e| Error::io(target, e))
}

fn infer_frame(
    a: &InferArgs,
    pipeline: &mut Pipeline,
    detections: Option<&DetectionFile>,
    index: usize,
    path: &Path,
) -> Result<Option<AnnotationRecord>> {
    let image = load_rgb(path)?;
    let detection = match detections {
        Some(d) => d.get(index),
        None => Some(BoundingBox::new(0.0, 0.0, image.width() as f64, image.height() as f64)?),
    };
    let FrameOutcome::Hand(obs) = pipeline.process_frame(&image, detection)? else {
        return Ok(None);
    };
    let stem = frame_stem(path, index);
    if let Some(dir) = &a.overlay_dir {
        save_rgb(&draw_keypoints(&image, &obs.keypoints)?, dir.join(format!("{stem}.png")))?;
    }
    if let Some(dir) = &a.heatmaps {
        obs.heatmaps.save(dir.join(format!("{stem}.fsth")))?;
    }
    let mut rec = AnnotationRecord::from_keypoints(path.display().to_string(), &obs.keypoints)?;
    rec.bbox = Some(obs.bbox);
    Ok(Some(rec))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (pred, gt) = rayon::join(|| read_annotations(&a.input), || read_annotations(&a.ground_truth));
    let samples = samples_from_records(&pred?, &gt?)?;
    let sigmas = if a.sigmas.is_empty() { DEFAULT_SIGMAS.to_vec() } else { a.sigmas.clone() };
    let report = evaluate(&samples, &sigmas)?;
    println!("{}", report.summary());
    if let Some(p) = &a.output {
        write_text(Some(p), &report.to_text())?;
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let model = a.model.load()?;
    let frame = match &a.input {
        Some(p) => load_rgb(p)?,
        None => Tensor::from_fn(480, 640, 3, |y, x, c| ((x * 3 + y * 5 + c * 7) % 256) as f32 / 255.0)?,
    };
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    let bbox = BoundingBox::new(w * 0.25, h * 0.25, w * 0.75, h * 0.75)?;
    let report = bench::run(&model, &frame, &bbox, a.margin, a.iterations, a.warmup)?;
    write_text(a.output.as_deref(), &report.to_text())
}

/// Mixes the frame index into the user seed so every frame draws its own
/// variants regardless of scheduling.
fn frame_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn cmd_gen_dataset(a: &GenDatasetArgs) -> Result<()> {
    let meshes = MeshFrame::load_jsonl(&a.input)?;
    let map = JointVertexMap::load(&a.vertex_map)?;
    let fallback = a.intrinsics.as_deref().map(intrinsics_from).transpose()?;
    let records = meshes
        .par_iter()
        .enumerate()
        .map(|(i, m)| annotate_mesh(m, &map, fallback.as_ref()).map_err(|e| Error::Sample { index: i, reason: e.to_string() }))
        .collect::<Result<Vec<_>>>()?;

    if a.augment == 0 {
        return write_annotations(&records, &a.output);
    }
    let source_dir = a.input.parent().unwrap_or(Path::new(""));
    let out_dir = a.output.parent().unwrap_or(Path::new(""));
    let config = AugmentConfig {
        count: a.augment,
        margin: a.margin,
        ..AugmentConfig::default()
    };
    let variants = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let image = load_rgb(source_dir.join(&rec.image))?;
            let samples = augment(rec, &image, frame_seed(a.seed, i), &config)?;
            samples
                .into_iter()
                .map(|s| {
                    let path = out_dir.join(&s.record.image);
                    if let Some(dir) = path.parent() {
                        create_dir(dir)?;
                    }
                    save_rgb(&s.image, &path)?;
                    Ok(s.record)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    write_annotations(variants.iter().flatten(), &a.output)
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let out = if let Some(h) = &a.heatmaps {
        let stack = HeatmapStack::load(h)?;
        let canvas = match &a.input {
            Some(p) => load_rgb(p)?,
            None => {
                let (hh, hw, _) = stack.tensor().shape();
                Tensor::zeros(hh, hw, 3)?
            }
        };
        heatmap_overlay(&canvas, &stack)?
    } else {
        let path = a.keypoints.as_ref().expect("clap requires heatmaps or keypoints");
        let records = read_annotations(path)?;
        let rec = records.get(a.record).ok_or_else(|| Error::Config(format!(
            "--record {} out of range, {} has {} records",
            a.record,
            path.display(),
            records.len()
        )))?;
        let canvas = match &a.input {
            Some(p) => load_rgb(p)?,
            None => Tensor::zeros(rec.height, rec.width, 3)?,
        };
        draw_keypoints(&canvas, &rec.keypoints())?
    };
    save_rgb(&out, &a.output)
}
