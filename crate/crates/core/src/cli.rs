//! Command-line front end. Every subcommand writes its results to files or
//! stdout as CSV; failures print one `error,<kind>,<message>` line.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{dct_baseline, gaussian_curvature, latent_mean, latent_pca, latent_interpolate, psnr, quantize_uniform, QuantSpec};
use crate::error::Error;
use crate::finola::{propagate, propagate_parallel, FeatureMap, FinolaParams, LatentSet, Position, ScanOrder};
use crate::image::Image;
use crate::io::{load_dataset, read_image, write_heatmap, write_image, Checkpoint, DatasetSource, MetricsWriter, Precision, RunConfig};
use crate::model::{mean_image_baseline_psnr, model_grad_check, synthetic_images, train, GradCheckOptions, Model, ModelConfig};
use crate::scalar::Scalar;
use crate::wave::{build_wave_basis, generation_step_mask, project_map, wave_residual, SpeedMode};

pub const WORKERS_ENV: &str = "FINOLA_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "finola", version, about = "FINOLA feature-map generation, wave analysis and desk-scale training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an autoencoder and write a checkpoint plus per-epoch metrics.
    Train(TrainArgs),
    /// Reconstruct one image through a checkpoint.
    Reconstruct(ReconstructArgs),
    /// Dump the latent wave speeds of a checkpoint.
    Waves(WavesArgs),
    /// Rank feature-map channels by Gaussian curvature.
    Curvature(CurvatureArgs),
    /// Reconstruction PSNR after uniform latent quantization.
    Compress(CompressArgs),
    /// Reconstruction PSNR from the first K zig-zag DCT coefficients.
    BaselineDct(DctArgs),
    /// Mean embedding, PCA truncation and interpolation in latent space.
    LatentStudy(LatentArgs),
    /// Compare analytic and finite-difference gradients on a small graph.
    Gradcheck(GradcheckArgs),
    /// Time and cross-check worker-parallel propagation.
    BenchParallel(BenchArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// key=value run configuration; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// `synthetic:N` or a directory of PGM/PPM files.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

/// Where the data for checkpoint-driven studies comes from; defaults to the
/// dataset recorded when the checkpoint was trained.
#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Print `psnr_db,<value>` against the input.
    #[arg(long)]
    pub psnr: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct WavesArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Spectrum CSV: `index,re,im,modulus`, one row per channel.
    #[arg(long)]
    pub out: PathBuf,
    /// Wave-equation residual report CSV.
    #[arg(long)]
    pub residual: Option<PathBuf>,
    /// Image whose first latent seeds the residual maps; otherwise a seeded
    /// random latent is used.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Ranking CSV: `rank,channel,score`.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-channel curvature heatmaps of the top channels.
    #[arg(long)]
    pub heatmaps: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub top: usize,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CompressArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2u32, 4, 6, 8])]
    pub bits: Vec<u32>,
    /// `bits,bpp,psnr_db`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DctArgs {
    /// A single image; otherwise `--dataset` is used.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value = "synthetic:20")]
    pub dataset: String,
    #[arg(long, default_value_t = 2024)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 16)]
    pub height: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long = "k", value_delimiter = ',', default_values_t = vec![1usize, 3, 6, 10, 64])]
    pub k: Vec<usize>,
    /// `k,psnr_db`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LatentArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4, 8])]
    pub pca: Vec<usize>,
    /// Number of random image pairs to interpolate between.
    #[arg(long, default_value_t = 4)]
    pub pairs: usize,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    /// Directory for the interpolated frames.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// `study,param,psnr_db`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub images: usize,
    #[arg(long, default_value = "complex_free")]
    pub constraint: SpeedMode,
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Check only this many evenly spaced entries per tensor.
    #[arg(long)]
    pub max_per_group: Option<usize>,
    /// Per-group report `group,checked,max_rel_error,max_abs_error`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 16)]
    pub channels: usize,
    /// Worker counts to time, e.g. `1,8`.
    #[arg(long, value_delimiter = ',')]
    pub workers: Option<Vec<usize>>,
    #[arg(long, default_value_t = 9)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Explicit flag, then `FINOLA_WORKERS`, then 1.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize, Error> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| Error::Usage(format!("{WORKERS_ENV}=`{v}` is not a worker count"))),
        Err(_) => Ok(1),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(stderr, "error,usage,{first}");
            return 2;
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error,{},{msg}", e.kind());
            e.exit_code()
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), Error> {
    match command {
        Command::Train(a) => cmd_train(a, out),
        Command::Reconstruct(a) => cmd_reconstruct(a, out),
        Command::Waves(a) => cmd_waves(a),
        Command::Curvature(a) => cmd_curvature(a),
        Command::Compress(a) => cmd_compress(a),
        Command::BaselineDct(a) => cmd_dct(a),
        Command::LatentStudy(a) => cmd_latent(a),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::BenchParallel(a) => cmd_bench(a, out),
    }
}

fn say(out: &mut dyn Write, line: &str) -> Result<(), Error> {
    writeln!(out, "{line}").map_err(|e| Error::Usage(format!("stdout: {e}")))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io(crate::io::IoError::from_std(path, e)))
}

fn parse_dataset(s: &str) -> Result<DatasetSource, Error> {
    s.parse().map_err(Error::Usage)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<(), Error> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.train.total_epochs = e;
    }
    if let Some(d) = &a.dataset {
        cfg.dataset = parse_dataset(d)?;
    }
    cfg.train.validate()?;
    let m = &cfg.model;
    let data = load_dataset(&cfg.dataset, m.image_width, m.image_height, m.image_channels, cfg.data_seed)?;
    let (ck, final_psnr) = match cfg.precision {
        Precision::F32 => train_run::<f32>(&cfg, &data, a.metrics.as_deref())?,
        Precision::F64 => train_run::<f64>(&cfg, &data, a.metrics.as_deref())?,
    };
    ck.save(&a.checkpoint)?;
    say(out, &format!("baseline_psnr_db,{:?}", mean_image_baseline_psnr(&data)))?;
    say(out, &format!("psnr_db,{final_psnr:?}"))
}

fn train_run<T: Scalar>(cfg: &RunConfig, data: &[Image], metrics: Option<&Path>) -> Result<(Checkpoint, f64), Error> {
    let mut model = Model::<T>::new(cfg.model.clone(), &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let mut writer = metrics.map(|p| MetricsWriter::create(p, &cfg.entries())).transpose()?;
    let mut write_err = None;
    let history = train(&mut model, data, &cfg.train, cfg.seed, |m| {
        if let Some(w) = writer.as_mut() {
            if let Err(e) = w.row(m) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let final_psnr = crate::model::evaluate_psnr(&model, data)?;
    let run: Vec<(String, String)> = cfg.entries().into_iter().map(|(k, v)| (format!("run.{k}"), v)).collect();
    let ck = Checkpoint::from_model(&model, cfg.seed, history.len() as u32, &run);
    Ok((ck, final_psnr))
}

fn load_model(path: &Path) -> Result<(Checkpoint, Model<f64>), Error> {
    let ck = Checkpoint::load(path)?;
    let model = ck.to_model::<f64>()?;
    Ok((ck, model))
}

/// The dataset named on the command line, else the one the checkpoint was
/// trained on.
fn study_data(ck: &Checkpoint, cfg: &ModelConfig, d: &DataArgs) -> Result<Vec<Image>, Error> {
    let source = match (d.dataset.as_deref(), ck.meta("run.dataset")) {
        (Some(s), _) | (None, Some(s)) => parse_dataset(s)?,
        (None, None) => return Err(Error::Usage("--dataset is required for this checkpoint".into())),
    };
    let seed = match (d.data_seed, ck.meta("run.data_seed")) {
        (Some(s), _) => s,
        (None, Some(s)) => s.parse().map_err(|_| Error::Usage(format!("bad run.data_seed `{s}` in checkpoint")))?,
        (None, None) => 2024,
    };
    Ok(load_dataset(&source, cfg.image_width, cfg.image_height, cfg.image_channels, seed)?)
}

/// Multi-path map built with the worker-parallel propagator when the
/// ordering allows it; the result does not depend on `workers`.
fn feature_map(latents: &LatentSet<f64>, p: &FinolaParams<f64>, cfg: &ModelConfig, workers: usize) -> Result<FeatureMap<f64>, Error> {
    let (w, h) = (cfg.map_width, cfg.map_height);
    let mut total = FeatureMap::zeros(w, h, cfg.channels)?;
    for (q, &pos) in latents.vectors.iter().zip(&latents.positions) {
        let map = match cfg.order {
            ScanOrder::Averaged => propagate_parallel(q, pos, p, w, h, workers)?,
            order => propagate(q, pos, p, w, h, order)?,
        };
        for (t, &v) in total.as_mut_slice().iter_mut().zip(map.as_slice()) {
            *t += v;
        }
    }
    Ok(total)
}

fn decode_latents(model: &Model<f64>, p: &FinolaParams<f64>, latents: &LatentSet<f64>, workers: usize) -> Result<Image, Error> {
    let map = feature_map(latents, p, model.config(), workers)?;
    Ok(model.decode(&map)?.clamped())
}

fn cmd_reconstruct(a: ReconstructArgs, out: &mut dyn Write) -> Result<(), Error> {
    let workers = resolve_workers(a.workers)?;
    let (_, model) = load_model(&a.checkpoint)?;
    let image = read_image(&a.image)?;
    let p = model.finola_params()?;
    let rec = decode_latents(&model, &p, &model.encode(&image)?, workers)?;
    write_image(&a.out, &rec)?;
    if a.psnr {
        say(out, &format!("psnr_db,{:?}", psnr(&image, &rec, 1.0)?))?;
    }
    Ok(())
}

fn cmd_waves(a: WavesArgs) -> Result<(), Error> {
    let (_, model) = load_model(&a.checkpoint)?;
    let p = model.finola_params()?;
    let basis = build_wave_basis(&p)?;
    let mut csv = String::from("index,re,im,modulus\n");
    for (k, l) in basis.speeds().iter().enumerate() {
        writeln!(csv, "{k},{:?},{:?},{:?}", l.re, l.im, l.norm()).unwrap();
    }
    write_text(&a.out, &csv)?;
    let Some(path) = a.residual else {
        return Ok(());
    };
    let cfg = model.config();
    let (q, origin) = match &a.image {
        Some(img) => {
            let lat = model.encode(&read_image(img)?)?;
            (lat.vectors[0].clone(), lat.positions[0])
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            ((0..cfg.channels).map(|_| rng.gen_range(-1.0..1.0)).collect(), Position::Center)
        }
    };
    let (w, h) = (cfg.map_width, cfg.map_height);
    let mask = generation_step_mask(w, h, origin)?;
    let mut csv = String::from("map,region,cells,max,mean\n");
    for order in [ScanOrder::HorizontalFirst, ScanOrder::Averaged] {
        let zeta = project_map(&propagate(&q, origin, &p, w, h, order)?, &basis)?;
        let r = wave_residual(&zeta, basis.speeds(), &mask);
        writeln!(csv, "{order},generation,{},{:?},{:?}", r.masked_cells, r.masked_max, r.masked_mean).unwrap();
        writeln!(csv, "{order},all,{},{:?},{:?}", r.all_cells, r.all_max, r.all_mean).unwrap();
    }
    write_text(&path, &csv)
}

fn cmd_curvature(a: CurvatureArgs) -> Result<(), Error> {
    let workers = resolve_workers(a.workers)?;
    let (_, model) = load_model(&a.checkpoint)?;
    let p = model.finola_params()?;
    let cfg = model.config();
    let map = feature_map(&model.encode(&read_image(&a.image)?)?, &p, cfg, workers)?;
    let field = gaussian_curvature(&map);
    let mut csv = String::from("rank,channel,score\n");
    for (rank, &k) in field.ranking.iter().enumerate() {
        writeln!(csv, "{rank},{k},{:?}", field.scores[k]).unwrap();
    }
    write_text(&a.out, &csv)?;
    if let Some(dir) = a.heatmaps {
        fs::create_dir_all(&dir).map_err(|e| Error::Io(crate::io::IoError::from_std(&dir, e)))?;
        for &k in field.ranking.iter().take(a.top) {
            write_heatmap(&dir.join(format!("channel_{k:03}.pgm")), field.width, field.height, &field.kappa[k])?;
        }
    }
    Ok(())
}

fn cmd_compress(a: CompressArgs) -> Result<(), Error> {
    let workers = resolve_workers(a.workers)?;
    let (ck, model) = load_model(&a.checkpoint)?;
    let cfg = model.config().clone();
    let data = study_data(&ck, &cfg, &a.data)?;
    let p = model.finola_params()?;
    let latents = data.iter().map(|img| model.encode(img)).collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("bits,bpp,psnr_db\n");
    for &bits in &a.bits {
        let spec = QuantSpec::fit(bits, &latents)?;
        let (mut total, mut bpp) = (0.0, 0.0);
        for (img, lat) in data.iter().zip(&latents) {
            let qz = quantize_uniform(lat, &spec, cfg.image_width, cfg.image_height)?;
            total += psnr(img, &decode_latents(&model, &p, &qz.dequantized, workers)?, 1.0)?;
            bpp = qz.bits_per_pixel;
        }
        writeln!(csv, "{bits},{bpp:?},{:?}", total / data.len() as f64).unwrap();
    }
    write_text(&a.out, &csv)
}

fn cmd_dct(a: DctArgs) -> Result<(), Error> {
    let images = match &a.image {
        Some(p) => vec![read_image(p)?],
        None => load_dataset(&parse_dataset(&a.dataset)?, a.width, a.height, a.channels, a.data_seed)?,
    };
    let mut csv = String::from("k,psnr_db\n");
    for &k in &a.k {
        if !(1..=64).contains(&k) {
            return Err(Error::Usage(format!("K must lie in 1..=64, got {k}")));
        }
        let mut total = 0.0;
        for img in &images {
            total += psnr(img, &dct_baseline(img, k).clamped(), 1.0)?;
        }
        writeln!(csv, "{k},{:?}", total / images.len() as f64).unwrap();
    }
    write_text(&a.out, &csv)
}

fn unflatten(flat: &[f64], cfg: &ModelConfig) -> Result<LatentSet<f64>, Error> {
    let vectors = flat.chunks(cfg.channels).map(<[f64]>::to_vec).collect();
    Ok(LatentSet::with_positions(vectors, cfg.positions())?)
}

fn cmd_latent(a: LatentArgs) -> Result<(), Error> {
    let workers = resolve_workers(a.workers)?;
    let (ck, model) = load_model(&a.checkpoint)?;
    let cfg = model.config().clone();
    let data = study_data(&ck, &cfg, &a.data)?;
    let p = model.finola_params()?;
    let flat = data
        .iter()
        .map(|img| model.encode(img).map(|l| l.flatten()))
        .collect::<Result<Vec<_>, _>>()?;
    let mean_psnr = |recons: &[Vec<f64>]| -> Result<f64, Error> {
        let mut total = 0.0;
        for (img, q) in data.iter().zip(recons) {
            total += psnr(img, &decode_latents(&model, &p, &unflatten(q, &cfg)?, workers)?, 1.0)?;
        }
        Ok(total / data.len() as f64)
    };

    let mut csv = String::from("study,param,psnr_db\n");
    writeln!(csv, "full,-,{:?}", mean_psnr(&flat)?).unwrap();
    let mean = latent_mean(&flat)?;
    writeln!(csv, "mean_latent,-,{:?}", mean_psnr(&vec![mean; data.len()])?).unwrap();
    for &k in &a.pca {
        let pca = latent_pca(&flat, k)?;
        writeln!(csv, "pca,{k},{:?}", mean_psnr(&pca.reconstructions)?).unwrap();
    }

    if let Some(dir) = &a.frames {
        fs::create_dir_all(dir).map_err(|e| Error::Io(crate::io::IoError::from_std(dir, e)))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng);
    let pairs: Vec<(usize, usize)> = idx.chunks_exact(2).take(a.pairs).map(|c| (c[0], c[1])).collect();
    let steps = a.steps.max(2);
    for s in 0..steps {
        let alpha = s as f64 / (steps - 1) as f64;
        // PSNR of each interpolated frame against the pixel-space blend of
        // its endpoints.
        let mut total = 0.0;
        for (pi, &(i, j)) in pairs.iter().enumerate() {
            let q = latent_interpolate(&flat[i], &flat[j], alpha)?;
            let frame = decode_latents(&model, &p, &unflatten(&q, &cfg)?, workers)?;
            let (w, h, c) = data[i].shape();
            let blend = Image::from_fn(w, h, c, |x, y, ch| (1.0 - alpha) * data[i].get(x, y, ch) + alpha * data[j].get(x, y, ch));
            total += psnr(&blend, &frame, 1.0)?;
            if let Some(dir) = &a.frames {
                write_image(&dir.join(format!("pair{pi}_step{s}.pgm")), &frame)?;
            }
        }
        if !pairs.is_empty() {
            writeln!(csv, "interpolation,{alpha:?},{:?}", total / pairs.len() as f64).unwrap();
        }
    }
    write_text(&a.out, &csv)
}

fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<(), Error> {
    let mut cfg = ModelConfig::gradcheck();
    cfg.constraint = a.constraint;
    let model = Model::<f64>::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    let images = synthetic_images(a.images.max(1), cfg.image_width, cfg.image_height, a.seed);
    let refs: Vec<&Image> = images.iter().collect();
    let opts = GradCheckOptions {
        step: a.step,
        max_per_group: a.max_per_group,
        ..GradCheckOptions::default()
    };
    let report = model_grad_check(&model, &refs, &opts)?;
    if let Some(path) = &a.out {
        let mut csv = String::from("group,checked,max_rel_error,max_abs_error\n");
        for g in &report.groups {
            writeln!(csv, "{},{},{:?},{:?}", g.name, g.checked, g.max_rel_error, g.max_abs_error).unwrap();
        }
        write_text(path, &csv)?;
    }
    let worst = report.max_rel_error();
    say(out, &format!("max_rel_error,{worst:e}"))?;
    if !report.passed(a.tolerance) {
        return Err(Error::CheckFailed(format!("gradient check failed: {worst:e} >= {:e}", a.tolerance)));
    }
    Ok(())
}

/// One timed worker configuration of [`bench_parallel`].
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub workers: usize,
    /// Median wall-clock seconds over the repeats.
    pub seconds: f64,
    /// Max deviation from the sequential map relative to its largest entry.
    pub max_rel_dev: f64,
}

/// Times [`propagate_parallel`] on a seeded `size×size` instance for each
/// worker count against the sequential averaged oracle. Repeats are
/// interleaved across configurations so drift affects all of them alike.
pub fn bench_parallel(size: usize, channels: usize, workers: &[usize], repeats: usize, seed: u64) -> Result<Vec<BenchRow>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = FinolaParams::<f64>::random(channels, &mut rng);
    let q: Vec<f64> = (0..channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let oracle = propagate(&q, Position::Center, &p, size, size, ScanOrder::Averaged)?;
    let scale = oracle.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut times = vec![Vec::new(); workers.len()];
    let mut devs = vec![0.0f64; workers.len()];
    for _ in 0..repeats.max(1) {
        for (i, &n) in workers.iter().enumerate() {
            let t = Instant::now();
            let map = propagate_parallel(&q, Position::Center, &p, size, size, n)?;
            times[i].push(t.elapsed().as_secs_f64());
            devs[i] = devs[i].max(map.max_abs_diff(&oracle) / scale);
        }
    }
    Ok(workers
        .iter()
        .zip(times)
        .zip(devs)
        .map(|((&n, mut t), dev)| {
            t.sort_by(f64::total_cmp);
            BenchRow {
                workers: n,
                seconds: t[t.len() / 2],
                max_rel_dev: dev,
            }
        })
        .collect())
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), Error> {
    let workers = match a.workers {
        Some(list) if !list.is_empty() => list,
        Some(_) => return Err(Error::Usage("--workers needs at least one count".into())),
        None => match std::env::var(WORKERS_ENV) {
            Ok(_) => vec![1, resolve_workers(None)?],
            Err(_) => vec![1, 8],
        },
    };
    let rows = bench_parallel(a.size, a.channels, &workers, a.repeats, a.seed)?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    say(out, &format!("cores,{cores}"))?;
    let mut all_equal = true;
    for r in &rows {
        all_equal &= r.max_rel_dev <= 1e-6;
        say(out, &format!("workers,{},seconds,{:.6},max_rel_dev,{:e}", r.workers, r.seconds, r.max_rel_dev))?;
    }
    say(out, &format!("equal,{all_equal}"))?;
    if !all_equal {
        return Err(Error::CheckFailed("parallel map differs from the sequential oracle".into()));
    }
    Ok(())
}
