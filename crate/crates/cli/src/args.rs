use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctstreak::gru::{GruVariant, PatchOrder};
use ctstreak::noise::DEFAULT_INTENSITIES;
use ctstreak::pipeline::{ModelKind, DEFAULT_ELLIPSES, DEFAULT_EPOCHS, DEFAULT_FOV, DEFAULT_SPLIT};
use ctstreak::recon::{Method, DEFAULT_SIRT_ITERATIONS, DEFAULT_TV_WEIGHT};
use serde::{Deserialize, Serialize};

/// Batch size used by the command line. Smaller than the library default so
/// that short desk-scale runs still take enough optimiser steps.
pub const CLI_BATCH_SIZE: usize = 1;
pub const CLI_LEARNING_RATE: f64 = 1e-2;

#[derive(Debug, Parser)]
#[command(name = "ctstreak", version, about = "Limited-view parallel-beam CT: simulation, reconstruction and streak removal")]
pub struct Cli {
    /// Worker threads for projection, reconstruction and evaluation; 0 uses every core.
    #[arg(long, global = true, env = "CTSTREAK_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Render a phantom image.
    Phantom(PhantomArgs),
    /// Forward project an image into a parallel-beam sinogram.
    Project(ProjectArgs),
    /// Add Poisson photon noise to a sinogram.
    Noise(NoiseArgs),
    /// Reconstruct an image from a sinogram.
    Recon(ReconArgs),
    /// Train a streak-removal network on generated phantom pairs.
    Train(TrainArgs),
    /// Apply a trained network to held-out pairs and report metrics.
    Eval(EvalArgs),
    /// Reconstruction quality of every method across photon intensities.
    Sweep(SweepArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    SheppLogan,
    Ellipses,
    /// Ingest a user-supplied image.
    File,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PhantomArgs {
    /// Phantom family.
    #[arg(long, value_enum, default_value_t = PhantomKind::SheppLogan)]
    pub kind: PhantomKind,
    /// Image width and height in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    /// Number of random ellipses (ellipses kind).
    #[arg(long = "n", default_value_t = DEFAULT_ELLIPSES)]
    pub n_ellipses: usize,
    /// Seed of the random ellipses.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Source PNG for the file kind; converted to grey and resized.
    #[arg(long, required_if_eq("kind", "file"))]
    pub input: Option<PathBuf>,
    /// Output CTT1 image.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Optional PNG preview.
    #[arg(long)]
    pub png: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    /// Input CTT1 image (square).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output CTT1 sinogram, [angles, detectors].
    #[arg(short, long)]
    pub output: PathBuf,
    /// Equiangular views over [0, pi).
    #[arg(long, default_value_t = 20)]
    pub angles: usize,
    /// Detector count; defaults to the image size.
    #[arg(long)]
    pub detectors: Option<usize>,
    /// Field of view in world units; pixel and detector pitch are fov / size.
    #[arg(long, default_value_t = DEFAULT_FOV)]
    pub fov: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NoiseArgs {
    /// Input CTT1 sinogram of line integrals.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output CTT1 sinogram.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Incident photon count per ray (I0).
    #[arg(long)]
    pub intensity: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReconArgs {
    /// Input CTT1 sinogram; angles and detectors are read from its shape.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output CTT1 image.
    #[arg(short, long)]
    pub output: PathBuf,
    /// fbp, sirt, cgls or tvmin.
    #[arg(long, default_value_t = Method::Sirt)]
    pub method: Method,
    /// Iterations; defaults to 100 for SIRT, and the library default otherwise.
    #[arg(long)]
    pub iters: Option<usize>,
    /// TV weight for tvmin.
    #[arg(long = "lambda", default_value_t = DEFAULT_TV_WEIGHT)]
    pub lambda: f64,
    /// Image size; defaults to the detector count.
    #[arg(long)]
    pub size: Option<usize>,
    /// Field of view the sinogram was acquired with.
    #[arg(long, default_value_t = DEFAULT_FOV)]
    pub fov: f64,
    /// Ground-truth CTT1 image; PSNR, SSIM and MSE are reported against it.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Optional PNG preview.
    #[arg(long)]
    pub png: Option<PathBuf>,
}

/// Synthetic pair generation shared by train and eval.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Number of phantom pairs.
    #[arg(long, default_value_t = 20)]
    pub pairs: usize,
    /// Image size in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Equiangular views over [0, pi).
    #[arg(long, default_value_t = 20)]
    pub angles: usize,
    /// Field of view in world units.
    #[arg(long, default_value_t = DEFAULT_FOV)]
    pub fov: f64,
    /// Random ellipses per phantom.
    #[arg(long, default_value_t = DEFAULT_ELLIPSES)]
    pub ellipses: usize,
    /// SIRT iterations producing the network inputs.
    #[arg(long, default_value_t = DEFAULT_SIRT_ITERATIONS)]
    pub sirt_iters: usize,
    /// Photon count per ray; noiseless when omitted.
    #[arg(long)]
    pub intensity: Option<f64>,
    /// Noise seed of the first pair; defaults to the phantom seed.
    #[arg(long)]
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// msd or msd-gru.
    #[arg(long, default_value_t = ModelKind::Msd)]
    pub model: ModelKind,
    /// Network depth.
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    /// Training epochs.
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    /// Pairs per optimiser step.
    #[arg(long, default_value_t = CLI_BATCH_SIZE)]
    pub batch_size: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = CLI_LEARNING_RATE)]
    pub lr: f64,
    /// Fraction of pairs used for training; the rest validate.
    #[arg(long, default_value_t = DEFAULT_SPLIT)]
    pub split: f64,
    /// Square patch side for msd-gru; defaults to a quarter of the image size.
    #[arg(long)]
    pub patch: Option<usize>,
    /// GRU update form: standard or literal.
    #[arg(long, default_value_t = GruVariant::Standard)]
    pub variant: GruVariant,
    /// Patch visiting order for msd-gru: raster or serpentine.
    #[arg(long, default_value_t = PatchOrder::Raster)]
    pub order: PatchOrder,
    /// Seed of the first phantom, weight init and shuffling.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Start from this checkpoint instead of a fresh initialisation.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output CTW1 checkpoint (weights plus optimiser state).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-epoch loss CSV; defaults to <output>.loss.csv.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Trained CTW1 checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Expected model kind; a mismatch with the checkpoint is a usage error.
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Override the square patch side of an msd-gru checkpoint.
    #[arg(long)]
    pub patch: Option<usize>,
    /// Seed of the first held-out phantom.
    #[arg(long, default_value_t = 1000)]
    pub seed: u64,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output per-image metrics CSV.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Directory for input | output | target PNG grids.
    #[arg(long)]
    pub png_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Strictly increasing photon counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_INTENSITIES)]
    pub intensities: Vec<f64>,
    /// Number of test phantoms.
    #[arg(long, default_value_t = 10)]
    pub phantoms: usize,
    /// Seed of the first test phantom.
    #[arg(long, default_value_t = 1000)]
    pub phantom_seed: u64,
    /// Noise seed of the first phantom; shared by every intensity.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image size in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Equiangular views over [0, pi).
    #[arg(long, default_value_t = 20)]
    pub angles: usize,
    /// Field of view in world units.
    #[arg(long, default_value_t = DEFAULT_FOV)]
    pub fov: f64,
    /// Random ellipses per phantom.
    #[arg(long, default_value_t = DEFAULT_ELLIPSES)]
    pub ellipses: usize,
    /// SIRT iterations.
    #[arg(long, default_value_t = DEFAULT_SIRT_ITERATIONS)]
    pub sirt_iters: usize,
    /// CGLS iterations; library default when omitted.
    #[arg(long)]
    pub cgls_iters: Option<usize>,
    /// TV-min iterations; library default when omitted.
    #[arg(long)]
    pub tv_iters: Option<usize>,
    /// TV weight.
    #[arg(long = "lambda", default_value_t = DEFAULT_TV_WEIGHT)]
    pub lambda: f64,
    /// Trained msd checkpoint; adds the sirt+msd rows.
    #[arg(long)]
    pub msd: Option<PathBuf>,
    /// Trained msd-gru checkpoint; adds the sirt+msd-gru rows.
    #[arg(long)]
    pub msd_gru: Option<PathBuf>,
    /// Output CSV: method, intensity, metric, mean, std, n.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written next to an earlier output.
    pub manifest: PathBuf,
    /// Re-run into a scratch directory and compare CTT1, CTW1 and CSV
    /// outputs byte for byte with the recorded files instead of overwriting them.
    #[arg(long)]
    pub check: bool,
}

/// An output file and whether replays must reproduce it bit-exactly.
pub struct OutputSlot<'a> {
    pub path: &'a mut PathBuf,
    pub exact: bool,
}

fn absolute(p: &mut PathBuf) -> std::io::Result<()> {
    *p = std::path::absolute(&*p)?;
    Ok(())
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Phantom(_) => "phantom",
            Command::Project(_) => "project",
            Command::Noise(_) => "noise",
            Command::Recon(_) => "recon",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
            Command::Replay(_) => "replay",
        }
    }

    /// Fills defaults that depend on other flags and makes every path absolute.
    pub fn resolve(&mut self) -> std::io::Result<()> {
        match self {
            Command::Train(a) => {
                if a.loss_csv.is_none() {
                    a.loss_csv = Some(with_suffix(&a.output, ".loss.csv"));
                }
                if a.patch.is_none() && a.model == ModelKind::MsdGru {
                    let s = a.data.size;
                    a.patch = Some(if s % 4 == 0 { s / 4 } else { s });
                }
            }
            Command::Recon(a) if a.iters.is_none() && a.method == Method::Sirt => a.iters = Some(DEFAULT_SIRT_ITERATIONS),
            _ => {}
        }
        for p in self.inputs_mut() {
            absolute(p)?;
        }
        for slot in self.outputs_mut() {
            absolute(slot.path)?;
        }
        Ok(())
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Command::Phantom(a) => a.input.iter_mut().collect(),
            Command::Project(a) => vec![&mut a.input],
            Command::Noise(a) => vec![&mut a.input],
            Command::Recon(a) => std::iter::once(&mut a.input).chain(a.reference.iter_mut()).collect(),
            Command::Train(a) => a.init.iter_mut().collect(),
            Command::Eval(a) => vec![&mut a.checkpoint],
            Command::Sweep(a) => a.msd.iter_mut().chain(a.msd_gru.iter_mut()).collect(),
            Command::Replay(a) => vec![&mut a.manifest],
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        self.clone().inputs_mut().into_iter().map(|p| p.clone()).collect()
    }

    /// Output locations; the first one is primary and carries the manifest.
    pub fn outputs_mut(&mut self) -> Vec<OutputSlot<'_>> {
        let exact = |path| OutputSlot { path, exact: true };
        let preview = |path| OutputSlot { path, exact: false };
        match self {
            Command::Phantom(a) => std::iter::once(exact(&mut a.output)).chain(a.png.iter_mut().map(preview)).collect(),
            Command::Project(a) => vec![exact(&mut a.output)],
            Command::Noise(a) => vec![exact(&mut a.output)],
            Command::Recon(a) => std::iter::once(exact(&mut a.output)).chain(a.png.iter_mut().map(preview)).collect(),
            Command::Train(a) => std::iter::once(exact(&mut a.output)).chain(a.loss_csv.iter_mut().map(exact)).collect(),
            Command::Eval(a) => std::iter::once(exact(&mut a.output)).chain(a.png_dir.iter_mut().map(preview)).collect(),
            Command::Sweep(a) => vec![exact(&mut a.output)],
            Command::Replay(_) => Vec::new(),
        }
    }

    pub fn outputs(&self) -> Vec<PathBuf> {
        self.clone().outputs_mut().into_iter().map(|s| s.path.clone()).collect()
    }

    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let mut s = BTreeMap::new();
        let data = |s: &mut BTreeMap<String, u64>, seed: u64, d: &DataArgs| {
            s.insert("phantom_seed".into(), seed);
            if d.intensity.is_some() {
                s.insert("noise_seed".into(), d.noise_seed.unwrap_or(seed));
            }
        };
        match self {
            Command::Phantom(a) if a.kind == PhantomKind::Ellipses => {
                s.insert("seed".into(), a.seed);
            }
            Command::Noise(a) => {
                s.insert("seed".into(), a.seed);
            }
            Command::Train(a) => {
                data(&mut s, a.seed, &a.data);
                s.insert("init_seed".into(), a.seed);
            }
            Command::Eval(a) => data(&mut s, a.seed, &a.data),
            Command::Sweep(a) => {
                s.insert("phantom_seed".into(), a.phantom_seed);
                s.insert("noise_seed".into(), a.seed);
            }
            _ => {}
        }
        s
    }
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("ctstreak").chain(args.iter().copied())).unwrap().command
    }

    #[test]
    fn resolve_fills_derived_defaults() {
        let mut cmd = parse(&["train", "--model", "msd-gru", "--size", "64", "-o", "m.ctw"]);
        cmd.resolve().unwrap();
        let Command::Train(a) = &cmd else { panic!("not train") };
        assert_eq!(a.patch, Some(16));
        assert!(a.loss_csv.as_ref().unwrap().ends_with("m.ctw.loss.csv"));
        assert!(a.output.is_absolute());
        assert_eq!(cmd.outputs().len(), 2);

        let mut cmd = parse(&["train", "-o", "m.ctw"]);
        cmd.resolve().unwrap();
        let Command::Train(a) = &cmd else { panic!("not train") };
        assert_eq!(a.patch, None);
    }

    #[test]
    fn commands_survive_a_json_round_trip() {
        let mut cmd = parse(&["sweep", "--intensities", "1000,5000", "--msd", "m.ctw", "-o", "s.csv"]);
        cmd.resolve().unwrap();
        let back: Command = serde_json::from_str(&serde_json::to_string(&cmd).unwrap()).unwrap();
        assert_eq!(format!("{back:?}"), format!("{cmd:?}"));
        assert_eq!(back.inputs().len(), 1);
    }

    #[test]
    fn seeds_cover_every_random_stream() {
        let cmd = parse(&["eval", "--checkpoint", "m.ctw", "--intensity", "1000", "--noise-seed", "9", "-o", "e.csv"]);
        let seeds = cmd.seeds();
        assert_eq!(seeds["phantom_seed"], 1000);
        assert_eq!(seeds["noise_seed"], 9);
        assert!(parse(&["phantom", "-o", "p.ctt"]).seeds().is_empty());
    }

    #[test]
    fn previews_are_not_bit_exact_outputs() {
        let mut cmd = parse(&["phantom", "-o", "p.ctt", "--png", "p.png"]);
        let exact: Vec<bool> = cmd.outputs_mut().iter().map(|s| s.exact).collect();
        assert_eq!(exact, [true, false]);
    }
}
