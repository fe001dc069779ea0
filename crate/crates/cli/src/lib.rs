//! `bokeh` command line.
//!
//! Exit codes: 0 on success, 1 on a runtime error (one-line diagnostic on
//! stderr), 2 on a usage error.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;

use bokeh_core::dataset::synth::{read_manifest, MANIFEST_FILE};
use bokeh_core::dataset::{self, AssetCatalog, SynthOptions};
use bokeh_core::defocus::{binarize_focus, compute_defocus, export_defocus, DefocusSidecar, DEFAULT_FOCUS_THRESHOLD};
use bokeh_core::degrade::{self, DegradationConfig, Preset};
use bokeh_core::render::{render_scatter, RenderConfig};
use bokeh_core::{io, Lens};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const THREADS_ENV: &str = "BOKEH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bokeh", version, about = "Disparity-driven depth-of-field toolkit")]
pub struct Cli {
    /// Worker threads for rendering and synthesis (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refocus one image with its disparity map.
    Render(RenderArgs),
    /// Synthesise an LQ/HQ bokeh dataset from an asset catalog.
    Synth(SynthArgs),
    /// Build a degraded benchmark from a corpus of HQ images.
    Bench(BenchArgs),
    /// Degrade a single image.
    Degrade(DegradeArgs),
    /// PSNR/SSIM between a prediction and a reference directory.
    Eval(EvalArgs),
    /// Re-check every sample of a synthesised dataset.
    Verify(VerifyArgs),
    /// Write a small procedural asset catalog.
    DemoAssets(DemoAssetsArgs),
    /// Run the refocus HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Standard,
    Benchmark,
    Identity,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Standard => Preset::Standard,
            PresetArg::Benchmark => Preset::Benchmark,
            PresetArg::Identity => Preset::Identity,
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Greyscale PNG; 16-bit codes map to v/65535.
    #[arg(long)]
    pub disparity: PathBuf,
    /// Blur intensity: pixels of radius per unit disparity gap.
    #[arg(long)]
    pub k: f32,
    /// Focal disparity in [0,1].
    #[arg(long, conflicts_with_all = ["focus_x", "focus_y"], required_unless_present_all = ["focus_x", "focus_y"])]
    pub df: Option<f32>,
    /// Focus on the disparity under this pixel instead of giving --df.
    #[arg(long, requires = "focus_y")]
    pub focus_x: Option<usize>,
    #[arg(long, requires = "focus_x")]
    pub focus_y: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the defocus map (16-bit PNG plus JSON sidecar).
    #[arg(long)]
    pub defocus_out: Option<PathBuf>,
    /// Also write the binary focus mask.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub assets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Canvas size, `N` or `WxH`.
    #[arg(long, default_value = "128", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, value_enum, default_value = "standard")]
    pub preset: PresetArg,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "benchmark")]
    pub preset: PresetArg,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "standard")]
    pub preset: PresetArg,
    /// Write the sampled degradation trace as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Benchmark manifest restricting and ordering the evaluated ids.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Per-image metrics CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Summary JSON file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Print the summary as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoAssetsArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub backgrounds: usize,
    #[arg(long, default_value_t = 6)]
    pub foregrounds: usize,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
    let dims = match s.split_once(['x', 'X']) {
        Some((w, h)) => parse(w).zip(parse(h)),
        None => parse(s).map(|n| (n, n)),
    };
    dims.ok_or_else(|| format!("expected N or WxH with positive integers, got {s:?}"))
}

type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

fn load_lens_focus(args: &RenderArgs, disparity: &bokeh_core::Disparity) -> CliResult<f32> {
    match (args.df, args.focus_x, args.focus_y) {
        (Some(df), _, _) => Ok(df),
        (None, Some(x), Some(y)) => {
            let (w, h) = disparity.dims();
            if x >= w || y >= h {
                return Err(format!("focus point ({x}, {y}) lies outside the {w}x{h} disparity map").into());
            }
            Ok(disparity.get(x, y).clamp(0.0, 1.0))
        }
        _ => Err("give --df or both --focus-x and --focus-y".into()),
    }
}

fn render(args: &RenderArgs) -> CliResult<()> {
    let image = io::load_linear::<f32>(&args.image)?;
    let disparity = io::load_field::<f32>(&args.disparity)?;
    if image.dims() != disparity.dims() {
        return Err(format!("image is {:?} but disparity is {:?}", image.dims(), disparity.dims()).into());
    }
    let lens = Lens::new(args.k, load_lens_focus(args, &disparity)?)?;
    let defocus = compute_defocus(&disparity, &lens)?.into_inner();
    let out = render_scatter(&image, &defocus, &RenderConfig::for_lens(&lens))?;
    io::save_linear_png(&out, &args.out)?;
    if let Some(p) = &args.defocus_out {
        export_defocus(&defocus, &DefocusSidecar::for_lens(&lens, DEFAULT_FOCUS_THRESHOLD), p)?;
    }
    if let Some(p) = &args.mask_out {
        std::fs::write(p, binarize_focus(&defocus, DEFAULT_FOCUS_THRESHOLD).encode_png()?)?;
    }
    println!(
        "rendered {} (k={}, df={})",
        args.out.display(),
        lens.blur_intensity,
        lens.focal_disparity
    );
    Ok(())
}

fn synth(args: &SynthArgs) -> CliResult<()> {
    let catalog = AssetCatalog::load(&args.assets)?;
    let opts = SynthOptions {
        count: args.count,
        root_seed: args.seed,
        canvas: args.size,
        preset: args.preset.into(),
    };
    let records = dataset::synthesize_dataset(&catalog, &args.out, &opts)?;
    println!("wrote {} samples to {}", records.len(), args.out.display());
    Ok(())
}

fn bench(args: &BenchArgs) -> CliResult<()> {
    let cfg = DegradationConfig::preset(args.preset.into(), args.seed);
    let entries = dataset::build_benchmark(&args.corpus, &args.out, &cfg)?;
    println!("wrote {} LQ/HQ pairs to {}", entries.len(), args.out.display());
    Ok(())
}

fn degrade_one(args: &DegradeArgs) -> CliResult<()> {
    let hq = io::load_linear::<f32>(&args.input)?;
    let cfg = DegradationConfig::preset(args.preset.into(), args.seed);
    let (lq, trace) = degrade::degrade(&hq, &cfg)?;
    io::save_linear_png(&lq, &args.out)?;
    if let Some(p) = &args.trace {
        std::fs::write(p, serde_json::to_vec_pretty(&trace)?)?;
    }
    println!("degraded {} -> {}", args.input.display(), args.out.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> CliResult<()> {
    let report = dataset::evaluate_dirs(&args.pred, &args.reference, args.manifest.as_deref())?;
    if let Some(p) = &args.csv {
        std::fs::write(p, report.to_csv()?)?;
    }
    let summary = serde_json::to_string_pretty(&report.summary)?;
    if let Some(p) = &args.summary {
        std::fs::write(p, &summary)?;
    }
    if args.json {
        println!("{summary}");
    } else {
        let s = &report.summary;
        println!(
            "{} images: PSNR {:.4} dB, SSIM {:.6}",
            s.count, s.mean_psnr, s.mean_ssim
        );
    }
    Ok(())
}

fn verify(args: &VerifyArgs) -> CliResult<()> {
    let (_, records) = read_manifest(&args.dataset.join(MANIFEST_FILE))?;
    let failed: Vec<&str> = records
        .iter()
        .map(|r| dataset::verify_sample(&args.dataset, r).map(|c| (r.id.as_str(), c.ok())))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter_map(|(id, ok)| (!ok).then_some(id))
        .collect();
    if !failed.is_empty() {
        return Err(format!(
            "{} of {} samples failed: {}",
            failed.len(),
            records.len(),
            failed.join(", ")
        )
        .into());
    }
    println!("{} samples verified", records.len());
    Ok(())
}

fn demo_assets(args: &DemoAssetsArgs) -> CliResult<()> {
    dataset::write_procedural_catalog(&args.out, args.backgrounds, args.foregrounds, args.size, args.seed)?;
    println!("wrote asset catalog to {}", args.out.display());
    Ok(())
}

fn serve(args: &ServeArgs) -> CliResult<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(bokeh_service::serve(args.addr))?;
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Render(a) => render(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
        Command::Degrade(a) => degrade_one(a),
        Command::Eval(a) => eval(a),
        Command::Verify(a) => verify(a),
        Command::DemoAssets(a) => demo_assets(a),
        Command::Serve(a) => serve(a),
    }
}

/// Runs one command inside a pool of `threads` workers.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    pool.build()?.install(|| dispatch(cli))
}

/// Parses `argv` and runs it; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
