use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwp::imageio::{degrade, load_image, load_mask, make_random_mask, save_image, save_mask, MaskSource, RunConfig};
use qwp::inpaint::inpaint;
use qwp::metrics::{psnr, QualityReport};
use qwp::transform1d::{write_waveforms_csv, WaveformKind};
use qwp::transform2d::{directional_waveform_2d, gallery_image, log_spectrum, qwp_forward_2d, qwp_inverse_2d};
use qwp::{Error, FilterBank, Image, MaskedImage, Method, Sign};

#[derive(Parser)]
#[command(name = "qwp", version, about = "Quasi-analytic spline wavelet packets and image inpainting")]
struct Cli {
    /// Log progress (iterations, schedule) to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill in missing pixels of a degraded image.
    Inpaint(InpaintArgs),
    /// Synthesize a random mask and noisy masked image from a clean one.
    Degrade(DegradeArgs),
    /// Print PSNR and SSIM of two images.
    Metrics { reference: PathBuf, test: PathBuf },
    /// Export directional waveforms, their spectra and 1D waveform tables.
    Waveforms(WaveformArgs),
    /// Forward and inverse 2D transform of an image; prints the PSNR per level.
    Roundtrip {
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = 4)]
        max_level: usize,
    },
}

#[derive(Args)]
struct InpaintArgs {
    /// Degraded input image (with --mask), or clean image to degrade (with --rho).
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    /// Run configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    /// Noise level of the data.
    #[arg(long)]
    sigma: Option<f64>,
    /// Mask image: nonzero pixels are observed.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Use a random mask with this fraction of missing pixels; the input is
    /// then masked and noised with --sigma before inpainting.
    #[arg(long, conflicts_with = "mask")]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    order: Option<usize>,
    /// Comma-separated consecutive fusion levels.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    parent_level: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    #[arg(long)]
    margin: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    r1: Option<usize>,
    #[arg(long)]
    r2: Option<usize>,
    #[arg(long)]
    tol1: Option<f64>,
    #[arg(long)]
    tol2: Option<f64>,
    #[arg(long)]
    l1: Option<usize>,
    #[arg(long)]
    l2: Option<usize>,
    #[arg(long)]
    l3: Option<usize>,
    #[arg(long)]
    normalized_delta: bool,
    #[arg(long)]
    cg: bool,
    /// Clean image; when given, quality of input and output is printed.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write the effective configuration here.
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Args)]
struct DegradeArgs {
    clean: PathBuf,
    output: PathBuf,
    mask_output: PathBuf,
    /// Fraction of missing pixels.
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct WaveformArgs {
    out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 2)]
    level: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Config(_) => 4,
        Error::Format(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose { "info" } else { "warn" }))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Inpaint(a) => run_inpaint(a),
        Command::Degrade(a) => run_degrade(a),
        Command::Metrics { reference, test } => run_metrics(&reference, &test),
        Command::Waveforms(a) => run_waveforms(a),
        Command::Roundtrip { input, order, max_level } => run_roundtrip(&input, order, max_level),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qwp: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn effective_config(a: &InpaintArgs) -> qwp::Result<RunConfig> {
    let mut rc = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident).+ <- $value:expr) => {
            if let Some(v) = $value.clone() {
                rc.$($field).+ = v;
            }
        };
    }
    if a.input.is_some() {
        rc.input = a.input.clone();
    }
    if a.output.is_some() {
        rc.output = a.output.clone();
    }
    if a.mask.is_some() {
        rc.mask = a.mask.clone();
        rc.rho_missing = None;
    }
    if a.rho.is_some() {
        rc.rho_missing = a.rho;
        rc.mask = None;
    }
    set!(method <- a.method);
    set!(sigma <- a.sigma);
    set!(seed <- a.seed);
    let c = &mut rc.inpaint;
    if let Some(levels) = &a.levels {
        // Keep the dependent settings consistent unless they are given too.
        c.parent_level = levels.last().map_or(0, |m| m + 1);
        if a.weights.is_none() {
            c.weights = vec![1.0; levels.len()];
        }
        if a.windows.is_none() && c.windows.len() != levels.len() {
            c.windows = vec![2; levels.len()];
        }
        c.levels = levels.clone();
    }
    set!(inpaint.order <- a.order);
    set!(inpaint.parent_level <- a.parent_level);
    set!(inpaint.weights <- a.weights);
    set!(inpaint.windows <- a.windows);
    set!(inpaint.mu <- a.mu);
    set!(inpaint.r1 <- a.r1);
    set!(inpaint.r2 <- a.r2);
    set!(inpaint.tol1 <- a.tol1);
    set!(inpaint.tol2 <- a.tol2);
    set!(inpaint.l1 <- a.l1);
    set!(inpaint.l2 <- a.l2);
    set!(inpaint.l3 <- a.l3);
    if a.margin.is_some() {
        rc.inpaint.margin = a.margin;
    }
    rc.inpaint.normalized_delta |= a.normalized_delta;
    rc.inpaint.use_cg |= a.cg;
    rc.inpaint.validate()?;
    Ok(rc)
}

fn run_inpaint(a: InpaintArgs) -> qwp::Result<()> {
    let rc = effective_config(&a)?;
    if let Some(p) = &a.save_config {
        rc.save(p)?;
    }
    let input = rc.input.clone().ok_or_else(|| Error::Config("no input image given".into()))?;
    let output = rc.output.clone().ok_or_else(|| Error::Config("no output image given".into()))?;
    let image = load_image(&input)?;
    let (degraded, mask) = match rc.mask_source() {
        Some(MaskSource::File(p)) => (image, load_mask(p)?),
        Some(MaskSource::Random { rho_missing }) => {
            let (r, c) = image.dim();
            if r != c {
                return Err(Error::Config(format!("random masks need a square image, got {r}x{c}")));
            }
            let mask = make_random_mask(r, rho_missing, rc.seed)?;
            (degrade(&image, &mask, rc.sigma, rc.seed)?, mask)
        }
        None => return Err(Error::Config("no mask given: use --mask or --rho".into())),
    };
    let mi = MaskedImage::new(degraded, mask, rc.sigma)?;
    let fb = rc.inpaint.filter_bank_for(&mi)?;
    log::info!("method={} side={} levels={:?}", rc.method, fb.len, rc.inpaint.levels);
    let out = inpaint(rc.method, &mi, &rc.inpaint, &fb)?;
    log::info!("stopped after {} steps (bound {})", out.steps, out.step_bound);
    save_image(&out.image, &output)?;
    if let Some(r) = &a.reference {
        let clean = load_image(r)?;
        println!("input {}", QualityReport::compute(&clean, &mi.degraded)?);
        println!("output {}", QualityReport::compute(&clean, &out.image)?);
    }
    Ok(())
}

fn run_degrade(a: DegradeArgs) -> qwp::Result<()> {
    let clean = load_image(&a.clean)?;
    let (r, c) = clean.dim();
    if r != c {
        return Err(Error::InvalidParameter(format!("random masks need a square image, got {r}x{c}")));
    }
    let mask = make_random_mask(r, a.rho, a.seed)?;
    save_image(&degrade(&clean, &mask, a.sigma, a.seed)?, &a.output)?;
    save_mask(&mask, &a.mask_output)
}

fn run_metrics(reference: &Path, test: &Path) -> qwp::Result<()> {
    println!("{}", QualityReport::compute(&load_image(reference)?, &load_image(test)?)?);
    Ok(())
}

/// Move the origin to the middle so a waveform centred at pixel 0 is
/// displayed in one piece.
fn centred(values: &Image) -> Image {
    let n = values.nrows();
    let h = n / 2;
    Image::from_shape_fn((n, n), |(a, b)| values[[(a + h) % n, (b + h) % n]])
}

fn run_waveforms(a: WaveformArgs) -> qwp::Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path: path.clone(), source }
    };
    fs::create_dir_all(&a.out_dir).map_err(io(&a.out_dir))?;
    let fb = FilterBank::new(a.order, a.size, a.level)?;
    let side = 1usize << a.level;
    for sign in Sign::BOTH {
        let tag = match sign {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        };
        // All blocks of one tree tiled into a single picture, block (j, l) at
        // tile row j and tile column l.
        let n = a.size;
        let mut tiles = Image::zeros((side * n, side * n));
        let mut spectra = Image::zeros((side * n, side * n));
        for j in 0..side {
            for l in 0..side {
                let w = directional_waveform_2d(&fb, a.level, j, l, sign)?;
                let pic = gallery_image(&centred(&w.values));
                let spec = gallery_image(&log_spectrum(&w));
                for ((r, c), v) in pic.indexed_iter() {
                    tiles[[j * n + r, l * n + c]] = *v;
                    spectra[[j * n + r, l * n + c]] = spec[[r, c]];
                }
            }
        }
        save_image(&tiles, a.out_dir.join(format!("theta_{tag}.pgm")))?;
        save_image(&spectra, a.out_dir.join(format!("spectrum_{tag}.pgm")))?;
    }
    for (name, kind) in [
        ("psi", WaveformKind::Psi),
        ("phi", WaveformKind::Phi),
        ("qplus", WaveformKind::QPlus),
        ("qminus", WaveformKind::QMinus),
    ] {
        let path = a.out_dir.join(format!("waveforms1d_{name}.csv"));
        let file = File::create(&path).map_err(io(&path))?;
        write_waveforms_csv(&fb, a.level, kind, BufWriter::new(file))?;
    }
    Ok(())
}

fn run_roundtrip(input: &Path, order: usize, max_level: usize) -> qwp::Result<()> {
    let img = load_image(input)?;
    let (r, c) = img.dim();
    if r != c {
        return Err(Error::InvalidParameter(format!("roundtrip needs a square image, got {r}x{c}")));
    }
    let fb = FilterBank::new(order, r, max_level)?;
    for m in 1..=max_level {
        let back = qwp_inverse_2d(&qwp_forward_2d(&img, &fb, m)?, &fb)?;
        println!("level={m} psnr={:.4}", psnr(&img, &back)?);
    }
    Ok(())
}
