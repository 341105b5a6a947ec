use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use raman_denoise::airpls::AirplsConfig;
use raman_denoise::bench::{denoise_with_method, run_bench, DenoiseSettings, Method};
use raman_denoise::cnn::{
    load_checkpoint, save_checkpoint, train_with, NetworkConfig, Topology, TrainHyper,
};
use raman_denoise::metrics::evaluate;
use raman_denoise::synth::{build_dataset, parse_snr_grid, GeneratorConfig};
use raman_denoise::wavelet::{Extension, ThresholdMode, WaveletName, WaveletSpec};
use raman_denoise::{read_dataset, write_dataset, Dataset, Error, Spectrum};

#[derive(Parser)]
#[command(
    name = "raman-denoise",
    version,
    about = "Raman spectrum denoising toolkit"
)]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test datasets of synthetic spectra.
    Gen(GenArgs),
    /// Train a denoising network on a training dataset.
    Train(TrainArgs),
    /// Baseline-correct and denoise one spectrum CSV.
    Denoise(DenoiseArgs),
    /// Score a denoised spectrum against a clean one.
    Eval(EvalArgs),
    /// Run all methods over a test dataset.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML generator config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 50)]
    n_test: usize,
    /// Single target SNR in dB.
    #[arg(long, conflicts_with = "snr_grid")]
    snr: Option<f64>,
    /// `start:stop:step` or a comma list of target SNRs.
    #[arg(long)]
    snr_grid: Option<String>,
    #[arg(long)]
    length: Option<usize>,
}

#[derive(Args)]
struct AirplsArgs {
    #[arg(long, default_value_t = 1e5)]
    airpls_lambda: f64,
    #[arg(long, default_value_t = 15)]
    airpls_max_iter: usize,
}

impl AirplsArgs {
    fn config(&self) -> AirplsConfig {
        AirplsConfig {
            lambda: self.airpls_lambda,
            max_iter: self.airpls_max_iter,
            ..AirplsConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset written by `gen`.
    data: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long, default_value = "parallel")]
    topology: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Randomly roll training pairs each epoch (preset decides by default).
    #[arg(long)]
    shift_augment: Option<bool>,
    /// Checkpoint destination (default: <out>/model.rsdn).
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[command(flatten)]
    airpls: AirplsArgs,
}

#[derive(Args)]
struct WaveletArgs {
    #[arg(long, default_value = "sym4")]
    wavelet: String,
    #[arg(long, default_value = "symmetric")]
    extension: String,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value = "soft")]
    mode: String,
    #[arg(long, default_value_t = 0.05)]
    fdr_q: f64,
}

impl WaveletArgs {
    fn settings(&self) -> Result<DenoiseSettings, Error> {
        let name: WaveletName = self.wavelet.parse()?;
        let ext: Extension = self.extension.parse()?;
        let mode: ThresholdMode = self.mode.parse()?;
        Ok(DenoiseSettings {
            wavelet: WaveletSpec::new(name, ext)?,
            levels: self.levels,
            mode,
            fdr_q: self.fdr_q,
            ..DenoiseSettings::default()
        })
    }
}

#[derive(Args)]
struct DenoiseArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, default_value = "ebayes")]
    method: String,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[command(flatten)]
    wavelet: WaveletArgs,
    #[command(flatten)]
    airpls: AirplsArgs,
}

#[derive(Args)]
struct EvalArgs {
    clean: PathBuf,
    denoised: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Test dataset written by `gen`.
    test: PathBuf,
    /// Comma-separated methods, or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
    /// Checkpoint of the parallel network (method `dl`).
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Checkpoint of the serial network (method `cnn_serial`).
    #[arg(long)]
    serial_ckpt: Option<PathBuf>,
    /// Test pair whose curves are written to the overlay CSV.
    #[arg(long, default_value_t = 0)]
    overlay_index: usize,
    #[command(flatten)]
    wavelet: WaveletArgs,
    #[command(flatten)]
    airpls: AirplsArgs,
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn load_dataset(path: &Path) -> Result<Dataset, Error> {
    let f = fs::File::open(path).map_err(|e| io_error(path, e))?;
    read_dataset(BufReader::new(f))
}

fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), Error> {
    let mut buf = Vec::new();
    write_dataset(ds, BufWriter::new(&mut buf))?;
    write_file(path, &buf)
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<(), Error> {
    let mut cfg = match &args.config {
        Some(p) => GeneratorConfig::from_config_str(&read_text(p)?)?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(len) = args.length {
        cfg.length = len;
    }
    if let Some(snr) = args.snr {
        cfg.snr_grid_db = vec![snr];
    }
    if let Some(grid) = &args.snr_grid {
        cfg.snr_grid_db = parse_snr_grid(grid)?;
    }
    let (train, test) = build_dataset(&cfg, args.n_train, args.n_test)?;
    save_dataset(&train, &cli.out.join("train.jsonl"))?;
    save_dataset(&test, &cli.out.join("test.jsonl"))?;
    write_file(
        &cli.out.join("generator.toml"),
        cfg.to_canonical_string().as_bytes(),
    )?;
    println!("train {}", train.len());
    println!("test {}", test.len());
    println!("digest {}", cfg.digest());
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<(), Error> {
    let ds = load_dataset(&args.data)?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut config, mut hyper) = match args.preset {
        Preset::Desk => (NetworkConfig::desk(ds.length()), TrainHyper::desk()),
        Preset::Paper => (NetworkConfig::paper(ds.length()), TrainHyper::paper()),
    };
    config.topology = args.topology.parse::<Topology>()?;
    if let Some(seed) = cli.seed {
        hyper.seed = seed;
    }
    if let Some(e) = args.epochs {
        hyper.epochs = e;
    }
    if let Some(b) = args.batch_size {
        hyper.batch_size = b;
    }
    if let Some(lr) = args.lr {
        hyper.learning_rate = lr;
    }
    if let Some(shift) = args.shift_augment {
        hyper.shift_augment = shift;
    }
    if cli.verbose {
        eprintln!("network {config:?}");
        eprintln!("hyper {hyper:?}");
    }
    let airpls = args.airpls.config();
    airpls.validate()?;
    let mut inputs = Vec::with_capacity(ds.len());
    let mut targets = Vec::with_capacity(ds.len());
    for pair in ds.pairs() {
        inputs.push(raman_denoise::airpls::correct(&pair.noisy, &airpls)?.into_values());
        targets.push(pair.clean.values().to_vec());
    }
    let verbose = cli.verbose;
    let ckpt = train_with(config, &inputs, &targets, &hyper, |epoch, loss| {
        if verbose {
            eprintln!("epoch {epoch} loss {loss}");
        }
    })?;
    let path = args
        .ckpt
        .clone()
        .unwrap_or_else(|| cli.out.join("model.rsdn"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    save_checkpoint(&ckpt, &path)?;
    let mut history = String::from("epoch,loss\n");
    for (i, l) in ckpt.history.iter().enumerate() {
        history.push_str(&format!("{i},{l}\n"));
    }
    write_file(&path.with_extension("loss.csv"), history.as_bytes())?;
    let c = ckpt.config();
    println!(
        "topology={} depth={} filters={} kernel={} epochs={} batch={} lr={}",
        c.topology.as_str(),
        c.branch_depth,
        c.filters_per_layer,
        c.kernel_len,
        hyper.epochs,
        hyper.batch_size,
        hyper.learning_rate
    );
    println!(
        "final_loss {}",
        ckpt.history.last().copied().unwrap_or(f64::NAN)
    );
    println!("checkpoint {}", path.display());
    Ok(())
}

fn cmd_denoise(args: &DenoiseArgs) -> Result<(), Error> {
    let method: Method = args.method.parse()?;
    let mut settings = args.wavelet.settings()?;
    if method.is_neural() {
        let path = args
            .ckpt
            .as_ref()
            .ok_or_else(|| Error::MissingCheckpoint(method.as_str().into()))?;
        let ckpt = Some(load_checkpoint(path)?);
        match method {
            Method::Dl => settings.dl = ckpt,
            _ => settings.cnn_serial = ckpt,
        }
    }
    let input = Spectrum::from_csv(&read_text(&args.input)?)?;
    let airpls = args.airpls.config();
    airpls.validate()?;
    let corrected = raman_denoise::airpls::correct(&input, &airpls)?;
    let mut out = denoise_with_method(method, &corrected, &settings)?;
    if let Some(axis) = input.axis() {
        out = out.with_axis(axis);
    }
    write_file(&args.output, out.to_csv().as_bytes())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Error> {
    let clean = Spectrum::from_csv(&read_text(&args.clean)?)?;
    let denoised = Spectrum::from_csv(&read_text(&args.denoised)?)?;
    let r = evaluate(clean.values(), denoised.values())?;
    println!("{},{},{}", r.snr_db, r.rmse, r.mape_pct);
    Ok(())
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<(), Error> {
    let methods = Method::parse_list(&args.methods)?;
    let mut settings = args.wavelet.settings()?;
    if let Some(p) = &args.ckpt {
        settings.dl = Some(load_checkpoint(p)?);
    }
    if let Some(p) = &args.serial_ckpt {
        settings.cnn_serial = Some(load_checkpoint(p)?);
    }
    settings.check_methods(&methods)?;
    let test = load_dataset(&args.test)?;
    let airpls = args.airpls.config();
    airpls.validate()?;
    let report = run_bench(&test, &methods, &airpls, &settings, args.overlay_index)?;
    let table = report.table_csv();
    write_file(&cli.out.join("bench_table.csv"), table.as_bytes())?;
    write_file(
        &cli.out.join("bench_per_spectrum.csv"),
        report.per_spectrum_csv().as_bytes(),
    )?;
    write_file(
        &cli.out.join("bench_overlay.csv"),
        report.overlay_csv().as_bytes(),
    )?;
    print!("{table}");
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(&cli, a),
    };
    match result {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
