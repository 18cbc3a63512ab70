mod output;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spinsense::analysis::SensorSpec;
use spinsense::engine::{Experiment, Metadata, ReadoutConfig, SequenceSource, Sweep, SweepVariable, DEFAULT_REALIZATIONS};
use spinsense::noise::{model_from_toml, model_to_toml};
use spinsense::units::{parse_angular, parse_field, parse_frequency, parse_gyromagnetic, parse_time};
use spinsense::{format_sequence, parse_sequence, PulseSequence, SequenceFamily, SignalModel};

use run::{Document, OdmrConfig, RunConfig, SenseConfig, SpectrumConfig};

#[derive(Parser)]
#[command(name = "spinsense", version, about = "Single-qubit quantum sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Population against free-evolution time or detuning.
    Fringes(SweepArgs),
    /// Coherence C = 2p - 1 against the sequence time parameter.
    Decay(SweepArgs),
    /// Noise spectrum reconstructed from a CPMG coherence sweep.
    Spectrum(SpectrumArgs),
    /// Ramsey field estimate and sensitivity report.
    Sense(SenseArgs),
    /// Continuous-wave ODMR fluorescence spectrum.
    Odmr(OdmrArgs),
    /// Check input files without running anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SequenceArgs {
    /// Pulse-sequence file.
    #[arg(long, value_name = "FILE", conflicts_with = "builder")]
    seq: Option<PathBuf>,
    /// Sequence family: ramsey, hahn, cpmg, uhrig (a count may be appended, e.g. cpmg8).
    #[arg(long, value_name = "NAME")]
    builder: Option<String>,
    /// Builder parameter: tau=<time> (also t, time) or n=<pulses>.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Args)]
struct NoiseArgs {
    /// Signal and noise model (TOML).
    #[arg(long, value_name = "FILE")]
    noise: Option<PathBuf>,
    /// Constant detuning added to the model, e.g. 1MHz.
    #[arg(long, value_name = "VALUE", allow_hyphen_values = true)]
    detuning: Option<String>,
    /// Noise realizations per point.
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    realizations: usize,
}

#[derive(Args)]
struct ReadoutArgs {
    /// Repetitions M per point.
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    /// Independent sensors N.
    #[arg(long, default_value_t = 1)]
    sensors: u64,
    /// Repetitions per ideal projective readout.
    #[arg(long, default_value_t = 1.0)]
    m0: f64,
    /// Readout contrast.
    #[arg(long, default_value_t = 1.0)]
    contrast: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Re-run the configuration stored in a result JSON file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sequence: SequenceArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// var=start:stop:count[:log] with var one of tau, detuning, n.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    sweep: Option<String>,
    /// Sampling step for colored noise, e.g. 10ns.
    #[arg(long, value_name = "TIME")]
    dt: Option<String>,
    #[command(flatten)]
    readout: ReadoutArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SpectrumArgs {
    /// CPMG pulse count.
    #[arg(short = 'n', long, default_value_t = 8)]
    pulses: u32,
    #[command(flatten)]
    noise: NoiseArgs,
    /// tau=start:stop:count[:log].
    #[arg(long, value_name = "SPEC")]
    sweep: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SensorArgs {
    /// Gyromagnetic ratio.
    #[arg(long, default_value = "30MHz/mT")]
    gamma: String,
    /// Zero-field resonance frequency.
    #[arg(long, default_value = "2.87GHz")]
    omega0: String,
    #[arg(long = "t2star", default_value = "1us")]
    t2_star: String,
    #[arg(long, default_value = "300us")]
    t2: String,
    #[arg(long, default_value = "6ms")]
    t1: String,
}

#[derive(Args)]
struct SenseArgs {
    /// True field, e.g. 2nT.
    #[arg(long, allow_hyphen_values = true)]
    field: Option<String>,
    /// Ramsey free-evolution time (defaults to T2*).
    #[arg(long)]
    tau: Option<String>,
    /// Independent field measurements.
    #[arg(long, default_value_t = 1)]
    trials: u32,
    /// Total averaging time for the sensitivity report.
    #[arg(long, default_value = "1s")]
    averaging_time: String,
    #[command(flatten)]
    sensor: SensorArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    readout: ReadoutArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OdmrArgs {
    #[arg(long, default_value = "0T", allow_hyphen_values = true)]
    field: String,
    #[arg(long, default_value = "2.82GHz")]
    start: String,
    #[arg(long, default_value = "2.92GHz")]
    stop: String,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Lorentzian half-width.
    #[arg(long, default_value = "5MHz")]
    linewidth: String,
    /// Fluorescence dip depth.
    #[arg(long, default_value_t = 0.3)]
    contrast: f64,
    #[command(flatten)]
    sensor: SensorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    sequence: SequenceArgs,
    #[arg(long, value_name = "FILE")]
    noise: Option<PathBuf>,
    /// Result JSON file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

fn read(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))
}

fn load_sequence(path: &Path) -> Result<PulseSequence> {
    let text = read(path, "sequence file")?;
    parse_sequence(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn load_model(path: &Path) -> Result<SignalModel> {
    let text = read(path, "noise file")?;
    model_from_toml(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn build_model(args: &NoiseArgs) -> Result<SignalModel> {
    let noise = args.noise.as_deref().map(load_model).transpose()?;
    let constant = args
        .detuning
        .as_deref()
        .map(|d| parse_angular(d).map(|detuning| SignalModel::Constant { detuning }))
        .transpose()?;
    Ok(match (noise, constant) {
        (Some(n), Some(c)) => SignalModel::Composite { components: vec![n, c] },
        (Some(m), None) | (None, Some(m)) => m,
        (None, None) => SignalModel::Constant { detuning: 0.0 },
    })
}

/// Family plus the optional time parameter from `--param`.
fn builder_family(name: &str, params: &[String]) -> Result<(SequenceFamily, Option<f64>)> {
    let mut family = SequenceFamily::from_name(name)?;
    let mut time = None;
    for param in params {
        let (key, value) = param
            .split_once('=')
            .ok_or_else(|| anyhow!("builder parameter '{param}' is not of the form K=V"))?;
        match key.trim().to_ascii_lowercase().as_str() {
            "tau" | "t" | "time" => time = Some(parse_time(value)?),
            "n" | "pulses" => {
                let n: u32 = value
                    .trim()
                    .parse()
                    .map_err(|_| anyhow!("pulse count '{value}' is not a positive integer"))?;
                family = family.with_pulses(n)?;
            }
            other => bail!("unknown builder parameter '{other}' (use tau or n)"),
        }
    }
    Ok((family, time))
}

fn sequence_source(args: &SequenceArgs, sweep: &Sweep) -> Result<SequenceSource> {
    match (&args.seq, &args.builder) {
        (Some(path), None) => {
            if !args.params.is_empty() {
                bail!("--param only applies to --builder");
            }
            Ok(SequenceSource::Explicit {
                sequence: load_sequence(path)?,
            })
        }
        (None, Some(name)) => {
            let (family, time) = builder_family(name, &args.params)?;
            let time = match (time, sweep.variable) {
                (Some(t), _) => t,
                (None, SweepVariable::Time) => sweep.values[0],
                (None, _) => bail!("--builder {name} needs --param tau=<time> when the sweep is not over time"),
            };
            Ok(SequenceSource::Builder { family, time })
        }
        _ => bail!("give exactly one sequence source: --seq FILE or --builder NAME"),
    }
}

fn readout(args: &ReadoutArgs) -> ReadoutConfig {
    ReadoutConfig {
        repetitions: args.reps,
        sensors: args.sensors,
        m0: args.m0,
        contrast: args.contrast,
        seed: args.seed,
    }
}

fn sensor(args: &SensorArgs, sensors: u64) -> Result<SensorSpec> {
    Ok(SensorSpec {
        gyromagnetic: parse_gyromagnetic(&args.gamma)?,
        omega0: parse_angular(&args.omega0)?,
        t2_star: parse_time(&args.t2_star)?,
        t2: parse_time(&args.t2)?,
        t1: parse_time(&args.t1)?,
        sensors,
    })
}

fn required<'a>(value: &'a Option<String>, flag: &str) -> Result<&'a str> {
    value.as_deref().ok_or_else(|| anyhow!("{flag} is required unless --config is given"))
}

fn sweep_config(args: &SweepArgs, decay: bool) -> Result<RunConfig> {
    let sweep = Sweep::parse(required(&args.sweep, "--sweep")?)?;
    let sequence = sequence_source(&args.sequence, &sweep)?;
    let mut experiment = Experiment::new(sequence, build_model(&args.noise)?, sweep, readout(&args.readout));
    experiment.realizations = args.noise.realizations;
    experiment.time_step = args.dt.as_deref().map(parse_time).transpose()?;
    Ok(if decay {
        RunConfig::Decay { experiment }
    } else {
        RunConfig::Fringes { experiment }
    })
}

fn spectrum_config(args: &SpectrumArgs) -> Result<RunConfig> {
    let sweep = Sweep::parse(required(&args.sweep, "--sweep")?)?;
    if sweep.variable != SweepVariable::Time {
        bail!("spectrum sweeps run over tau");
    }
    Ok(RunConfig::Spectrum(SpectrumConfig {
        pulses: args.pulses,
        taus: sweep.values,
        model: build_model(&args.noise)?,
        realizations: args.noise.realizations,
        seed: args.seed,
    }))
}

fn sense_config(args: &SenseArgs) -> Result<RunConfig> {
    let spec = sensor(&args.sensor, args.readout.sensors)?;
    let tau = match &args.tau {
        Some(t) => parse_time(t)?,
        None => spec.t2_star,
    };
    Ok(RunConfig::Sense(SenseConfig {
        field: parse_field(required(&args.field, "--field")?)?,
        tau,
        model: build_model(&args.noise)?,
        readout: readout(&args.readout),
        realizations: args.noise.realizations,
        trials: args.trials,
        averaging_time: parse_time(&args.averaging_time)?,
        spec,
    }))
}

fn odmr_config(args: &OdmrArgs) -> Result<RunConfig> {
    Ok(RunConfig::Odmr(OdmrConfig {
        spec: sensor(&args.sensor, 1)?,
        field: parse_field(&args.field)?,
        start: parse_frequency(&args.start)?,
        stop: parse_frequency(&args.stop)?,
        points: args.points,
        linewidth: parse_angular(&args.linewidth)?,
        contrast: args.contrast,
    }))
}

fn from_result_file(path: &Path, command: &str) -> Result<RunConfig> {
    let doc = run::parse_document(&read(path, "result file")?).with_context(|| path.display().to_string())?;
    if doc.config.command() != command {
        bail!(
            "{} holds a '{}' run, not '{command}'",
            path.display(),
            doc.config.command()
        );
    }
    Ok(doc.config)
}

fn execute(config: RunConfig, output: &OutputArgs) -> Result<()> {
    let command = config.command();
    config.validate()?;
    output::prepare_dir(&output.out)?;
    let mut registry = output::load_registry(&output.out)?;
    let outputs = config.execute()?;

    let fingerprint = config.fingerprint();
    let seed_reuse = config.seed().and_then(|seed| registry.check(seed, &fingerprint));
    if let Some(warning) = &seed_reuse {
        eprintln!("warning: {warning}");
    }
    let doc = Document {
        metadata: Metadata {
            seed: config.seed().unwrap_or(0),
            config_fingerprint: fingerprint,
            realizations_used: outputs.realizations_used,
            generator: format!("spinsense {}", env!("CARGO_PKG_VERSION")),
            seed_reuse,
        },
        config,
        result: outputs.result,
    };

    let mut files = Vec::new();
    if output.format != Format::Json {
        files.extend(outputs.tables);
    }
    if output.format != Format::Csv {
        files.push((format!("{command}.json"), serde_json::to_string_pretty(&doc)? + "\n"));
    }
    if doc.config.seed().is_some() {
        files.push((output::REGISTRY_FILE.into(), serde_json::to_string_pretty(&registry)? + "\n"));
    }
    for path in output::write_all(&output.out, &files)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let mut checked = 0;
    if let Some(path) = &args.sequence.seq {
        let seq = load_sequence(path)?;
        seq.validate_sensing()
            .map_err(|e| anyhow!("{}: {e}", path.display()))?;
        println!(
            "{}: ok, {} events, free evolution {:e} s\n{}",
            path.display(),
            seq.events().len(),
            seq.total_time(),
            format_sequence(&seq)
        );
        checked += 1;
    }
    if let Some(name) = &args.sequence.builder {
        let (family, time) = builder_family(name, &args.sequence.params)?;
        let time = time.ok_or_else(|| anyhow!("--builder {name} needs --param tau=<time> to validate"))?;
        println!("{}: ok\n{}", family.name(), format_sequence(&family.build(time)?));
        checked += 1;
    }
    if let Some(path) = &args.noise {
        let model = load_model(path)?;
        model.validate().map_err(|e| anyhow!("{}: {e}", path.display()))?;
        println!("{}: ok\n{}", path.display(), model_to_toml(&model));
        checked += 1;
    }
    if let Some(path) = &args.config {
        let doc = run::parse_document(&read(path, "result file")?).with_context(|| path.display().to_string())?;
        doc.config
            .validate()
            .with_context(|| path.display().to_string())?;
        println!(
            "{}: ok, {} run, fingerprint {}",
            path.display(),
            doc.config.command(),
            doc.config.fingerprint()
        );
        checked += 1;
    }
    if checked == 0 {
        bail!("nothing to validate: give --seq, --builder, --noise or --config");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fringes(args) => {
            let config = match &args.output.config {
                Some(path) => from_result_file(path, "fringes")?,
                None => sweep_config(&args, false)?,
            };
            execute(config, &args.output)
        }
        Command::Decay(args) => {
            let config = match &args.output.config {
                Some(path) => from_result_file(path, "decay")?,
                None => sweep_config(&args, true)?,
            };
            execute(config, &args.output)
        }
        Command::Spectrum(args) => {
            let config = match &args.output.config {
                Some(path) => from_result_file(path, "spectrum")?,
                None => spectrum_config(&args)?,
            };
            execute(config, &args.output)
        }
        Command::Sense(args) => {
            let config = match &args.output.config {
                Some(path) => from_result_file(path, "sense")?,
                None => sense_config(&args)?,
            };
            execute(config, &args.output)
        }
        Command::Odmr(args) => {
            let config = match &args.output.config {
                Some(path) => from_result_file(path, "odmr")?,
                None => odmr_config(&args)?,
            };
            execute(config, &args.output)
        }
        Command::Validate(args) => validate(&args),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
