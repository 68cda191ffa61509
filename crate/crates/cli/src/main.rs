//! `flexbits` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on contract or
//! validation failures, 3 when training diverges.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use flexbits::analysis::sweep::{DEFAULT_INPUTS, DEFAULT_TRIALS};
use flexbits::analysis::{
    adaptive_size, bitops, clipping_profile, clipping_profile_csv, clipping_sweep, default_alpha_grid, individual_size,
    log_grid, variance_profile, variance_profile_csv, BitPolicy, MacManifest, MIB,
};
use flexbits::data::DataSource;
use flexbits::io::{self, fit_source, load_for, load_model, resolve_source, save_model, RunConfig};
use flexbits::quant::parse_bit_list;
use flexbits::train::{calibrate_bn, evaluate};
use flexbits::{AdaptiveModel32, BitWidth, Error, QuantScheme, Result};

#[derive(Parser)]
#[command(name = "flexbits", version, about = "Quantized networks with adaptive bit-widths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Original,
    Modified,
}

impl From<Scheme> for QuantScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Original => QuantScheme::Original,
            Scheme::Modified => QuantScheme::Modified,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileKind {
    Clipping,
    Variance,
}

#[derive(Subcommand)]
enum Command {
    /// Train as described by a run configuration file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Suppress per-epoch progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Print test accuracy at each bit-width.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated bit-widths; defaults to every registered one.
        #[arg(long)]
        bits: Option<String>,
        /// `synthetic`, `synthetic:<seed>` or an IDX directory.
        #[arg(long)]
        data: Option<String>,
        /// Write the test-set logits as little-endian f32, one block per
        /// requested bit-width in order.
        #[arg(long)]
        logits: Option<PathBuf>,
    },
    /// Rewrite a floor-scheme model file at a lower bit-width.
    Convert {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        to: u32,
        /// Defaults to `<model stem>-<k>bit.flxb` next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute BN statistics for the given bit-widths.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bits: String,
        #[arg(long)]
        data: Option<String>,
        /// Defaults to overwriting the input file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte-Carlo clipping error over a grid of clipping levels (CSV).
    Sweep {
        #[arg(long, default_value = "2,4,8")]
        bits: String,
        /// `lo:hi:n`, log-spaced.
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long, default_value_t = DEFAULT_INPUTS)]
        inputs: usize,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "original")]
        scheme: Scheme,
    },
    /// Per-layer clipping levels or standard deviations of a model (CSV).
    Profile {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "clipping")]
        kind: ProfileKind,
        /// Bit-widths for the variance profile; defaults to all registered.
        #[arg(long)]
        bits: Option<String>,
        #[arg(long)]
        data: Option<String>,
        /// Test images used to measure activations.
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Bit operations and storage of a MAC manifest (CSV).
    Budget {
        /// Bundled manifest name or path to a manifest CSV.
        #[arg(long)]
        manifest: String,
        #[arg(long, default_value = "8,6,5,4")]
        bits: String,
        #[arg(long, default_value_t = 8)]
        first_last_bits: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Divergence { .. } => 3,
                _ => 2,
            })
        }
    }
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn bits_or_registered(arg: Option<&str>, model: &AdaptiveModel32) -> Result<Vec<BitWidth>> {
    match arg {
        Some(s) => parse_bit_list(s),
        None => Ok(model.bit_widths().to_vec()),
    }
}

fn data_for(arg: Option<&str>, model: &AdaptiveModel32) -> Result<flexbits::data::DataSplit> {
    let source: DataSource = fit_source(resolve_source(arg), model.arch());
    load_for(&source, model.arch())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { config, quiet } => {
            let cfg = RunConfig::load(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let outcome = io::run(&cfg, base, &mut |r| {
                if !quiet {
                    eprintln!("{}", r.to_json_line());
                }
            })?;
            let mut text = String::from("k,accuracy\n");
            for (k, acc) in &outcome.accuracy {
                text.push_str(&format!("{k},{acc:.2}\n"));
            }
            emit(&text)?;
            eprintln!("wrote {}", outcome.model.display());
            Ok(())
        }
        Command::Eval {
            model,
            bits,
            data,
            logits,
        } => {
            let mut m: AdaptiveModel32 = load_model(&model)?;
            let bits = bits_or_registered(bits.as_deref(), &m)?;
            for &k in &bits {
                m.config().position(k)?;
            }
            let split = data_for(data.as_deref(), &m)?;
            let mut text = String::from("k,accuracy\n");
            let mut raw = Vec::new();
            for &k in &bits {
                text.push_str(&format!("{k},{:.2}\n", evaluate(&mut m, k, &split.test)?));
                if logits.is_some() {
                    m.set_bitwidth(k)?;
                    for (images, _) in split.test.sequential_batches(256) {
                        raw.extend(m.logits(&images)?.data().iter().flat_map(|v| v.to_le_bytes()));
                    }
                }
            }
            if let Some(path) = logits {
                fs::write(&path, raw).map_err(|e| Error::io(&path, e))?;
            }
            emit(&text)
        }
        Command::Convert { model, to, out } => {
            let k = BitWidth::new(to)?;
            let out = out.unwrap_or_else(|| {
                let stem = model
                    .file_stem()
                    .map_or("model".into(), |s| s.to_string_lossy().into_owned());
                model.with_file_name(format!("{stem}-{k}bit.flxb"))
            });
            io::convert_file(&model, k, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Calibrate {
            model,
            bits,
            data,
            out,
            seed,
        } => {
            let mut m: AdaptiveModel32 = load_model(&model)?;
            let bits = parse_bit_list(&bits)?;
            let split = data_for(data.as_deref(), &m)?;
            let mut text = String::from("k,batches,accuracy\n");
            for k in bits {
                let n = calibrate_bn(&mut m, k, &split.train, seed)?;
                text.push_str(&format!("{k},{n},{:.2}\n", evaluate(&mut m, k, &split.test)?));
            }
            let out = out.unwrap_or(model);
            save_model(&m, &out)?;
            emit(&text)
        }
        Command::Sweep {
            bits,
            alphas,
            inputs,
            trials,
            seed,
            scheme,
        } => {
            let bits = parse_bit_list(&bits)?;
            let grid = match alphas {
                None => default_alpha_grid(),
                Some(spec) => parse_grid(&spec)?,
            };
            let result = clipping_sweep(&bits, &grid, inputs, trials, seed, scheme.into())?;
            emit(&result.to_csv())
        }
        Command::Profile {
            model,
            kind,
            bits,
            data,
            samples,
        } => {
            let mut m: AdaptiveModel32 = load_model(&model)?;
            match kind {
                ProfileKind::Clipping => emit(&clipping_profile_csv(&clipping_profile(&m))),
                ProfileKind::Variance => {
                    let bits = bits_or_registered(bits.as_deref(), &m)?;
                    let split = data_for(data.as_deref(), &m)?;
                    let probe = split.test.truncated(samples.max(1));
                    let mut rows = Vec::new();
                    for k in bits {
                        rows.extend(variance_profile(&mut m, k, &probe.images)?);
                    }
                    emit(&variance_profile_csv(&rows))
                }
            }
        }
        Command::Budget {
            manifest,
            bits,
            first_last_bits,
        } => {
            let manifest = match MacManifest::bundled(&manifest) {
                Ok(m) => m,
                Err(_) if Path::new(&manifest).is_file() => {
                    let path = Path::new(&manifest);
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let name = path
                        .file_stem()
                        .map_or(String::new(), |s| s.to_string_lossy().into_owned());
                    MacManifest::from_csv(&name, &text)?
                }
                Err(e) => return Err(e),
            };
            let policy = BitPolicy {
                first_last_weight_bits: first_last_bits,
                ..BitPolicy::default()
            };
            let bits = parse_bit_list(&bits)?;
            let mut text = String::from("k,bitops,bitops_b,size_mib\n");
            for &k in &bits {
                let ops = bitops(&manifest, k, &policy);
                let size = individual_size(&manifest, k, &policy) / MIB;
                text.push_str(&format!("{k},{ops},{:.2},{size:.2}\n", ops as f64 / 1e9));
            }
            if bits.len() > 1 {
                if let Some(mib) = adaptive_size(&manifest, QuantScheme::Modified, &bits, &policy).mib() {
                    text.push_str(&format!("adaptive,,,{mib:.2}\n"));
                }
            }
            emit(&text)
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || {
        Error::Config(format!(
            "alpha grid must be `lo:hi:n` with 0 < lo < hi and n >= 2, got `{spec}`"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite() && n >= 2) {
        return Err(bad());
    }
    Ok(log_grid(lo, hi, n))
}
