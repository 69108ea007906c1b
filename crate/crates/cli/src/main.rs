//! `sphere-rc`: train, recall, sweep and encrypt with hypersphere reservoirs.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 operational failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sphere_rc::artifact::TextModel;
use sphere_rc::capacity::{
    derivative_and_transitions, parse_grid, sweep_with, write_surface_csv, write_sweep_metadata,
    SecondAxis, SweepConfig,
};
use sphere_rc::crypto::{self, CipherText, CryptoParams};
use sphere_rc::encoding::Alphabet;
use sphere_rc::regimes::{recall_error, train_offline_generative, train_online_generative_with};
use sphere_rc::reservoir::{ModelConfig, ReservoirKind, DEFAULT_ETA};
use sphere_rc::Error;

#[derive(Parser)]
#[command(
    name = "sphere-rc",
    version,
    about = "Reservoir computing on the unit hypersphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generative model on a text corpus
    Learn(LearnArgs),
    /// Regenerate text from a trained model
    Recall(RecallArgs),
    /// Run a memory-capacity sweep and write an error surface CSV
    Sweep(SweepArgs),
    /// Encrypt a text file with a password
    Encrypt(EncryptArgs),
    /// Decrypt a ciphertext file with a password
    Decrypt(DecryptArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Offline,
    Online,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Dense,
    Cyclic,
}

impl From<Kind> for ReservoirKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Dense => ReservoirKind::Dense,
            Kind::Cyclic => ReservoirKind::Cyclic,
        }
    }
}

#[derive(Args)]
struct LearnArgs {
    /// Training corpus (UTF-8 text)
    corpus: PathBuf,
    /// Reservoir size [default: T/2]
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "offline")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "cyclic")]
    reservoir: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ridge parameter for offline learning
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    /// Epoch cap for online learning [default: T]
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Where to write the trained model
    #[arg(long, short, default_value = "model.hrcm")]
    out: PathBuf,
}

#[derive(Args)]
struct RecallArgs {
    model: PathBuf,
    /// First symbol of the generated text
    #[arg(long)]
    start: String,
    /// Number of symbols to generate [default: training length]
    #[arg(long)]
    length: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long = "t")]
    t: usize,
    #[arg(long)]
    trials: usize,
    /// start:end:count
    #[arg(long)]
    nu_grid: String,
    #[arg(long, conflicts_with = "rho")]
    rho_grid: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, conflicts_with = "alpha")]
    alpha_grid: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "dense")]
    reservoir: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    /// Worker threads [default: all cores]
    #[arg(long)]
    jobs: Option<usize>,
    /// Print the transition nu (steepest descent of the error) per column
    #[arg(long)]
    transitions: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncryptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    password: String,
    /// Reservoir size per message symbol
    #[arg(long, default_value_t = crypto::DEFAULT_N_FACTOR)]
    n_factor: f64,
    #[arg(long, default_value_t = crypto::DEFAULT_ALPHA)]
    alpha: f64,
    /// Key alphabet size
    #[arg(long, default_value_t = crypto::DEFAULT_KEY_ALPHABET)]
    key_alphabet: usize,
    /// File whose distinct characters form the message alphabet
    /// [default: printable ASCII, tab, newline, carriage return]
    #[arg(long)]
    alphabet_file: Option<PathBuf>,
}

#[derive(Args)]
struct DecryptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    password: String,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::LossyEncryption(_) | Error::DegenerateState { .. } | Error::SingularSystem => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Learn(a) => learn(a),
        Command::Recall(a) => recall(a),
        Command::Sweep(a) => sweep(a),
        Command::Encrypt(a) => encrypt(a),
        Command::Decrypt(a) => decrypt(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, data: &[u8]) -> CliResult {
    std::fs::write(path, data).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })
}

fn learn(a: LearnArgs) -> CliResult {
    let text = read_text(&a.corpus)?;
    let alphabet = Alphabet::from_text(&text)?;
    let seq = alphabet.encode(&text)?;
    let t = seq.len();
    if t < 2 {
        return Err(Failure::usage("corpus must hold at least 2 symbols"));
    }
    let n = a.n.unwrap_or(t / 2).max(1);
    let config = ModelConfig::new(n)
        .with_alpha(a.alpha)
        .with_eta(a.eta)
        .with_reservoir(a.reservoir.into())
        .with_seed(a.seed);
    config.validate()?;
    let (model, epochs, error) = match a.mode {
        Mode::Offline => {
            let model = train_offline_generative(&seq, &config)?;
            let recalled = model.recall_generative(seq.indices()[0], t)?;
            let error = recall_error(&seq, &recalled)?;
            (model, 0, error)
        }
        Mode::Online => {
            let max_epochs = a.max_epochs.unwrap_or(t);
            let (model, report) =
                train_online_generative_with(&seq, &config, max_epochs, |e, err| {
                    eprintln!("epoch {e} err={:.2}%", err * 100.0);
                })?;
            (model, report.epochs, report.final_error)
        }
    };
    let text_model = TextModel::new(model, alphabet.clone(), alphabet, t)?;
    text_model.save(&a.out)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "T={t} M={} N={n} alpha={}",
        text_model.input_alphabet.len(),
        a.alpha
    )
    .ok();
    writeln!(out, "epochs={epochs} err={}", error).ok();
    writeln!(out, "model written to {}", a.out.display()).ok();
    Ok(())
}

fn recall(a: RecallArgs) -> CliResult {
    let model = TextModel::load(&a.model)?;
    let mut chars = a.start.chars();
    let start = match (chars.next(), chars.next()) {
        (Some(c), None) => c,
        _ => return Err(Failure::usage("--start must be exactly one symbol")),
    };
    let length = a.length.unwrap_or(model.trained_len);
    if length == 0 {
        return Err(Failure::usage("--length must be >= 1"));
    }
    let text = model.generate(start, length)?;
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).ok();
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult {
    let nu = parse_grid(&a.nu_grid)?;
    let second = match (&a.rho_grid, a.rho, &a.alpha_grid, a.alpha) {
        (Some(_), _, Some(_), _) => {
            return Err(Failure::usage(
                "give at most one of --rho-grid and --alpha-grid",
            ))
        }
        (Some(g), _, None, alpha) => SecondAxis::Rho {
            values: parse_grid(g)?,
            alpha: alpha.unwrap_or(1.0),
        },
        (None, rho, Some(g), _) => SecondAxis::Alpha {
            values: parse_grid(g)?,
            rho: rho.ok_or_else(|| Failure::usage("--alpha-grid needs a fixed --rho"))?,
        },
        (None, Some(rho), None, alpha) => SecondAxis::Rho {
            values: vec![rho],
            alpha: alpha.unwrap_or(1.0),
        },
        (None, None, None, _) => return Err(Failure::usage("give --rho-grid or --rho")),
    };
    let config = SweepConfig {
        t: a.t,
        trials: a.trials,
        nu,
        second,
        reservoir: a.reservoir.into(),
        base_seed: a.seed,
        theta: a.theta,
        eta: a.eta,
    };
    config.validate()?;
    if a.jobs == Some(0) {
        return Err(Failure::usage("--jobs must be >= 1"));
    }
    let surface = sweep_with(&config, a.jobs, |done, total| {
        if done == total || done % 50 == 0 {
            eprintln!("sweep: {done}/{total} trials");
        }
    })
    .map_err(|e| Failure {
        code: 3,
        message: e.to_string(),
    })?;
    write_surface_csv(&surface, &a.out)?;
    let mut meta = a.out.clone().into_os_string();
    meta.push(".meta.json");
    write_sweep_metadata(&config, Path::new(&meta))?;
    eprintln!(
        "wrote {} and {}",
        a.out.display(),
        Path::new(&meta).display()
    );
    if a.transitions {
        if let Ok(tr) = derivative_and_transitions(&surface) {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{},transition_nu", surface.axis2.name).ok();
            for (v, nu) in surface.axis2.values.iter().zip(&tr.transition) {
                let nu = nu.map_or(String::new(), |x| x.to_string());
                writeln!(out, "{v},{nu}").ok();
            }
        } else {
            eprintln!("transitions need at least 3 nu points; skipped");
        }
    }
    Ok(())
}

fn encrypt(a: EncryptArgs) -> CliResult {
    if a.password.is_empty() {
        return Err(Failure::usage("password must not be empty"));
    }
    let message = read_text(&a.input)?;
    let alphabet = match &a.alphabet_file {
        Some(p) => Alphabet::from_text(&read_text(p)?)?,
        None => crypto::default_text_alphabet(),
    };
    let params = CryptoParams {
        n_factor: a.n_factor,
        alpha: a.alpha,
        key_alphabet: a.key_alphabet,
        output_alphabet: alphabet,
        eta: DEFAULT_ETA,
    };
    let cipher = crypto::encrypt(&message, a.password.as_bytes(), &params)?;
    write_file(&a.out, &cipher.to_bytes())?;
    eprintln!(
        "encrypted T={} symbols with N={} M={} K={}",
        cipher.t,
        cipher.n,
        cipher.m,
        cipher.k()
    );
    Ok(())
}

fn decrypt(a: DecryptArgs) -> CliResult {
    if a.password.is_empty() {
        return Err(Failure::usage("password must not be empty"));
    }
    let data = std::fs::read(&a.input)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.input.display())))?;
    let cipher = CipherText::from_bytes(&data)?;
    let plain = crypto::decrypt(&cipher, a.password.as_bytes())?;
    write_file(&a.out, plain.as_bytes())
}
