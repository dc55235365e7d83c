//! `levy-lrm`: strategy sweeps, Monte Carlo verification and calibration.
//!
//! Exit codes: 0 success, 1 invariant or verification failure, 2 configuration
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levy_lrm::calibration::{calibrate, CalibrationConfig, QuoteSet};
use levy_lrm::config::RunConfig;
use levy_lrm::fourier::{self, CharFn, FourierConfig, FourierValue, Mode};
use levy_lrm::hedging::{self, StrategyPoint};
use levy_lrm::models::{Family, MertonParams, ModelParams, VgParams};
use levy_lrm::oracle_mc::{simulate_log_returns, standard_chis, McEstimate, Sample};
use levy_lrm::{to_mmm, Error, MmmModel};
use num_complex::Complex64;

#[derive(Parser, Debug)]
#[command(name = "levy-lrm", version, about = "LRM vs delta hedging under exponential Lévy models")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Evaluate transforms with one FFT pass per batch.
    #[arg(long, global = true, conflicts_with = "quadrature")]
    fft: bool,
    /// Evaluate transforms by adaptive quadrature (default).
    #[arg(long, global = true)]
    quadrature: bool,
    /// Monte Carlo seed, overriding the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// LRM, delta, their difference and both bounds over the strike grid (CSV).
    Sweep,
    /// Fourier values against the Monte Carlo oracle with standard-error bands (CSV).
    Verify,
    /// Fit model parameters to call quotes by RMSE.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Quote file: `# spot = ...`, `# valuation_date = YYYY-MM-DD`, then `expiry,strike,mid`.
    #[arg(long, value_name = "PATH")]
    quotes: PathBuf,
    /// Model family; defaults to that of `--init` or of the config.
    #[arg(long)]
    family: Option<Family>,
    /// Starting point, e.g. `merton:mu=-0.002,sigma=0.04,gamma=0.005,m=-0.07,delta=0.09`.
    #[arg(long, value_name = "SPEC")]
    init: Option<ModelParams>,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }
    fn run(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

/// Errors from user input count as configuration errors; the rest are
/// numerical failures.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidParameter { .. } | Error::Assumption { .. } | Error::Parse(_) | Error::Io(_) => {
            Failure::config(e)
        }
        _ => Failure::run(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Sweep => cmd_sweep(&load_config(&cli.global)?, &cli.global),
        Command::Verify => cmd_verify(&load_config(&cli.global)?, &cli.global),
        Command::Calibrate(args) => cmd_calibrate(args, &cli.global),
    }
}

fn apply_overrides(cfg: &mut RunConfig, g: &Global) {
    if g.fft {
        cfg.fourier.mode = Mode::FftBatch;
    } else if g.quadrature {
        cfg.fourier.mode = Mode::DirectQuadrature;
    }
    if let Some(seed) = g.seed {
        cfg.mc.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.output.path = Some(out.clone());
    }
}

fn load_config(g: &Global) -> Result<RunConfig, Failure> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Failure::config("this command needs --config <path>"))?;
    let mut cfg = RunConfig::load(path).map_err(classify)?;
    apply_overrides(&mut cfg, g);
    Ok(cfg)
}

fn build(cfg: &RunConfig) -> Result<(MmmModel, CharFn), Failure> {
    let params = cfg.params().map_err(classify)?;
    let model = params.model(cfg.market.spot).map_err(classify)?;
    let mmm = to_mmm(&model).map_err(classify)?;
    let phi = CharFn::new(&mmm, cfg.horizon()).map_err(classify)?;
    Ok((mmm, phi))
}

fn emit(path: Option<&Path>, content: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| Failure::config(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(content).map_err(Failure::run)
        }
    }
}

fn csv_buffer(comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    for c in comments {
        buf.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(&mut buf);
    w.write_record(header).map_err(Failure::run)?;
    for r in rows {
        w.write_record(r).map_err(Failure::run)?;
    }
    w.flush().map_err(Failure::run)?;
    drop(w);
    Ok(buf)
}

fn num(v: f64) -> String {
    v.to_string()
}

fn sweep_row(chi: f64, point: &levy_lrm::Result<StrategyPoint>) -> (Vec<String>, bool) {
    match point {
        Ok(p) => {
            let flags: Vec<String> = p.flags.iter().map(|f| f.label()).collect();
            (
                vec![
                    num(p.chi),
                    num(p.i1),
                    num(p.i2),
                    num(p.lrm),
                    num(p.delta),
                    num(p.diff),
                    num(p.bound_t3),
                    p.bound_t4.map(num).unwrap_or_default(),
                    flags.join(";"),
                ],
                p.passed(),
            )
        }
        Err(e) => {
            let mut row = vec![num(chi)];
            row.extend(std::iter::repeat_n(String::new(), 7));
            row.push(format!("error: {e}"));
            (row, false)
        }
    }
}

fn cmd_sweep(cfg: &RunConfig, _g: &Global) -> Result<bool, Failure> {
    let (_, phi) = build(cfg)?;
    let chis = cfg.chis().map_err(classify)?;
    let points = hedging::sweep(&phi, &chis, &cfg.fourier).map_err(classify)?;
    let mut failed = 0;
    let rows: Vec<Vec<String>> = chis
        .iter()
        .zip(&points)
        .map(|(&chi, p)| {
            let (row, ok) = sweep_row(chi, p);
            failed += usize::from(!ok);
            row
        })
        .collect();
    let comments = vec![
        format!("config-digest: sha256:{}", cfg.digest()),
        format!("model: {}", describe(&cfg.params().map_err(classify)?)),
        format!("horizon: {}", cfg.horizon()),
    ];
    let header = ["chi", "i1", "i2", "lrm", "delta", "diff", "bound_t3", "bound_t4", "flags"];
    emit(cfg.output.path.as_deref(), &csv_buffer(&comments, &header, &rows)?)?;
    eprintln!("sweep: {} points, {} failed", rows.len(), failed);
    Ok(failed == 0)
}

fn describe(p: &ModelParams) -> String {
    let kv: Vec<String> = p.entries().iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{}:{}", p.family(), kv.join(","))
}

struct Check {
    quantity: &'static str,
    chi: Option<f64>,
    fourier: Result<(f64, f64), String>,
    mc: Result<McEstimate, String>,
}

fn fourier_pair(v: levy_lrm::Result<FourierValue>) -> Result<(f64, f64), String> {
    v.map(|v| (v.value, v.abs_err)).map_err(|e| e.to_string())
}

fn checks_at(sample: &Sample, mmm: &MmmModel, phi: &CharFn, chi: f64, fc: &FourierConfig) -> Vec<Check> {
    let mc = |r: levy_lrm::Result<McEstimate>| r.map_err(|e| e.to_string());
    let i2 = sample.i2(mmm, chi);
    // The x-quadrature error of the oracle joins the deterministic side.
    let i2_extra = i2.as_ref().map(|v| v.quad_err).unwrap_or(0.0);
    vec![
        Check {
            quantity: "i1",
            chi: Some(chi),
            fourier: fourier_pair(fourier::i1(phi, chi, fc)),
            mc: mc(sample.i1(chi)),
        },
        Check {
            quantity: "i2",
            chi: Some(chi),
            fourier: fourier_pair(fourier::i2(phi, chi, fc)).map(|(v, e)| (v, e + i2_extra)),
            mc: i2.map(|v| v.as_estimate()).map_err(|e| e.to_string()),
        },
        Check {
            quantity: "tail_upper",
            chi: Some(chi),
            fourier: fourier_pair(fourier::tail_upper(phi, chi, fc)),
            mc: mc(sample.tail_upper(chi)),
        },
        Check {
            quantity: "tail_lower",
            chi: Some(chi),
            fourier: fourier_pair(fourier::tail_lower(phi, chi, fc)),
            mc: mc(sample.tail_lower(chi)),
        },
        Check {
            quantity: "call",
            chi: Some(chi),
            fourier: fourier_pair(fourier::call(phi, chi, fc)),
            mc: mc(sample.call(chi)),
        },
    ]
}

fn cmd_verify(cfg: &RunConfig, _g: &Global) -> Result<bool, Failure> {
    let (mmm, phi) = build(cfg)?;
    let phi = phi.with_drift_shift(cfg.verify.drift_shift);
    let chis = match &cfg.verify.chis {
        Some(c) => c.clone(),
        None => standard_chis(&mmm, cfg.horizon()).map_err(classify)?.to_vec(),
    };
    let sample = simulate_log_returns(&mmm, &cfg.mc_config()).map_err(classify)?;
    let k = cfg.verify.sigmas;

    let mut checks = vec![Check {
        quantity: "martingale",
        chi: None,
        fourier: phi
            .phi(Complex64::new(0.0, -1.0))
            .map(|v| (v.re, 0.0))
            .map_err(|e| e.to_string()),
        mc: Ok(sample.martingale()),
    }];
    for &chi in &chis {
        checks.extend(checks_at(&sample, &mmm, &phi, chi, &cfg.fourier));
    }

    let mut all_ok = true;
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            let chi = c.chi.map(num).unwrap_or_default();
            match (&c.fourier, &c.mc) {
                (Ok((f, fe)), Ok(m)) => {
                    let pass = m.brackets(*f, k, *fe);
                    all_ok &= pass;
                    vec![
                        c.quantity.to_string(),
                        chi,
                        num(*f),
                        num(*fe),
                        num(m.estimate),
                        num(m.std_err),
                        num(m.z_score(*f)),
                        pass.to_string(),
                    ]
                }
                (f, m) => {
                    all_ok = false;
                    let msg = [f.as_ref().err(), m.as_ref().err()]
                        .into_iter()
                        .flatten()
                        .cloned()
                        .collect::<Vec<_>>()
                        .join("; ");
                    vec![
                        c.quantity.to_string(),
                        chi,
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        format!("false ({msg})"),
                    ]
                }
            }
        })
        .collect();
    let comments = vec![
        format!("config-digest: sha256:{}", cfg.digest()),
        format!("model: {}", describe(&cfg.params().map_err(classify)?)),
        format!("sampler: {}", sample.method.describe()),
        format!("generator: {}", sample.generator),
        format!("seed: {}", sample.seed),
        format!("n_paths: {}", sample.len()),
        format!("band: |fourier - mc| <= {k} se + fourier_err"),
    ];
    let header = ["quantity", "chi", "fourier", "fourier_err", "mc", "mc_se", "z", "pass"];
    emit(cfg.output.path.as_deref(), &csv_buffer(&comments, &header, &rows)?)?;
    let failed = rows.iter().filter(|r| r[7] != "true").count();
    eprintln!("verify: {} checks, {} failed", rows.len(), failed);
    Ok(all_ok)
}

fn cmd_calibrate(args: &CalibrateArgs, g: &Global) -> Result<bool, Failure> {
    let quotes = QuoteSet::read(&args.quotes).map_err(|e| Failure::config(format!("{}: {e}", args.quotes.display())))?;
    let run_cfg = match &g.config {
        Some(_) => Some(load_config(g)?),
        None => None,
    };
    let mut fourier_cfg = run_cfg.as_ref().map(|c| c.fourier).unwrap_or_default();
    if g.fft {
        fourier_cfg.mode = Mode::FftBatch;
    } else if g.quadrature {
        fourier_cfg.mode = Mode::DirectQuadrature;
    }
    let init = match (&args.init, &run_cfg) {
        (Some(p), _) => *p,
        (None, Some(c)) if args.family.is_none_or(|f| f == c.model.family) => c.params().map_err(classify)?,
        _ => match args.family.unwrap_or(Family::Merton) {
            Family::Merton => ModelParams::Merton(MertonParams::REFERENCE),
            Family::Vg => ModelParams::Vg(VgParams::REFERENCE),
            Family::BlackScholes => return Err(Failure::config("calibration supports the merton and vg families")),
        },
    };
    if let Some(f) = args.family {
        if f != init.family() {
            return Err(Failure::config(format!(
                "--family {f} does not match the initial parameters ({})",
                init.family()
            )));
        }
    }
    let cfg = CalibrationConfig {
        fourier: fourier_cfg,
        ..CalibrationConfig::default()
    };
    let res = calibrate(&init, &quotes, &cfg).map_err(classify)?;
    let record = res.to_record();
    print!("{record}");
    if let Some(out) = &g.out {
        emit(Some(out), record.as_bytes())?;
    }
    if !res.converged {
        eprintln!("warning: optimizer stopped without converging; best parameters so far reported");
    }
    Ok(true)
}
