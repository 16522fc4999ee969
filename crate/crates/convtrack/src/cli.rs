//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a command fails at runtime, 2 for usage
//! errors (unknown subcommands or flags, malformed arguments).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use convtrack_core::{BoundingBox, TrackerConfig, Variant};

use crate::error::{Error, Result};
use crate::results::{write_results, write_timing};
use crate::run::{evaluate, track_sequence, write_curve_csv};
use crate::sequence::{load_sequence, parse_groundtruth, read_groundtruth};
use crate::synth::{load_spec, synth_sequence, SynthSpec};
use crate::{load_config, selftest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "convtrack",
    version,
    about = "Particle-filter tracking with convolutional features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track the target through a sequence directory.
    Track(TrackArgs),
    /// Score a results file against ground truth.
    Eval(EvalArgs),
    /// Render a synthetic sequence with exact ground truth.
    Synth(SynthArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("start").required(true).args(["init", "from_gt"])))]
struct TrackArgs {
    /// Sequence directory holding `img/` and optionally `groundtruth_rect.txt`.
    #[arg(long, value_name = "DIR")]
    seq: PathBuf,
    /// Initial box as `x,y,w,h` (top-left corner plus size).
    #[arg(long, value_name = "X,Y,W,H", value_parser = parse_init)]
    init: Option<BoundingBox>,
    /// Take the initial box from the first ground-truth line.
    #[arg(long)]
    from_gt: bool,
    /// Results file; per-frame timings go to `<FILE>.timing`.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Flat `key = value` tracker configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// full, no_shrinkage or random_filters; overrides the config file.
    #[arg(long, value_name = "NAME", value_parser = parse_variant)]
    variant: Option<Variant>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Writes `<P>_success.csv` and `<P>_precision.csv`.
    #[arg(long, value_name = "P")]
    out_prefix: String,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scene description; the built-in default scene when omitted.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn parse_init(s: &str) -> std::result::Result<BoundingBox, String> {
    match parse_groundtruth(s).map_err(|e| e.to_string())?.as_slice() {
        [b] => Ok(*b),
        _ => Err("expected a single x,y,w,h box".into()),
    }
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: convtrack_core::Error| e.to_string())
}

/// Parses `args` (program name first) and runs the command, printing to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Track(a) => track(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Synth(a) => synth(&a, out),
        Command::Selftest => return run_selftest(out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn timing_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".timing");
    PathBuf::from(name)
}

fn track(a: &TrackArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => load_config(path)?,
        None => TrackerConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(variant) = a.variant {
        cfg.variant = variant;
    }
    let seq = load_sequence(&a.seq)?;
    let init = match a.init {
        Some(b) => b,
        None => *seq
            .gt
            .as_ref()
            .and_then(|gt| gt.first())
            .ok_or_else(|| Error::Load(format!("{}: --from-gt needs a ground-truth file", a.seq.display())))?,
    };
    let run = track_sequence(&seq, init, &cfg)?;
    write_results(&run.record, &a.out)?;
    write_timing(&run.seconds, &timing_path(&a.out))?;

    let total: f64 = run.seconds.iter().sum();
    let _ = writeln!(
        out,
        "tracked {} frames in {total:.2} s ({:.1} fps)",
        run.record.boxes.len(),
        run.record.boxes.len() as f64 / total.max(f64::MIN_POSITIVE)
    );
    if let Some(gt) = &seq.gt {
        let s = evaluate(&run.record.boxes, gt)?;
        let _ = writeln!(out, "AUC: {:.4}\nprecision@20: {:.4}", s.auc(), s.precision_at_20());
    }
    Ok(())
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    // result files carry their header as comments, so the gt reader handles both
    let tracked = read_groundtruth(&a.results)?;
    let truth = read_groundtruth(&a.gt)?;
    let s = evaluate(&tracked, &truth)?;
    write_curve_csv(&s.success, Path::new(&format!("{}_success.csv", a.out_prefix)))?;
    write_curve_csv(&s.precision, Path::new(&format!("{}_precision.csv", a.out_prefix)))?;
    let _ = writeln!(out, "AUC: {:.4}\nprecision@20: {:.4}", s.auc(), s.precision_at_20());
    Ok(())
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => load_spec(path)?,
        None => SynthSpec::default(),
    };
    let seq = synth_sequence(&spec)?.write_to(&a.out)?;
    let _ = writeln!(out, "wrote {} frames to {}", seq.len(), a.out.display());
    Ok(())
}

fn run_selftest(out: &mut dyn Write) -> i32 {
    let checks = selftest::run_all();
    for c in &checks {
        let _ = writeln!(
            out,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", checks.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
