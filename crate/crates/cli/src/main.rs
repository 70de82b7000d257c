use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gesture_core::calibrate::{calibrate, DEFAULT_MARGIN};
use gesture_core::export::export_report;
use gesture_core::pipeline::run_pipeline;
use gesture_core::scene::{make_gesture_scene, simulate_tap_stream};
use gesture_core::{Error, GestureKind, GestureParams, PipelineConfig, RunReport, Scene, TapRecording};

#[derive(Parser)]
#[command(name = "gesture", version, about = "Gesture recognition over 60 GHz channel-estimation taps")]
struct Cli {
    /// Overrides the scene seed (simulate) or is recorded in the report (run).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline config JSON; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene into a GTAP recording.
    Simulate {
        /// Scene JSON file.
        #[arg(required_unless_present = "gesture", conflicts_with = "gesture")]
        scene: Option<PathBuf>,
        /// Use a canonical gesture scene instead of a file.
        #[arg(long, value_parser = parse_gesture)]
        gesture: Option<GestureKind>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run the pipeline over a recording and write a JSON report.
    Run {
        recording: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Include per-stage wall-clock timing (makes the report non-deterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Derive thresholds from a noise or idle recording and write a config.
    Calibrate {
        recording: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
    },
    /// Write trace.csv and events.csv from a report.
    Export {
        report: PathBuf,
        #[arg(long, short)]
        out_dir: PathBuf,
    },
}

fn parse_gesture(s: &str) -> Result<GestureKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| "expected one of: slider-in, slider-out, two-finger, idle, swipe".to_owned())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_) | Error::Json(_) | Error::Recording(_) | Error::InvalidArgument(_) => 2,
        Error::Mismatch(_) => 3,
        Error::Numeric(_) | Error::Framing(_) | Error::DegenerateFit(_) => 4,
        Error::Io(_) | Error::Csv(_) => 1,
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Error> {
    match path {
        Some(p) => PipelineConfig::from_json(&read_text(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match &cli.command {
        Command::Simulate { scene, gesture, output } => {
            let mut scene = match (scene, gesture) {
                (Some(p), _) => Scene::from_json(&read_text(p)?)?,
                (None, Some(kind)) => make_gesture_scene(*kind, &GestureParams::default())?,
                (None, None) => unreachable!("clap requires one"),
            };
            if let Some(seed) = cli.seed {
                scene.seed = seed;
            }
            let frames = simulate_tap_stream(&scene)?;
            let radio = scene.radio;
            let rec = TapRecording::from_frames(
                &frames,
                radio.packet_rate_hz.round() as u32,
                radio.pulses_per_reading as u32,
            )?;
            rec.write(output)?;
            say(format!(
                "wrote {}: {} frames x {} taps, {} Hz, seed {}",
                output.display(),
                rec.header.count,
                rec.header.num_taps,
                rec.header.sample_rate_hz,
                scene.seed
            ));
        }
        Command::Run { recording, output, timing } => {
            let config = load_config(cli.config.as_deref())?;
            let rec = TapRecording::read(recording)?;
            config.check_recording(&rec.header)?;
            let frames = rec.to_frames();
            let fs = rec.header.sample_rate();
            let out = run_pipeline(&config, &frames, fs)?;
            let report = RunReport::new(config, cli.seed, fs, frames.len(), out, *timing);
            fs::write(output, report.to_json() + "\n")?;
            let last = report.trace.last().map_or(0.0, |r| r.level);
            say(format!(
                "wrote {}: {} trace rows, final level {last:.2}, {} two-finger events",
                output.display(),
                report.trace.len(),
                report.events.len()
            ));
        }
        Command::Calibrate { recording, output, margin } => {
            let base = load_config(cli.config.as_deref())?;
            let rec = TapRecording::read(recording)?;
            base.check_recording(&rec.header)?;
            let (cfg, stats) = calibrate(&rec.to_frames(), &base, rec.header.sample_rate(), *margin)?;
            fs::write(output, cfg.to_json() + "\n")?;
            say(format!(
                "wrote {}: spectral {:.4}, magnitude {:.4}, magnitude std {:.4}, alpha {:.4} ({} windows)",
                output.display(),
                cfg.detector.spectral_threshold,
                cfg.tracker.magnitude_threshold,
                cfg.tracker.std_threshold,
                cfg.tracker.alpha,
                stats.windows
            ));
        }
        Command::Export { report, out_dir } => {
            let report = RunReport::from_json(&read_text(report)?)?;
            export_report(&report, out_dir)?;
            say(format!(
                "wrote {} trace rows and {} events to {}",
                report.trace.len(),
                report.events.len(),
                out_dir.display()
            ));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
