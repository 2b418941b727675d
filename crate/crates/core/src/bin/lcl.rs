use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use lcl::classifier::{classify, oracle_detect, ClassifyOptions, Tolerances};
use lcl::frame::canonical_frame;
use lcl::integrator::{integrate_frame, CurveTrace, DriftMode, IntegrateOptions};
use lcl::minkowski::Vec4;
use lcl::profile::CurvatureProfile;
use lcl::sweep::{run_sweep, write_sweep_csv, SweepSpec};
use lcl::verifier::{default_suite, load_suite, run_suite, DEFAULT_SEED};
use lcl::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "lcl",
    version,
    about = "Partially null and pseudo null curves in Minkowski 4-space"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Integration step (default: 1e-3 of the domain length)
    #[arg(long = "h", global = true)]
    h: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_cond: f64,
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_axis: f64,
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_oracle: f64,
    #[arg(long, global = true, value_enum, default_value_t = DriftMode::Monitor)]
    drift: DriftMode,
    /// Machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,
    /// Human-readable table output
    #[arg(long, global = true)]
    pretty: bool,
    /// Output path (default: standard output)
    #[arg(short = 'o', long = "output", global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a profile and write the CSV trace
    Synth {
        #[arg(short, long)]
        profile: PathBuf,
        /// Directory for a gnuplot script and its data file
        #[arg(long)]
        emit_gnuplot: Option<PathBuf>,
    },
    /// Run every k-type check with oracle cross-checks
    Classify {
        #[arg(short, long)]
        profile: PathBuf,
    },
    /// Run a regression suite (the bundled seeded one by default)
    Verify {
        #[arg(short, long)]
        suite: Option<PathBuf>,
        /// Seed of the bundled suite
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the suite that would be run as JSON and exit
        #[arg(long)]
        write_suite: Option<PathBuf>,
    },
    /// Detect a constant axis for one k directly from the frames
    Oracle {
        #[arg(short, long)]
        profile: PathBuf,
        #[arg(short, long, value_parser = clap::value_parser!(u8).range(0..=3))]
        k: u8,
    },
    /// Classify every tuple of a parameter sweep, CSV output
    Sweep {
        #[arg(short, long)]
        spec: PathBuf,
    },
}

impl Global {
    fn options(&self) -> Result<ClassifyOptions> {
        let tol = Tolerances {
            cond: self.tol_cond,
            axis: self.tol_axis,
            oracle: self.tol_oracle,
        };
        tol.check()?;
        Ok(ClassifyOptions {
            tol,
            h: self.h,
            drift_mode: self.drift,
            ..ClassifyOptions::default()
        })
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut out = self.sink()?;
        serde_json::to_writer_pretty(&mut out, value)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    fn emit_text(&self, text: &str) -> Result<()> {
        let mut out = self.sink()?;
        out.write_all(text.as_bytes())?;
        out.flush()?;
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Malformed(format!("cannot read {}: {e}", path.display())))
}

fn load_profile(path: &Path) -> Result<CurvatureProfile> {
    CurvatureProfile::from_json_str(&read(path)?)
}

fn synthesize(p: &CurvatureProfile, g: &Global) -> Result<CurveTrace> {
    let mut opts = IntegrateOptions::for_profile(p).with_drift_mode(g.drift);
    if let Some(h) = g.h {
        opts = opts.with_step(h);
    }
    integrate_frame(p, &canonical_frame(p.kind), Vec4::ZERO, &opts)
}

fn write_gnuplot(trace: &CurveTrace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut data = BufWriter::new(fs::File::create(dir.join("trace.dat"))?);
    writeln!(data, "# s x1 x2 x3 x4 gram_residual")?;
    for i in 0..trace.len() {
        let x = trace.positions[i].to_array();
        writeln!(
            data,
            "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
            trace.s_values[i], x[0], x[1], x[2], x[3], trace.gram_residuals[i]
        )?;
    }
    data.flush()?;
    let script = format!(
        "# {label}\nset terminal pngcairo size 1200,500\nset output 'trace.png'\nset multiplot layout 1,2\n\
         set title 'spatial projection (x2, x3, x4)'\nsplot 'trace.dat' using 3:4:5 with lines notitle\n\
         set title 'coordinates'\nset xlabel 's'\n\
         plot for [c=2:5] 'trace.dat' using 1:c with lines title sprintf('x%d', c-1)\nunset multiplot\n",
        label = trace.profile.label
    );
    fs::write(dir.join("plot.gp"), script)?;
    Ok(())
}

#[derive(Serialize)]
struct OracleOutput {
    label: String,
    k: usize,
    verdict: lcl::classifier::Verdict,
    u: Vec4,
    sigma_min: f64,
    threshold: f64,
    g_variance: f64,
    note: Option<String>,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { profile, emit_gnuplot } => {
            let p = load_profile(profile)?;
            let trace = synthesize(&p, g)?;
            let mut out = g.sink()?;
            trace.write_csv(&mut out)?;
            out.flush()?;
            if let Some(dir) = emit_gnuplot {
                write_gnuplot(&trace, dir)?;
            }
            for w in &trace.warnings {
                log::warn!("{w}");
            }
            eprintln!("{} rows, max gram residual {:e}", trace.len(), trace.max_gram_residual);
        }
        Command::Classify { profile } => {
            let p = load_profile(profile)?;
            let report = classify(&p, &g.options()?)?;
            if g.pretty && !g.json {
                g.emit_text(&report.render_table())?;
            } else {
                g.emit_json(&report)?;
            }
        }
        Command::Verify {
            suite,
            seed,
            write_suite,
        } => {
            let fixtures = match suite {
                Some(path) => load_suite(&read(path)?)?,
                None => default_suite(*seed),
            };
            if let Some(path) = write_suite {
                fs::write(path, serde_json::to_string_pretty(&fixtures)? + "\n")?;
                return Ok(ExitCode::SUCCESS);
            }
            info!("running {} fixtures", fixtures.len());
            let summary = run_suite(&fixtures, &g.options()?);
            if g.json {
                g.emit_json(&summary)?;
            } else {
                g.emit_text(&summary.render_table())?;
            }
            if !summary.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Oracle { profile, k } => {
            let p = load_profile(profile)?;
            let opts = g.options()?;
            let trace = synthesize(&p, g)?;
            let o = oracle_detect(&trace, *k as usize, &opts.tol)?;
            let out = OracleOutput {
                label: p.label.clone(),
                k: o.k,
                verdict: o.verdict,
                u: o.u,
                sigma_min: o.sigma_min,
                threshold: o.threshold,
                g_variance: o.g_variance,
                note: o.note,
            };
            if g.pretty && !g.json {
                g.emit_text(&format!(
                    "{} k={}: {} (sigma_min {:e}, threshold {:e})\nU = {:?}\n",
                    out.label,
                    out.k,
                    out.verdict,
                    out.sigma_min,
                    out.threshold,
                    out.u.to_array()
                ))?;
            } else {
                g.emit_json(&out)?;
            }
        }
        Command::Sweep { spec } => {
            let spec = SweepSpec::from_json_str(&read(spec)?)?;
            let rows = run_sweep(&spec, &g.options()?)?;
            let mut out = g.sink()?;
            write_sweep_csv(&spec, &rows, &mut out)?;
            out.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LCL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lcl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
