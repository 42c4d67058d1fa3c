//! `insarlab` command line: simulate, train, infer, baseline, eval, gradcheck.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use insarlab::baselines::boxcar_filter;
use insarlab::metrics::evaluate_dataset;
use insarlab::network::{
    grad_check, infer, load_checkpoint, load_training_set, save_checkpoint, train, ModelSpec, TrainConfig,
};
use insarlab::simulator::{generate_dataset, parse_config_list, Manifest};
use insarlab::{form_interferogram, read_raster, write_raster, Error, SlcImage};

const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Parser, Debug)]
#[command(
    name = "insarlab",
    version,
    about = "InSAR phase filtering and coherence estimation lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a simulated dataset and its manifest.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Comma separated labels such as S1-F3-NS, or `all`.
        #[arg(long)]
        configs: String,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Train the lite network on a manifest and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iters: usize,
        #[arg(long)]
        batch: usize,
        #[arg(long)]
        patch: usize,
        #[arg(long)]
        lr: f64,
        #[arg(long)]
        seed: u64,
        /// Single-threaded, bit-reproducible run.
        #[arg(long)]
        deterministic: bool,
    },
    /// Filter an SLC pair with a trained checkpoint.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: PairIo,
    },
    /// Classical filters.
    #[command(subcommand)]
    Baseline(Baseline),
    /// Score predictions against a dataset's truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Finite-difference check of the network gradients.
    Gradcheck {
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum Baseline {
    /// Boxcar phase filter and amplitude coherence.
    Boxcar {
        #[arg(long)]
        window: usize,
        #[command(flatten)]
        io: PairIo,
    },
}

#[derive(Args, Debug)]
struct PairIo {
    #[arg(long = "slc1-amp")]
    slc1_amp: PathBuf,
    #[arg(long = "slc1-phase")]
    slc1_phase: PathBuf,
    #[arg(long = "slc2-amp")]
    slc2_amp: PathBuf,
    #[arg(long = "slc2-phase")]
    slc2_phase: PathBuf,
    #[arg(long = "out-phase")]
    out_phase: PathBuf,
    #[arg(long = "out-coh")]
    out_coh: PathBuf,
}

impl PairIo {
    fn read(&self) -> Result<(SlcImage, SlcImage), Error> {
        let s1 = SlcImage::new(read_raster(&self.slc1_amp)?, read_raster(&self.slc1_phase)?)?;
        let s2 = SlcImage::new(read_raster(&self.slc2_amp)?, read_raster(&self.slc2_phase)?)?;
        Ok((s1, s2))
    }

    fn write(&self, phase: &insarlab::Raster, coherence: &insarlab::Raster) -> Result<(), Error> {
        write_raster(phase, &self.out_phase)?;
        write_raster(coherence, &self.out_coh)
    }
}

fn manifest_summary(m: &Manifest, out: &Path) {
    eprintln!("wrote {} samples and {}", m.len(), out.join("manifest.json").display());
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate {
            out,
            configs,
            count,
            size,
            seed,
        } => {
            let cfgs = parse_config_list(&configs)?
                .into_iter()
                .map(|label| label.config(size, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let manifest = generate_dataset(&cfgs, count, &out)?;
            manifest_summary(&manifest, &out);
        }
        Command::Train {
            data,
            out,
            iters,
            batch,
            patch,
            lr,
            seed,
            deterministic,
        } => {
            let manifest = Manifest::load(&data)?;
            let set = load_training_set(&manifest)?;
            let cfg = TrainConfig {
                spec: ModelSpec::lite(),
                iters,
                batch,
                patch,
                lr,
                seed,
                deterministic,
                log_every: 100,
            };
            eprintln!("training on {} samples for {iters} iterations", set.len());
            let params = train(&set, &cfg, |log| {
                eprintln!("{}", serde_json::to_string(log).expect("log serializes"));
            })?;
            save_checkpoint(&params, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Infer { model, io } => {
            let params = load_checkpoint(&model)?;
            let (s1, s2) = io.read()?;
            let pred = infer(&params, &s1, &s2)?;
            io.write(&pred.phase, &pred.coherence)?;
        }
        Command::Baseline(Baseline::Boxcar { window, io }) => {
            let (s1, s2) = io.read()?;
            let ifg = form_interferogram(&s1, &s2)?;
            let out = boxcar_filter(&ifg, s1.amplitude(), s2.amplitude(), window)?;
            io.write(&out.phase, &out.coherence)?;
        }
        Command::Eval { pred, manifest, report } => {
            let m = Manifest::load(&manifest)?;
            let r = evaluate_dataset(&pred, &m)?;
            r.save(&report)?;
            for g in &r.grand.methods {
                eprintln!(
                    "{}: phase_rmse {:.4} ssim {:.4} coh_rmse {:.4}",
                    g.name, g.phase_rmse, g.ssim, g.coh_rmse
                );
            }
        }
        Command::Gradcheck { seed } => {
            let report = grad_check(ModelSpec::micro(), seed)?;
            eprintln!(
                "checked {} parameters ({} re-drawn at ReLU kinks), max relative error {:.3e}",
                report.entries.len(),
                report.redrawn,
                report.max_rel_err
            );
            if report.max_rel_err >= GRADCHECK_TOLERANCE {
                eprintln!("gradient check failed: tolerance {GRADCHECK_TOLERANCE:e}");
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
