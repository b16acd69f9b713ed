//! nleq — experiment CLI over the link simulator and equalizers.
//!
//! Every subcommand reads one TOML experiment config (all keys optional,
//! unknown keys rejected), runs a deterministic pipeline, writes its
//! CSV/SVG/weight outputs into the configured directory and prints a short
//! summary. Exit codes: 0 success, 2 bad config or I/O, 3 numerical
//! failure, 4 out-of-range target.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nleq::harness::csvout::{curves_csv, sweep_csv, write_text};
use nleq::harness::svg::{line_chart, ChartSpec, Series};
use nleq::harness::{
    calibrate_nonlinearity, load_code, required_snr, run_final_comparison, run_penalty,
    run_training_snr_sweep, run_waterfall, BerCurve, ExperimentConfig,
};
use nleq::nnbp;
use nleq::volterra::train_at_snr;
use nleq::{Error, Result};

#[derive(Parser)]
#[command(name = "nleq", version, about = "Link-level equalization experiments")]
struct Cli {
    /// Experiment config file (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the run seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find the sinusoid scale that hits the target nonlinearity strength
    /// ratio; writes calibration.txt.
    Calibrate,
    /// Fit a Volterra model at the configured training SNR; writes
    /// volterra.txt.
    FitVolterra,
    /// Train the NN+BP equalizer stage by stage; writes nnbp-weights.txt.
    TrainNn,
    /// Simulate the configured receiver's BER waterfall; writes
    /// waterfall.csv/.svg.
    Waterfall,
    /// Sweep the Volterra training SNR and decompose each model's penalty;
    /// writes sweep.csv/.svg.
    SweepTrainSnr,
    /// Decompose the configured Volterra receiver's penalty into
    /// nonlinear-distortion and noise-enhancement parts; writes penalty.txt.
    Penalty,
    /// Compare all six receivers on one channel; writes compare.csv/.svg.
    Compare,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.channel.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ber_series(curves: &[BerCurve]) -> Vec<Series> {
    curves
        .iter()
        .map(|c| Series {
            label: c.label.clone(),
            points: c.points.iter().map(|p| (p.snr_db, p.postbp_ber())).collect(),
        })
        .collect()
}

fn print_curve(curve: &BerCurve) {
    for p in &curve.points {
        println!(
            "  {:>6.2} dB: {:>4} frames, pre-FEC BER {:.3e}, post-BP BER {:.3e}",
            p.snr_db,
            p.frames,
            p.prefec_ber(),
            p.postbp_ber()
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = PathBuf::from(&cfg.output_dir);
    match cli.cmd {
        Cmd::Calibrate => {
            let rep = calibrate_nonlinearity(&cfg)?;
            write_text(&out, "calibration.txt", &rep.to_text())?;
            println!(
                "calibrated nl_amplitude = {:.4}: strength ratio {:.4} (target {}), {} evaluations",
                rep.a,
                rep.ratio,
                rep.target,
                rep.evals.len()
            );
            println!("wrote {}", out.join("calibration.txt").display());
        }
        Cmd::FitVolterra => {
            let eq = &cfg.equalizer;
            let (model, fit) =
                train_at_snr(&cfg.channel, eq.l, eq.vlt_train_snr_db, eq.vlt_train_frames)?;
            std::fs::create_dir_all(&out).map_err(Error::Io)?;
            let path = out.join("volterra.txt");
            model.save(&path)?;
            println!(
                "fitted Volterra L = {} at {} dB: {} rows, train MSE {:.4e}, ridge {:.2e}",
                eq.l, eq.vlt_train_snr_db, fit.n_rows, fit.train_mse, fit.ridge
            );
            println!("wrote {}", path.display());
        }
        Cmd::TrainNn => {
            let eq = &cfg.equalizer;
            let code = load_code(&cfg)?;
            let report = nnbp::train(&cfg.channel, &code, eq.dims(), &eq.schedule(), &eq.hyper())?;
            std::fs::create_dir_all(&out).map_err(Error::Io)?;
            let path = out.join("nnbp-weights.txt");
            nnbp::save_weights(&path, &report.stages, &report.schedule)?;
            for (k, trace) in report.epoch_loss.iter().enumerate() {
                println!(
                    "stage {k}: loss {:.4} -> {:.4} over {} epochs",
                    trace[0],
                    trace.last().unwrap(),
                    trace.len() - 1
                );
            }
            println!("wrote {}", path.display());
        }
        Cmd::Waterfall => {
            let curve = run_waterfall(&cfg)?;
            write_text(&out, "waterfall.csv", &curves_csv(std::slice::from_ref(&curve)))?;
            let chart = ChartSpec {
                title: format!("BER waterfall ({})", curve.label),
                x_label: "SNR (dB)".into(),
                y_label: "post-BP BER".into(),
                log_y: true,
                series: ber_series(std::slice::from_ref(&curve)),
            };
            write_text(&out, "waterfall.svg", &line_chart(&chart))?;
            println!("waterfall ({}):", curve.label);
            print_curve(&curve);
            match required_snr(&curve, cfg.target_ber) {
                Ok(r) => println!("required SNR for post-BP BER {}: {:.3} dB", cfg.target_ber, r),
                Err(Error::Range(msg)) => println!("target BER {} not reached: {msg}", cfg.target_ber),
                Err(e) => return Err(e),
            }
            println!("wrote {}", out.join("waterfall.csv").display());
            println!("wrote {}", out.join("waterfall.svg").display());
        }
        Cmd::SweepTrainSnr => {
            let rows = run_training_snr_sweep(&cfg)?;
            write_text(&out, "sweep.csv", &sweep_csv(&rows))?;
            let pick = |f: fn(&nleq::noisefig::PenaltyReport) -> f64| -> Vec<(f64, f64)> {
                rows.iter().map(|r| (r.train_snr_db, f(r))).collect()
            };
            let chart = ChartSpec {
                title: "Penalty decomposition vs training SNR".into(),
                x_label: "training SNR (dB)".into(),
                y_label: "penalty (dB)".into(),
                log_y: false,
                series: vec![
                    Series { label: "NE penalty".into(), points: pick(|r| r.ne_penalty_db) },
                    Series { label: "NL penalty".into(), points: pick(|r| r.nl_penalty_db) },
                    Series { label: "total".into(), points: pick(|r| r.total_db) },
                    Series { label: "noise figure".into(), points: pick(|r| r.nf_db) },
                ],
            };
            write_text(&out, "sweep.svg", &line_chart(&chart))?;
            for r in &rows {
                println!(
                    "train {:>5.1} dB: NE {:.3} dB, NL {:.3} dB, total {:.3} dB, NF {:.3} dB",
                    r.train_snr_db, r.ne_penalty_db, r.nl_penalty_db, r.total_db, r.nf_db
                );
            }
            let best = rows
                .iter()
                .min_by(|a, b| a.total_db.total_cmp(&b.total_db))
                .expect("sweep rows are nonempty");
            println!(
                "minimum total penalty {:.3} dB at training SNR {} dB",
                best.total_db, best.train_snr_db
            );
            println!("wrote {}", out.join("sweep.csv").display());
            println!("wrote {}", out.join("sweep.svg").display());
        }
        Cmd::Penalty => {
            let rep = run_penalty(&cfg)?;
            let text = format!(
                "train_snr_db = {}\nne_penalty_db = {}\nnl_penalty_db = {}\ntotal_db = {}\nnf_db = {}\n",
                rep.train_snr_db, rep.ne_penalty_db, rep.nl_penalty_db, rep.total_db, rep.nf_db
            );
            write_text(&out, "penalty.txt", &text)?;
            println!(
                "model trained at {} dB: NE penalty {:.3} dB, NL penalty {:.3} dB, total {:.3} dB \
                 (analytic noise figure {:.3} dB)",
                rep.train_snr_db, rep.ne_penalty_db, rep.nl_penalty_db, rep.total_db, rep.nf_db
            );
            println!("wrote {}", out.join("penalty.txt").display());
        }
        Cmd::Compare => {
            let rep = run_final_comparison(&cfg)?;
            write_text(&out, "compare.csv", &curves_csv(&rep.curves))?;
            let chart = ChartSpec {
                title: "Receiver comparison".into(),
                x_label: "SNR (dB)".into(),
                y_label: "post-BP BER".into(),
                log_y: true,
                series: ber_series(&rep.curves),
            };
            write_text(&out, "compare.svg", &line_chart(&chart))?;
            for (label, r) in &rep.required_snr_db {
                println!("  {label:<12} required SNR {r:>7.3} dB");
            }
            if rep.ordering_ok() {
                println!("required-SNR ordering holds");
            } else {
                for v in &rep.ordering_violations {
                    println!("ordering violation: {v}");
                }
            }
            println!(
                "NN-BP(3) gain: {:.3} dB over fixed Volterra, {:.3} dB over no equalizer",
                rep.nn_gain_over_vlt_db, rep.nn_gain_over_noeq_db
            );
            println!("wrote {}", out.join("compare.csv").display());
            println!("wrote {}", out.join("compare.svg").display());
        }
    }
    Ok(())
}
