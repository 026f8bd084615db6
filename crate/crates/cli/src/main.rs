use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rssikey_core::pipeline::{self, files, Overrides, PipelineConfig, ReconcileStatus};
use rssikey_core::{CodePreset, Error, MetricsReport, PipelineReport};

/// Secret keys from reciprocal LoRa RSSI measurements.
#[derive(Parser)]
#[command(name = "rssikey", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all stages: simulate, quantize, reconcile, amplify, evaluate.
    Run(Common),
    /// Simulate a probing session and write trace_{a,b,e}.csv.
    Simulate(Common),
    /// Quantize trace_{a,b}.csv into kept_{a,b}.csv and bits_{a,b}.txt.
    Quantize(Common),
    /// Build (or load) the secure sketch and check Bob's recovery.
    Reconcile {
        #[command(flatten)]
        common: Common,
        /// Use this sketch instead of generating one.
        #[arg(long)]
        sketch: Option<PathBuf>,
    },
    /// Confirm key agreement and hash the keys down to --key-bits.
    Amplify(Common),
    /// Compute metrics and randomness results. With --trace-a and --trace-b
    /// only the metrics of those traces are computed.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "trace_b")]
        trace_a: Option<PathBuf>,
        #[arg(long, requires = "trace_a")]
        trace_b: Option<PathBuf>,
        #[arg(long, requires = "trace_a")]
        trace_e: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Pipeline or simulator TOML file. Defaults to the outdoor_urban preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<u32>,
    #[arg(long, value_parser = parse_code)]
    code: Option<CodePreset>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Significance level of the randomness tests [default: 0.01].
    #[arg(long)]
    alpha: Option<f64>,
    /// Final key length in bits [default: 128].
    #[arg(long)]
    key_bits: Option<usize>,
}

fn parse_code(s: &str) -> Result<CodePreset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn config(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            epsilon: self.epsilon,
            code: self.code,
            alpha: self.alpha,
            key_bits: self.key_bits,
        })?;
        Ok(cfg)
    }
}

fn print_metrics(m: &MetricsReport) {
    println!("rho                 {:.4}", m.rho);
    println!("kdr                 {:.4}", m.kdr);
    println!("I(A;B)              {:.4} bits", m.mi_ab_bits);
    println!("I(A;E)              {:.4} bits", m.mi_ae_bits);
    println!("I(B;E)              {:.4} bits", m.mi_be_bits);
    println!("capacity bound      {:.4} bits", m.csk_lower_bits);
}

fn print_report(r: &PipelineReport) {
    println!("probe pairs         {}", r.probe_pairs);
    println!("bit yield           {:.4}", r.bit_yield);
    println!("key length          {}", r.key_length);
    println!("effective entropy   {}", r.effective_entropy_bits);
    print_metrics(&r.metrics);
    if let Some(e) = r.eve_kdr {
        println!("eve kdr             {e:.4}");
    }
    match &r.reconcile_status {
        ReconcileStatus::Success => println!("reconciliation      success"),
        ReconcileStatus::Failure { failed_blocks } => {
            println!("reconciliation      failed in blocks {failed_blocks:?}")
        }
    }
    println!("keys match          {}", r.keys_match);
    println!("amplification       {}", r.amplification.as_str());
    println!();
    print!("{}", r.nist.render_table());
}

fn evaluate_only(common: &Common, a: &Path, b: &Path, e: Option<&Path>) -> anyhow::Result<u8> {
    let cfg = common.config()?;
    let ta = pipeline::read_trace(a, "alice")?;
    let tb = pipeline::read_trace(b, "bob")?;
    let te = e.map(|p| pipeline::read_trace(p, "eve")).transpose()?;
    let m = pipeline::evaluate_traces(&ta, &tb, te.as_ref(), cfg.quantizer(), cfg.mi_bins)?;
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    let path = common.out.join(files::METRICS);
    std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    print_metrics(&m);
    Ok(0)
}

fn dispatch(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Run(c) => {
            let cfg = c.config()?;
            let r = pipeline::run_pipeline(&cfg, &c.out)?;
            print_report(&r);
            Ok(r.exit_code() as u8)
        }
        Command::Simulate(c) => {
            pipeline::simulate(&c.config()?, &c.out)?;
            println!("wrote traces to {}", c.out.display());
            Ok(0)
        }
        Command::Quantize(c) => {
            let q = pipeline::quantize(&c.config()?, &c.out)?;
            println!("probe pairs         {}", q.probe_pairs);
            println!("kept by alice       {}", q.kept_a.len());
            println!("kept by bob         {}", q.kept_b.len());
            println!("shared key bits     {}", q.bits_a.len());
            Ok(0)
        }
        Command::Reconcile { common, sketch } => {
            let (msg, status) =
                pipeline::reconcile(&common.config()?, &common.out, sketch.as_deref())?;
            println!("blocks              {}", msg.block_count);
            match status {
                ReconcileStatus::Success => {
                    println!("reconciliation      success");
                    Ok(0)
                }
                ReconcileStatus::Failure { failed_blocks } => {
                    println!("reconciliation      failed in blocks {failed_blocks:?}");
                    Ok(2)
                }
            }
        }
        Command::Amplify(c) => {
            let keys = pipeline::amplify_keys(&c.config()?, &c.out)?;
            println!("keys match          {}", keys.keys_match);
            println!("effective entropy   {}", keys.effective_entropy_bits);
            println!("amplification       {}", keys.amplification.as_str());
            if let Some(k) = &keys.final_key_a {
                println!("final key           {k}");
            }
            Ok(keys.exit_code() as u8)
        }
        Command::Evaluate {
            common,
            trace_a,
            trace_b,
            trace_e,
        } => match (trace_a, trace_b) {
            (Some(a), Some(b)) => evaluate_only(&common, &a, &b, trace_e.as_deref()),
            _ => {
                let r = pipeline::evaluate(&common.config()?, &common.out)?;
                print_report(&r);
                Ok(0)
            }
        },
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Reconcile { .. }) => 2,
        Some(Error::EntropyBudget { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
