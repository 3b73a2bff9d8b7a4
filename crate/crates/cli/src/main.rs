use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use conjdense::harness::{self, canonical_json, deviation_csv, OUT_DIR_ENV};
use conjdense::independence::Literal;
use conjdense::rational::{self, parse_rational, Rational};
use conjdense::towers::{build_tower, openness_certificate, perturb};
use conjdense::{
    certify_conjugate, emit_reports, find_half_measure_independent_set, Basis, CellSet, ConjugacyParams,
    ExperimentConfig, GridMap, GridSpace, MapKind, MetricRow, ReportFormat,
};

/// Exact-rational workbench for conjugacy certificates near the Bernoulli
/// shift, independence searches and Rokhlin towers.
///
/// Rationals are read and written as "p/q" strings. Exit status is 0 when
/// every verdict passes, 1 when a verdict fails, and 2 on errors.
#[derive(Parser)]
#[command(name = "conjdense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapArg {
    Hash,
    Bitrev,
    Odometer,
    Cyclic,
    Identity,
    Random,
}

impl From<MapArg> for MapKind {
    fn from(arg: MapArg) -> Self {
        match arg {
            MapArg::Hash => MapKind::Hash,
            MapArg::Bitrev => MapKind::Bitrev,
            MapArg::Odometer => MapKind::Odometer,
            MapArg::Cyclic => MapKind::Cyclic,
            MapArg::Identity => MapKind::Identity,
            MapArg::Random => MapKind::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Print the CSV row `d,a,tau_W,W` comparing two maps over a basis.
    Metrics {
        /// First map as JSON `{"resolution": N, "forward": [...]}`.
        #[arg(long)]
        left: PathBuf,
        /// Second map, same format and resolution.
        #[arg(long)]
        right: PathBuf,
        /// Basis as JSON `{"sets": [{"resolution": N, "cells": [...]}, ...]}`.
        #[arg(long)]
        basis: PathBuf,
        /// Power window W for the leash metric tau_W.
        #[arg(long, default_value_t = 4)]
        window: u32,
    },
    /// Search for a half-measure set whose images are well independent and
    /// print the JSON report.
    Independence {
        /// Grid resolution is 2^L cells.
        #[arg(long, default_value_t = 12)]
        resolution_log2: u32,
        /// Map to search under.
        #[arg(long, value_enum, default_value = "hash")]
        map: MapArg,
        /// Independence window M: the family is {S^m A : |m| <= M}.
        #[arg(long)]
        window: u32,
        /// Target deviation as "p/q"; a trial succeeds strictly below it.
        #[arg(long)]
        delta: String,
        /// Largest intersection size; defaults to 2M + 1.
        #[arg(long)]
        cardinality: Option<usize>,
        /// Seed of the ChaCha8 trial streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random trials.
        #[arg(long, default_value_t = 64)]
        trials: u64,
    },
    /// Build V = Q⁻¹SQ near the Bernoulli shift and write its certificate
    /// (`conjugate.certificate.json`) and deviation table
    /// (`conjugate.deviations.csv`).
    Conjugate {
        /// Neighborhood radius as "p/q".
        #[arg(long)]
        epsilon: String,
        /// Atom rank: the neighborhood is over the 2^(2k+1) rank-k atoms.
        #[arg(long, default_value_t = 0)]
        k: u32,
        /// Power window W of the certificate.
        #[arg(long, default_value_t = 3)]
        window: u32,
        /// Independence window M; defaults to k + W.
        #[arg(long)]
        independence_window: Option<u32>,
        /// Grid resolution is 2^L cells; needs L >= 2k + 1.
        #[arg(long, default_value_t = 14)]
        resolution_log2: u32,
        /// Map S to conjugate.
        #[arg(long, value_enum, default_value = "hash")]
        map: MapArg,
        /// Seed of the ChaCha8 trial streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random trials in the independence search.
        #[arg(long, default_value_t = 64)]
        trials: u64,
        /// Output directory.
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Build a tower of the given height, perturb the map by transpositions,
    /// and print the openness certificate as JSON.
    Towers {
        /// Tower height n (at least 2).
        #[arg(long)]
        height: usize,
        /// Test sets as a JSON list of `{"resolution": N, "cells": [...]}`.
        #[arg(long)]
        sets: PathBuf,
        /// Accuracy threshold 1/k.
        #[arg(long)]
        k: u64,
        /// Seed of the perturbation stream.
        #[arg(long)]
        perturb: u64,
        /// Number of transpositions composed onto the map.
        #[arg(long, default_value_t = 1)]
        swaps: usize,
        /// Power window for measuring the perturbation size b_eff.
        #[arg(long, default_value_t = 1)]
        window: u32,
        /// Map carrying the tower.
        #[arg(long, value_enum, default_value = "cyclic")]
        map: MapArg,
    },
    /// Run the full pipeline from a JSON config and write its reports.
    Run {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Report formats to write.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "json,csv")]
        format: Vec<FormatArg>,
        /// Output directory; overrides `output.dir` of the config.
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn rational_arg(flag: &str, text: &str) -> Result<Rational> {
    parse_rational(text).with_context(|| format!("--{flag}"))
}

#[derive(Serialize)]
struct IndependenceOutput {
    #[serde(with = "rational::as_str")]
    deviation: Rational,
    witness: Vec<Literal>,
    cardinality: usize,
    window: u32,
    #[serde(with = "rational::as_str")]
    target: Rational,
    success: bool,
    trials_used: u64,
    best_trial: u64,
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Metrics { left, right, basis, window } => {
            let p: GridMap = read_json(&left)?;
            let r: GridMap = read_json(&right)?;
            let basis: Basis = read_json(&basis)?;
            let row = MetricRow::compute(&p, &r, &basis, window)?;
            println!("{}", MetricRow::CSV_HEADER);
            println!("{}", row.to_csv());
            Ok(true)
        }
        Command::Independence { resolution_log2, map, window, delta, cardinality, seed, trials } => {
            let space = GridSpace::with_log2(resolution_log2)?;
            let s = MapKind::from(map).build(space, seed);
            let target = rational_arg("delta", &delta)?;
            let outcome = find_half_measure_independent_set(&s, window, cardinality, &target, seed, trials)?;
            let out = IndependenceOutput {
                deviation: outcome.report.deviation,
                witness: outcome.report.witness,
                cardinality: outcome.report.cardinality_bound,
                window,
                target,
                success: outcome.success,
                trials_used: outcome.trials_used,
                best_trial: outcome.best_trial,
            };
            print!("{}", canonical_json(&out)?);
            Ok(outcome.success)
        }
        Command::Conjugate {
            epsilon,
            k,
            window,
            independence_window,
            resolution_log2,
            map,
            seed,
            trials,
            out_dir,
        } => {
            let space = GridSpace::with_log2(resolution_log2)?;
            let s = MapKind::from(map).build(space, seed);
            let params = ConjugacyParams {
                k,
                epsilon: rational_arg("epsilon", &epsilon)?,
                window,
                independence_window: independence_window.unwrap_or(k + window),
                seed,
                trials,
            };
            let run = certify_conjugate(&s, &params)?;
            let cert = &run.certificate;
            std::fs::create_dir_all(&out_dir)?;
            let json = out_dir.join("conjugate.certificate.json");
            let csv = out_dir.join("conjugate.deviations.csv");
            std::fs::write(&json, canonical_json(cert)?)?;
            std::fs::write(&csv, deviation_csv(&cert.deviations))?;
            println!("{}", json.display());
            println!("{}", csv.display());
            eprintln!(
                "max deviation {} (bound {}, eps2 {}): {}",
                rational::format_rational(&cert.max_deviation),
                rational::format_rational(&cert.bound),
                rational::format_rational(&cert.ledger.eps2),
                if cert.pass { "pass" } else { "fail" }
            );
            Ok(cert.pass)
        }
        Command::Towers { height, sets, k, perturb: seed, swaps, window, map } => {
            let sets: Vec<CellSet> = read_json(&sets)?;
            let Some(first) = sets.first() else { bail!("--sets must list at least one set") };
            let space = first.space();
            let s = MapKind::from(map).build(space, seed);
            let tower = build_tower(&s, height)?;
            let v = perturb(&s, seed, swaps)?;
            let cert = openness_certificate(&s, &tower, k, &sets, &v, window)?;
            print!("{}", canonical_json(&cert)?);
            Ok(cert.pass && cert.chain_holds)
        }
        Command::Run { config, format, out_dir } => {
            let config = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let (record, timings) = harness::run_experiment_timed(&config)?;
            for (stage, elapsed) in &timings.0 {
                eprintln!("stage {stage}: {:.3}s", elapsed.as_secs_f64());
            }
            let dir = out_dir.unwrap_or_else(|| PathBuf::from(&config.output.dir));
            let formats: Vec<ReportFormat> = format
                .iter()
                .map(|f| match f {
                    FormatArg::Json => ReportFormat::Json,
                    FormatArg::Csv => ReportFormat::Csv,
                })
                .collect();
            for path in emit_reports(&record, &dir, &formats)? {
                println!("{}", path.display());
            }
            for (name, ok) in &record.verdicts {
                eprintln!("{name}: {}", if *ok { "pass" } else { "fail" });
            }
            Ok(record.all_pass())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
