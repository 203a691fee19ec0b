use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use log::{info, warn};
use rntk_core::harness::{
    load_dataset, run_protocol, splits_for, timing_sweep, BenchReport, Method, PmaMode,
    ProtocolOptions, TimingConfig,
};
use rntk_core::kernel::io::{save_gram, write_csv};
use rntk_core::kernel::{gram_with, GramOptions};
use rntk_core::oracle::{verify_grid, OracleConfig, VerifyGrid};
use rntk_core::{Error, HyperParams, KernelKind};
use serde_json::json;

use crate::args::{BenchArgs, GramArgs, TimingArgs, VerifyArgs};

/// Exit code for rejected flag values, matching clap's usage errors.
const USAGE: u8 = 2;

type CmdResult = Result<ExitCode, Error>;

fn usage(msg: impl std::fmt::Display) -> CmdResult {
    eprintln!("error: {msg}");
    eprintln!("For more information, try '--help'.");
    Ok(ExitCode::from(USAGE))
}

fn output<'a>(path: &Option<PathBuf>) -> Result<Box<dyn Write + 'a>, Error> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn gram(a: &GramArgs, tile_size: usize) -> CmdResult {
    let params = match HyperParams::new(a.sigma_w, a.sigma_u, a.sigma_b, a.sigma_v, a.depth) {
        Ok(p) => p,
        Err(e) => return usage(e),
    };
    let data = load_dataset(&a.data)?;
    let pair = gram_with(&data.features, &params, a.variant, &GramOptions { tile_size })?;
    fs::create_dir_all(&a.out)?;
    for kind in KernelKind::BOTH {
        let path = a.out.join(format!("{}.gram", kind.name()));
        save_gram(&path, pair.kernel(kind), kind, a.variant)?;
        if a.csv {
            let f = fs::File::create(a.out.join(format!("{}.csv", kind.name())))?;
            write_csv(std::io::BufWriter::new(f), pair.kernel(kind))?;
        }
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(a: &VerifyArgs) -> CmdResult {
    if a.depths.iter().chain(&a.lengths).any(|&v| v == 0) {
        return usage("depths and lengths must be positive");
    }
    let grid = VerifyGrid {
        depths: a.depths.clone(),
        lengths: a.lengths.clone(),
        variants: a.variants.clone(),
        ..VerifyGrid::default()
    };
    let cfg = OracleConfig {
        width: a.width,
        trials: a.trials,
        seed: a.seed,
    };
    let started = Instant::now();
    let records = verify_grid(&grid, &cfg)?;
    let failing: Vec<_> = records.iter().filter(|r| !r.passes(a.threshold)).collect();
    for r in &failing {
        eprintln!(
            "FAIL L={} T={} {} {}: analytic {:.6} estimate {:.6} +- {:.6} (z = {:+.2})",
            r.depth,
            r.length,
            r.variant,
            r.kernel.name(),
            r.analytic,
            r.estimate.mean,
            r.estimate.stderr,
            r.z
        );
    }
    let max_z = records.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let report = json!({
        "width": a.width,
        "trials": a.trials,
        "seed": a.seed,
        "threshold": a.threshold,
        "passed": failing.is_empty(),
        "max_abs_z": max_z,
        "seconds": started.elapsed().as_secs_f64(),
        "records": records,
    });
    let mut w = output(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    eprintln!(
        "{} of {} comparisons within |z| <= {} (max |z| = {max_z:.2})",
        records.len() - failing.len(),
        records.len(),
        a.threshold
    );
    Ok(if failing.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn dataset_files(path: &Path) -> Result<Vec<PathBuf>, Error> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn bench(a: &BenchArgs, tile_size: usize) -> CmdResult {
    let methods = a.methods.as_ref().map_or_else(|| Method::ALL.to_vec(), |m| m.0.clone());
    let opts = ProtocolOptions {
        methods: methods.clone(),
        tile_size,
        ..ProtocolOptions::default()
    };
    let files = dataset_files(&a.data)?;
    if files.is_empty() {
        return usage(format!("no CSV datasets found in {}", a.data.display()));
    }
    let mut results = Vec::new();
    for file in &files {
        let started = Instant::now();
        let outcome = load_dataset(file).and_then(|d| {
            let splits = splits_for(file, &d.name, d.n_points())?;
            run_protocol(&d, &splits, &opts)
        });
        match outcome {
            Ok(r) => {
                info!("{} done in {:.1}s", r.name, started.elapsed().as_secs_f64());
                results.push(r);
            }
            Err(e) => warn!("skipping {}: {e}", file.display()),
        }
    }
    if results.is_empty() {
        eprintln!("error: every dataset failed");
        return Ok(ExitCode::FAILURE);
    }
    let mode = if a.pma_strict {
        PmaMode::StrictCount
    } else {
        PmaMode::RatioMean
    };
    let report = BenchReport::build(&methods, results, mode)?;
    report.save(&a.out_json, &a.out_csv)?;

    print!("{:<12}", "dataset");
    for m in &methods {
        print!(" {:>11}", m.name());
    }
    println!();
    for (d, row) in report.datasets.iter().zip(&report.accuracy) {
        print!("{:<12}", d.name);
        for acc in row {
            print!(" {:>11.4}", acc);
        }
        println!();
    }
    println!("\n{:<12} {:>9} {:>9} {:>7} {:>7} {:>9}", "method", "acc_mean", "acc_std", "P95", "PMA", "friedman");
    for s in &report.summary {
        println!(
            "{:<12} {:>9.4} {:>9.4} {:>7.3} {:>7.3} {:>9.3}",
            s.method, s.acc_mean, s.acc_std, s.p95, s.pma, s.friedman_rank
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn timing(a: &TimingArgs, tile_size: usize) -> CmdResult {
    let cfg = TimingConfig {
        sizes: a.sizes.clone(),
        lengths: a.lengths.clone(),
        depths: a.depths.clone(),
        base_n: a.base_n,
        base_t: a.base_t,
        base_l: a.base_l,
        reps: a.reps,
        seed: a.seed,
        tile_size,
    };
    let all = cfg.sizes.iter().chain(&cfg.lengths).chain(&cfg.depths);
    if all.chain([&cfg.base_n, &cfg.base_t, &cfg.base_l]).any(|&v| v == 0) {
        return usage("sweep values must be positive");
    }
    let points = timing_sweep(&cfg)?;
    let mut w = output(&a.out)?;
    writeln!(w, "sweep,n,t,l,seconds,ratio_per_doubling,expected_low,expected_high")?;
    for p in &points {
        let (lo, hi) = p.sweep.bounds();
        let ratio = p.ratio.map_or_else(String::new, |r| format!("{r:.4}"));
        if p.within_bounds() == Some(false) {
            eprintln!("note: {} sweep ratio {ratio} per doubling is outside [{lo}, {hi}]", p.sweep.name());
        }
        writeln!(w, "{},{},{},{},{:.6},{ratio},{lo},{hi}", p.sweep.name(), p.n, p.t, p.l, p.seconds)?;
    }
    Ok(ExitCode::SUCCESS)
}
