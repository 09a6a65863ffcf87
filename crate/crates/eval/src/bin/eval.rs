use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use earshot_core::{decode_wav, default_policy, ScoringPolicy};
use earshot_eval::rates::parse_grid;
use earshot_eval::{
    compute_far, compute_frr, optimize_bands, simulate_same_media, sweep_eer, synth_generate,
    synthetic_broadcast, tau_grid, write_curve_csv, write_rates_csv, DelayDistribution, GroupBy,
    Manifest, PairKind, RateReport, SameMediaConfig, SynthSpec,
};

/// Evaluation harness for ambient-audio co-location scoring.
#[derive(Debug, Parser)]
#[command(name = "earshot-eval", version)]
struct Cli {
    /// Scoring policy TOML (tau_c, tau_db, ell_max_ms, band_low_hz, band_high_hz).
    #[arg(long, global = true)]
    policy: Option<PathBuf>,
    /// Directory for JSON reports and CSV output.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// False rejection rate of the manifest's logins.
    Frr {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "environment")]
        group_by: GroupBy,
    },
    /// False acceptance rate over cross-subject and impostor pairs.
    Far {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Threshold sweep and equal error rate at the policy's band set.
    Eer {
        #[arg(long)]
        manifest: PathBuf,
        /// `lo:hi:step` or a comma-separated list.
        #[arg(long)]
        tau_grid: Option<String>,
    },
    /// Band set and threshold minimizing alpha·FRR + (1-alpha)·FAR.
    OptimizeBands {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        tau_grid: Option<String>,
    },
    /// Attack by an adversary playing the same broadcast with a provider delay.
    SameMedia {
        /// Broadcast WAV; a seeded synthetic broadcast when omitted.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Fixed delay, or `lo,hi` for a uniform draw.
        #[arg(long, default_value = "0")]
        delay_ms: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Writes a seeded synthetic corpus and its manifest.
    Synth {
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 50.0)]
        lag_ms: f64,
        /// Draw each pair's lag uniformly from [0, lag_ms].
        #[arg(long)]
        random_lag: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "colocated")]
        kind: PairKind,
        #[arg(long, default_value_t = 2)]
        subjects: usize,
    },
    /// Converts saved JSON reports to rates.csv and curve.csv.
    Report { inputs: Vec<PathBuf> },
}

fn load_policy(path: Option<&Path>) -> anyhow::Result<ScoringPolicy> {
    match path {
        None => Ok(default_policy()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn grid(s: Option<&str>) -> anyhow::Result<Vec<f64>> {
    Ok(match s {
        Some(s) => parse_grid(s)?,
        None => tau_grid(0.005)?,
    })
}

fn print_report(r: &RateReport) {
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
    println!(
        "{} {:?}: {}/{} = {} (excluded {})",
        r.name,
        r.metric,
        r.overall.numerator,
        r.overall.denominator,
        fmt(r.rate()),
        r.overall.excluded
    );
    for g in &r.groups {
        println!(
            "  {:<16} {:>6}/{:<6} {} (excluded {})",
            g.label,
            g.numerator,
            g.denominator,
            fmt(g.rate()),
            g.excluded
        );
    }
    if let Some(e) = r.eer {
        println!("  EER {:.6} at tau {:.4}", e.rate, e.tau);
    }
}

fn save(out_dir: Option<&Path>, name: &str, r: &RateReport) -> anyhow::Result<()> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{name}.json"));
        fs::write(&path, serde_json::to_vec_pretty(r)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let policy = load_policy(cli.policy.as_deref())?;
    let out = cli.out_dir.as_deref();
    match cli.cmd {
        Cmd::Frr { manifest, group_by } => {
            let r = compute_frr(&Manifest::load(&manifest)?, &policy, group_by)?;
            print_report(&r);
            save(out, "frr", &r)?;
        }
        Cmd::Far { manifest } => {
            let r = compute_far(&Manifest::load(&manifest)?, &policy)?;
            print_report(&r);
            save(out, "far", &r)?;
        }
        Cmd::Eer { manifest, tau_grid } => {
            let r = sweep_eer(
                &Manifest::load(&manifest)?,
                &policy,
                &grid(tau_grid.as_deref())?,
            )?;
            print_report(&r);
            save(out, "eer", &r)?;
        }
        Cmd::OptimizeBands {
            manifest,
            alpha,
            tau_grid,
        } => {
            let o = optimize_bands(
                &Manifest::load(&manifest)?,
                &policy,
                alpha,
                &grid(tau_grid.as_deref())?,
            )?;
            println!("searched {} band sets", o.candidates);
            println!(
                "optimum {} tau_c {} objective {:.6} (FRR {:.6}, FAR {:.6})",
                o.band_set, o.tau_c, o.objective, o.frr, o.far
            );
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("optimum.json"), serde_json::to_vec_pretty(&o)?)?;
            }
        }
        Cmd::SameMedia {
            source,
            delay_ms,
            trials,
            seed,
            snr_db,
        } => {
            let delay = match delay_ms.split_once(',') {
                Some((lo, hi)) => DelayDistribution::Uniform {
                    lo_ms: lo.trim().parse()?,
                    hi_ms: hi.trim().parse()?,
                },
                None => DelayDistribution::Fixed {
                    ms: delay_ms.trim().parse()?,
                },
            };
            let mut cfg = SameMediaConfig::new(delay, trials, seed);
            cfg.snr_db = snr_db;
            let src = match source {
                Some(p) => decode_wav(&fs::read(&p)?)?,
                None => synthetic_broadcast(
                    seed,
                    (delay.max_ms() as u32).saturating_add(cfg.record_ms + 5000),
                ),
            };
            let r = simulate_same_media(&src, &cfg, &policy)?;
            print_report(&r);
            save(out, "same_media", &r)?;
        }
        Cmd::Synth {
            pairs,
            snr_db,
            lag_ms,
            random_lag,
            seed,
            kind,
            subjects,
        } => {
            let Some(dir) = out else {
                bail!("synth needs --out-dir");
            };
            let mut spec = SynthSpec::new(pairs, snr_db, lag_ms, seed, kind);
            spec.random_lag = random_lag;
            spec.subjects = subjects;
            let m = synth_generate(&spec, dir)?;
            println!(
                "wrote {} pairs and manifest.jsonl to {}",
                m.entries.len(),
                dir.display()
            );
        }
        Cmd::Report { inputs } => {
            let reports = inputs
                .iter()
                .map(|p| -> anyhow::Result<RateReport> {
                    serde_json::from_slice(&fs::read(p)?).with_context(|| p.display().to_string())
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let dir = out.unwrap_or(Path::new("."));
            fs::create_dir_all(dir)?;
            write_rates_csv(&reports, fs::File::create(dir.join("rates.csv"))?)?;
            write_curve_csv(&reports, fs::File::create(dir.join("curve.csv"))?)?;
            println!("wrote rates.csv and curve.csv to {}", dir.display());
        }
    }
    Ok(())
}
