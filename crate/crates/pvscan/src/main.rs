use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pvscan::{corpus, output, presets};
use pvscan_core::control::{assess, ControllerKind, DetectorConfig};
use pvscan_core::pv::sweep_curve;
use pvscan_core::sim::{run_closed_loop, Scenario};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "pvscan",
    version,
    about = "Partial-shading detection and ramp-scan GMPPT simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    Ramp,
    Po,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Ramp => ControllerKind::Ramp,
            Controller::Po => ControllerKind::PerturbObserve,
        }
    }
}

#[derive(clap::Args)]
struct Overrides {
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scan ramp rate in V/s.
    #[arg(long)]
    ramp_rate: Option<f64>,
    #[arg(long, value_enum)]
    controller: Option<Controller>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario closed loop; writes trace.csv and report.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// P-V curve of one timeline event (or a named test-array pattern) as CSV.
    Sweep {
        #[arg(long, conflicts_with = "pattern")]
        scenario: Option<PathBuf>,
        /// PSC1..PSC5 or a pattern string on the 3×5 test array.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long, default_value_t = 0)]
        event: usize,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detector criteria on the 3×5 test array (all five named patterns by default).
    Detect {
        #[arg(long)]
        pattern: Vec<String>,
        /// Disable the irradiance correction of the references.
        #[arg(long)]
        no_correction: bool,
        /// Write the rows as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded random batch; prints the aggregate and optionally writes it.
    Corpus {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        ramp_rate: Option<f64>,
        #[arg(long, value_enum, default_value = "ramp")]
        controller: Controller,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply(s: &mut Scenario, o: &Overrides) {
    if let Some(seed) = o.seed {
        s.seed = seed;
    }
    if let Some(r) = o.ramp_rate {
        s.controller.ramp_rate = r;
    }
    if let Some(c) = o.controller {
        s.controller.kind = c.into();
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run {
            scenario,
            out,
            overrides,
        } => {
            let mut s = pvscan::load_scenario(&scenario)?;
            apply(&mut s, &overrides);
            s.validate()?;
            let r = run_closed_loop(&s).context("closed-loop run")?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            output::emit_trace(&r.trace, &out.join("trace.csv"))?;
            output::emit_report(&r.report, &out.join("report.json"))?;
            for e in &r.report.events {
                println!(
                    "t={:.3}s {:<20} psc={:<5} scan={} final={:.1} W oracle={:.1} W ({:+.2}%)",
                    e.t_start,
                    e.pattern,
                    e.detected,
                    e.scan_duration
                        .map_or("-".into(), |d| format!("{:.1} ms", d * 1e3)),
                    e.final_power,
                    e.oracle_p,
                    -100.0 * e.deficit()
                );
            }
        }
        Cmd::Sweep {
            scenario,
            pattern,
            event,
            step,
            out,
        } => {
            let spec = match (scenario, pattern) {
                (Some(path), None) => {
                    let s = pvscan::load_scenario(&path)?;
                    if event >= s.timeline.len() {
                        bail!("event {event} out of range ({} events)", s.timeline.len());
                    }
                    s.array_at(event)?
                }
                (None, Some(p)) => presets::array(&presets::pattern(&p)?)?,
                _ => bail!("give --scenario or --pattern"),
            };
            let curve = sweep_curve(&spec, step)?;
            match out {
                Some(path) => output::write_sweep(&curve, std::fs::File::create(&path)?)?,
                None => output::write_sweep(&curve, std::io::stdout().lock())?,
            }
        }
        Cmd::Detect {
            pattern,
            no_correction,
            out,
        } => {
            let names: Vec<String> = if pattern.is_empty() {
                presets::PATTERNS.iter().map(|p| p.0.to_string()).collect()
            } else {
                pattern
            };
            let refs = presets::references(!no_correction);
            let cfg = DetectorConfig::default();
            let mut rows = Vec::new();
            println!(
                "{:<20} {:>9} {:>9} {:>9}  psc",
                "pattern", "PSI", "dV_arr", "dV_mod"
            );
            for n in &names {
                let p = presets::pattern(n)?;
                let a = assess(&presets::array(&p)?, &refs, &cfg)?;
                let c = a.criteria;
                println!(
                    "{:<20} {:>9.5} {:>9.4} {:>9.4}  {}",
                    n,
                    c.psi,
                    c.dv_arr,
                    c.dv_mod,
                    if a.psc { "yes" } else { "no" }
                );
                rows.push(serde_json::json!({
                    "pattern": n, "notation": p.notation(),
                    "psi_per_v": c.psi, "dv_arr": c.dv_arr, "dv_mod": c.dv_mod,
                    "fired": c.fired(&cfg), "psc": a.psc,
                }));
            }
            if let Some(path) = out {
                output::emit_json(&rows, &path)?;
            }
        }
        Cmd::Corpus {
            seed,
            count,
            ramp_rate,
            controller,
            out,
        } => {
            let cfg = corpus::CorpusConfig {
                seed,
                scenarios: count,
                controller: controller.into(),
                ramp_rate,
                ..Default::default()
            };
            let results = corpus::run(&corpus::generate(&cfg));
            for (k, r) in results.iter().enumerate() {
                if let Err(e) = r {
                    eprintln!("scenario {k}: {e}");
                }
            }
            let sum = corpus::summarize(&results);
            println!(
                "{} scenarios, {} events, {} within 1% ({:.1}%), prune checks {} ({} unsafe), max scan {:.1} ms",
                sum.scenarios,
                sum.events,
                sum.within_1pct,
                100.0 * sum.fraction_within,
                sum.prune_checks,
                sum.prune_violations,
                sum.max_scan_duration_s * 1e3
            );
            if let Some(path) = out {
                output::emit_json(&sum, &path)?;
            }
            if sum.failed_runs > 0 {
                bail!("{} scenario runs failed", sum.failed_runs);
            }
        }
    }
    Ok(())
}
