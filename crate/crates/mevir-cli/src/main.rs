//! `mevir` — deterministic scenario runs, closed-form game solutions,
//! document profiling, and paired intervention comparisons.
//!
//! Exit codes: 0 success, 2 invalid configuration or arguments (the message
//! names the offending key or path), 1 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mevir_core::moral::{hamilton_cooperate, hawk_dove_ess, ContestGameParams, KinGameParams};
use mevir_core::profiler::{analyze, bundled_templates, CueRules, Lexicon};
use mevir_core::scenario::{
    bundled_scenario, load_scenario, population_accuracy, run, with_all_interventions,
    without_interventions, write_outputs, ScenarioConfig, BUNDLED_SCENARIOS,
};
use mevir_core::Error;

#[derive(Parser)]
#[command(name = "mevir", version, about = "Moral-epistemic agent simulation toolkit")]
struct Cli {
    /// Master seed override (defaults to the seed in the scenario).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Rendering for commands offering a choice (`profile`, `ab`).
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: per-step metrics CSV plus a JSON summary.
    Simulate(SimulateArgs),
    /// Closed-form solutions of the bundled cooperation games.
    Games {
        #[command(subcommand)]
        game: GamesCommand,
    },
    /// Profile documents against the bundled lexicon and tribe templates.
    Profile(ProfileArgs),
    /// Paired runs per seed: interventions stripped vs as configured.
    Ab(AbArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file path, or one of the bundled names.
    #[arg(long)]
    scenario: String,

    /// Also write every agent's final lattices and labels.
    #[arg(long)]
    dump_lattices: bool,
}

#[derive(Subcommand)]
enum GamesCommand {
    /// Kin-selection choice: cooperate when relatedness times benefit
    /// outweighs cost.
    Hamilton {
        /// Relatedness in [0, 1].
        #[arg(long)]
        r: f64,
        /// Benefit to the recipient.
        #[arg(long)]
        b: f64,
        /// Cost to the actor.
        #[arg(long)]
        c: f64,
    },
    /// Mixed contest equilibrium: the stable probability of playing hawk.
    Hawkdove {
        /// Value of the contested resource.
        #[arg(long)]
        v: f64,
        /// Cost of losing an escalated fight.
        #[arg(long)]
        c: f64,
    },
}

#[derive(Args)]
struct ProfileArgs {
    /// Document to profile (repeatable).
    #[arg(long = "doc", required = true)]
    docs: Vec<PathBuf>,
}

#[derive(Args)]
struct AbArgs {
    /// Scenario file path, or one of the bundled names.
    #[arg(long)]
    scenario: String,

    /// Number of consecutive seeds to pair.
    #[arg(long)]
    seeds: u64,

    /// Force both interventions on in the treated arm instead of taking the
    /// scenario as configured.
    #[arg(long)]
    with_interventions: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<Error>() {
                Some(e) if e.is_config() => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(cli.seed, &cli.out, args),
        Command::Games { game } => cmd_games(game),
        Command::Profile(args) => cmd_profile(&cli.out, cli.format, args),
        Command::Ab(args) => cmd_ab(cli.seed, &cli.out, cli.format, args),
    }
}

/// Treat the argument as a file when it exists, otherwise as a bundled name.
fn resolve_scenario(arg: &str) -> Result<ScenarioConfig, Error> {
    let path = Path::new(arg);
    if path.exists() {
        load_scenario(path)
    } else if BUNDLED_SCENARIOS.contains(&arg) {
        bundled_scenario(arg)
    } else {
        Err(Error::Config(format!(
            "scenario '{arg}' is neither a file nor a bundled name (bundled: {})",
            BUNDLED_SCENARIOS.join(", ")
        )))
    }
}

/// Write through a sibling temp file so a crash never leaves half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn cmd_simulate(seed: Option<u64>, out_dir: &Path, args: &SimulateArgs) -> anyhow::Result<()> {
    let config = resolve_scenario(&args.scenario)?;
    // Validation happens before anything touches the disk.
    let output = run(&config, seed)?;
    fs::create_dir_all(out_dir)?;
    let paths = write_outputs(out_dir, &output, args.dump_lattices)?;

    println!("wrote {}", paths.metrics_csv.display());
    println!("wrote {}", paths.summary_json.display());
    if let Some(lattices) = &paths.lattices_json {
        println!("wrote {}", lattices.display());
    }
    let s = &output.summary;
    println!(
        "scenario {} seed {} config {} | {} steps, {} agents, {} tribes, polarization {:.3}",
        s.scenario,
        s.seed,
        &s.config_sha256[..12],
        s.steps,
        s.agent_count,
        s.tribe_count,
        s.polarization_index
    );
    Ok(())
}

/// Whole numbers keep one decimal so a probability never prints as a count.
fn format_probability(x: f64) -> String {
    if x == x.trunc() {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

fn cmd_games(game: &GamesCommand) -> anyhow::Result<()> {
    match *game {
        GamesCommand::Hamilton { r, b, c } => {
            let cooperate = hamilton_cooperate(KinGameParams { r, b, c })?;
            println!("{}", if cooperate { "cooperate" } else { "defect" });
        }
        GamesCommand::Hawkdove { v, c } => {
            let ess = hawk_dove_ess(ContestGameParams { v, c })?;
            println!("{}", format_probability(ess));
        }
    }
    Ok(())
}

/// The bundled lexicon, unless `MEVIR_LEXICON` points somewhere else.
fn load_lexicon() -> Result<Lexicon, Error> {
    match std::env::var_os("MEVIR_LEXICON") {
        Some(raw) => {
            let path = PathBuf::from(raw);
            Lexicon::from_file(&path)
                .map_err(|e| Error::Config(format!("lexicon {}: {e}", path.display())))
        }
        None => Ok(Lexicon::bundled()),
    }
}

fn cmd_profile(out_dir: &Path, format: Format, args: &ProfileArgs) -> anyhow::Result<()> {
    let extension = match format {
        Format::Json => "profile.json",
        Format::Text => "profile.txt",
        Format::Csv => {
            return Err(Error::Config("profile supports --format json or text".into()).into())
        }
    };
    let lexicon = load_lexicon()?;
    let templates = bundled_templates();
    let rules = CueRules::default_rules();

    fs::create_dir_all(out_dir)?;
    for doc in &args.docs {
        let text = fs::read_to_string(doc)
            .map_err(|e| Error::Config(format!("document {}: {e}", doc.display())))?;
        let report = analyze(&text, &lexicon, &templates, &rules)?;
        let rendered = match format {
            Format::Json => {
                let mut json = serde_json::to_string_pretty(&report)?;
                json.push('\n');
                json
            }
            _ => report.render_text(),
        };
        let stem = doc.file_stem().and_then(|s| s.to_str()).unwrap_or("document");
        let path = out_dir.join(format!("{stem}.{extension}"));
        write_atomic(&path, rendered.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

struct AbRow {
    seed: u64,
    polarization_off: f64,
    polarization_on: f64,
    accuracy_off: f64,
    accuracy_on: f64,
}

impl AbRow {
    fn polarization_delta(&self) -> f64 {
        self.polarization_on - self.polarization_off
    }

    fn accuracy_delta(&self) -> f64 {
        self.accuracy_on - self.accuracy_off
    }

    fn sign(&self) -> char {
        let d = self.polarization_delta();
        if d < 0.0 {
            '-'
        } else if d > 0.0 {
            '+'
        } else {
            '0'
        }
    }
}

fn cmd_ab(seed: Option<u64>, out_dir: &Path, format: Format, args: &AbArgs) -> anyhow::Result<()> {
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()).into());
    }
    let config = resolve_scenario(&args.scenario)?;
    let control = without_interventions(&config);
    let treated = if args.with_interventions {
        with_all_interventions(&config)
    } else {
        config.clone()
    };
    let base_seed = seed.unwrap_or(config.seed);

    let mut rows = Vec::with_capacity(args.seeds as usize);
    for i in 0..args.seeds {
        let run_seed = base_seed.wrapping_add(i);
        let off = run(&control, Some(run_seed))?;
        let on = run(&treated, Some(run_seed))?;
        rows.push(AbRow {
            seed: run_seed,
            polarization_off: off.summary.polarization_index,
            polarization_on: on.summary.polarization_index,
            accuracy_off: population_accuracy(&off.agents, &control.world)?,
            accuracy_on: population_accuracy(&on.agents, &treated.world)?,
        });
    }

    fs::create_dir_all(out_dir)?;
    let path = match format {
        Format::Json => {
            let entries: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "seed": r.seed,
                        "polarization_off": r.polarization_off,
                        "polarization_on": r.polarization_on,
                        "polarization_delta": r.polarization_delta(),
                        "delta_sign": r.sign().to_string(),
                        "accuracy_off": r.accuracy_off,
                        "accuracy_on": r.accuracy_on,
                        "accuracy_delta": r.accuracy_delta(),
                    })
                })
                .collect();
            let mut json = serde_json::to_string_pretty(&entries)?;
            json.push('\n');
            let path = out_dir.join("ab_comparison.json");
            write_atomic(&path, json.as_bytes())?;
            path
        }
        _ => {
            let mut csv = String::from(
                "seed,polarization_off,polarization_on,polarization_delta,delta_sign,\
                 accuracy_off,accuracy_on,accuracy_delta\n",
            );
            for r in &rows {
                csv.push_str(&format!(
                    "{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6}\n",
                    r.seed,
                    r.polarization_off,
                    r.polarization_on,
                    r.polarization_delta(),
                    r.sign(),
                    r.accuracy_off,
                    r.accuracy_on,
                    r.accuracy_delta()
                ));
            }
            let path = out_dir.join("ab_comparison.csv");
            write_atomic(&path, csv.as_bytes())?;
            path
        }
    };

    let lowered = rows.iter().filter(|r| r.polarization_delta() < 0.0).count();
    let accuracy_up = rows.iter().filter(|r| r.accuracy_delta() > 0.0).count();
    println!(
        "ab {} over seeds {}..={}: polarization lower in {lowered}/{} runs, accuracy higher \
         in {accuracy_up}/{}; wrote {}",
        config.name,
        base_seed,
        base_seed.wrapping_add(args.seeds - 1),
        rows.len(),
        rows.len(),
        path.display()
    );
    Ok(())
}
