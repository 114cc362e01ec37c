use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noether_cli::{load, parse_model, run, Command, Options};

#[derive(Parser)]
#[command(name = "noether", version, about = "Noether symmetries and first integrals of reparametrization-invariant mechanics")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Model file, or `case:A` .. `case:D`, `case:A-fixed-lapse` for the bundled ones.
    model: String,
    /// Truncation order in epsilon.
    #[arg(long)]
    order: Option<usize>,
    /// Freeze the lapse to this constant.
    #[arg(long)]
    fixed_lapse: Option<String>,
    /// Seed for the randomized zero test.
    #[arg(long, default_value_t = noether_core::ProbeConfig::DEFAULT_SEED)]
    seed: u64,
    /// Directory for the text and JSON reports.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write the JSON report here instead of `<out>/<model>.<command>.json`.
    #[arg(long)]
    machine_report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Print the determining system of each order.
    Derive(Common),
    /// Check each candidate against the determining system.
    Verify(Common),
    /// Construct first integrals and their weak certificates.
    Integral(Common),
    /// Integrate the equations of motion and monitor the integrals.
    Simulate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Derive(c) => (Command::Derive, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Integral(c) => (Command::Integral, c),
        Sub::Simulate(c) => (Command::Simulate, c),
    };
    match execute(command, &common) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command, c: &Common) -> Result<u8, String> {
    let (text, stem) = load(&c.model).map_err(|e| format!("{}: {e}", c.model))?;
    let doc = parse_model(&text).map_err(|d| format!("{}: {d}", c.model))?;
    let opts = Options {
        order: c.order,
        fixed_lapse: c.fixed_lapse.clone(),
        seed: c.seed,
        trajectory_file: format!("{stem}.trajectory.csv"),
    };
    let outcome = run(command, &stem, &doc, &opts).map_err(|e| e.to_string())?;
    let text = outcome.report.to_text();
    print!("{text}");

    std::fs::create_dir_all(&c.out).map_err(|e| format!("{}: {e}", c.out.display()))?;
    let base = c.out.join(format!("{stem}.{}", command.name()));
    let write = |path: PathBuf, bytes: &[u8]| std::fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()));
    write(base.with_extension(format!("{}.txt", command.name())), text.as_bytes())?;
    let json_path = c.machine_report.clone().unwrap_or_else(|| base.with_extension(format!("{}.json", command.name())));
    write(json_path, outcome.report.to_json().as_bytes())?;
    if let Some(csv) = &outcome.csv {
        write(c.out.join(&opts.trajectory_file), csv)?;
    }
    Ok(outcome.exit_code() as u8)
}
