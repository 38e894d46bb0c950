use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tubemass_cli::{config, plot, report, runner, verify, RunError};

#[derive(Parser)]
#[command(name = "tubemass", version, about = "Mass of currents near tubes: scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario file and write CSV/JSON artifacts.
    Run {
        /// Scenario JSON path.
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also render SVG figures.
        #[arg(long)]
        plot: bool,
    },
    /// Run the bundled verification suite.
    Verify {
        /// Keep only criteria whose tag contains this substring.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Print an annotated scenario skeleton for every task kind.
    Schema,
}

fn cmd_run(path: &PathBuf, out_dir: &PathBuf, with_plots: bool) -> Result<(), RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Invalid(format!("{}: {e}", path.display())))?;
    let scenario = config::parse_scenario(&text)?;
    let outcome = runner::execute(&scenario)?;
    let rendered: Vec<(String, String)> = if with_plots {
        runner::figures(&scenario, &outcome)
            .iter()
            .map(|(name, spec)| (name.clone(), plot::render_svg(spec)))
            .collect()
    } else {
        Vec::new()
    };
    let written = report::write_outputs(
        &scenario.name,
        scenario.task.tag(),
        &text,
        &outcome,
        &rendered,
        out_dir,
    )
    .map_err(|e| RunError::Numerical(format!("writing artifacts: {e}")))?;
    println!("{} [{}]: {}", scenario.name, scenario.task.tag(), outcome.verdict());
    for check in &outcome.checks {
        println!(
            "  {} {} ({})",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    for note in &outcome.notes {
        println!("  note: {note}");
    }
    for p in written
        .csv_paths
        .iter()
        .chain(written.figure_paths.iter())
        .chain(std::iter::once(&written.report_path))
    {
        println!("  wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("TUBEMASS_THREADS") {
        if let Ok(k) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global();
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out, plot } => cmd_run(config, out, *plot),
        Command::Verify { filter } => verify::run_suite(filter.as_deref(), &mut std::io::stdout())
            .map(|_| ()),
        Command::Schema => {
            print!("{}", config::schema_text());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(RunError::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
