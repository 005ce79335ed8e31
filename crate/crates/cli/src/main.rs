use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lqsolve::{config::Grid, run, Command, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "lqsolve",
    version,
    about = "Stationary waiting time of W' = max(0, B - A + Y W)"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// `<max>:<step>`, exact decimals or fractions
    #[arg(long, value_parser = Grid::parse)]
    grid: Option<Grid>,
    /// Print the report as JSON instead of text
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let ov = Overrides {
        out: args.out,
        seed: args.seed,
        samples: args.samples,
        grid: args.grid,
    };
    let spec = match lqsolve::load_spec(args.command, &args.config, &ov) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let (report, artifacts) = lqsolve::execute(&spec);
    if args.json {
        print!("{}", lqsolve::report_json(&report));
    } else {
        print!("{}", run::human(&report));
    }
    if let Err(e) = lqsolve::write_outputs(&spec, &report, &artifacts) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    ExitCode::from(report.exit_code as u8)
}
