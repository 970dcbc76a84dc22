use clap::Parser;
use gprd_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version also arrive here
            let code = if e.use_stderr() { gprd_cli::error::EXIT_USAGE } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(&cli) {
        let report = e.report();
        eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
        std::process::exit(e.exit_code());
    }
}
