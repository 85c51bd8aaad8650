use clap::Parser;

use narx_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for path in outcome.written {
                println!("{}", path.display());
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            std::process::exit(1);
        }
    }
}
