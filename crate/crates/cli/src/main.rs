use clap::Parser;
use nlrd_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let (kind, args) = cli.command.parts();
    let code = match run(kind, args) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    };
    std::process::exit(code);
}
