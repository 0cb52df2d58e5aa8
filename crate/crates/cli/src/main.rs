use clap::Parser;
use nvdnp_cli::args::Cli;
use nvdnp_cli::{run, EXIT_OK};

fn main() {
    let cli = Cli::parse();
    let code = match cli.command.resolve().and_then(|(kind, cfg)| run(kind, cfg)) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
