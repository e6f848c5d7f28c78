use clap::Parser;
use qot_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QOT_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qot: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
