use clap::Parser;

fn main() {
    let cli = ffcorr::Cli::parse();
    std::process::exit(ffcorr::execute(&cli));
}
