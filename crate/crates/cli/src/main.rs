fn main() {
    std::process::exit(anncur_cli::run(std::env::args_os().collect()));
}
