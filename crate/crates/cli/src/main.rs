fn main() {
    std::process::exit(ranksel_cli::run(std::env::args_os()));
}
