fn main() {
    std::process::exit(graphmgs::cli::run(std::env::args_os().collect()));
}
