fn main() {
    std::process::exit(anderson1d::cli::run(std::env::args_os()));
}
