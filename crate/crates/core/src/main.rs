fn main() {
    std::process::exit(gridseg::cli::run(std::env::args_os()));
}
