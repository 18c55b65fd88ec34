fn main() {
    std::process::exit(hybridsense::cli::run(std::env::args_os()));
}
