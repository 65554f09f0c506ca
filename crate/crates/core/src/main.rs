fn main() {
    std::process::exit(ctp::cli::run(std::env::args_os()));
}
