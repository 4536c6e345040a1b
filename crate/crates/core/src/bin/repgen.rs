fn main() {
    std::process::exit(repgen::cli::run(std::env::args_os()));
}
