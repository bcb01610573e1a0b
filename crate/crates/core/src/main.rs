fn main() {
    std::process::exit(pepforge::cli::run(std::env::args_os()));
}
