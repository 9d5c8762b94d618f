fn main() {
    std::process::exit(dlaim::cli::run(std::env::args_os()));
}
