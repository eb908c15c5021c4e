fn main() {
    std::process::exit(zits::cli::run(std::env::args_os()));
}
