fn main() {
    std::process::exit(tscan::cli::run(std::env::args_os()));
}
