fn main() {
    std::process::exit(xltag::cli::run(std::env::args_os()));
}
