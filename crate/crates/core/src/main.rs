fn main() {
    std::process::exit(curvlab::cli::run(std::env::args_os()));
}
