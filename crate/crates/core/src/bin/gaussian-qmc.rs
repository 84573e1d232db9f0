fn main() {
    std::process::exit(gaussian_qmc::cli::main_from_args(std::env::args_os()));
}
