fn main() {
    std::process::exit(dcgm::cli::main_with_args(std::env::args_os()));
}
