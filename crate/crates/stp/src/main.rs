fn main() {
    std::process::exit(stp::cli::main_with_args(std::env::args_os()));
}
