fn main() {
    std::process::exit(sessrank::cli::main_with_args(std::env::args_os()));
}
