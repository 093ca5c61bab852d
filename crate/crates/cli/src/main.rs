fn main() {
    std::process::exit(lisa_cli::main_with_args(std::env::args_os()));
}
