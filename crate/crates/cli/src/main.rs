fn main() {
    std::process::exit(dsna_cli::main_with_args(std::env::args_os()));
}
