fn main() {
    std::process::exit(mechcat_cli::main_with_args(std::env::args_os()));
}
