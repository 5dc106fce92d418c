fn main() {
    std::process::exit(debtsim_cli::main_with_args(std::env::args_os()));
}
