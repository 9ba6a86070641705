fn main() {
    std::process::exit(steerlab_cli::main_with_args(std::env::args_os()));
}
