fn main() {
    std::process::exit(gcflow_cli::run_command(std::env::args_os()));
}
