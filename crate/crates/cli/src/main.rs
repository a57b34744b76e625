fn main() {
    std::process::exit(daecbf_cli::run_command(std::env::args_os()));
}
