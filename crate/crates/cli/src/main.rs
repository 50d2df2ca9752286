fn main() {
    std::process::exit(ftm_cli::run_command(std::env::args_os()));
}
