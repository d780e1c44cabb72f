fn main() {
    std::process::exit(lpp_cli::run_command(std::env::args_os()));
}
