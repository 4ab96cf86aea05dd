fn main() {
    std::process::exit(gera_cli::run_cli(std::env::args_os()));
}
