fn main() {
    std::process::exit(sgm_cli::run_cli(std::env::args_os()));
}
