fn main() {
    std::process::exit(steinpp::harness::run_cli(std::env::args_os()));
}
