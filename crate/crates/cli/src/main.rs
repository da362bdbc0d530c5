fn main() {
    std::process::exit(forex_lite::run_cli(std::env::args_os()));
}
