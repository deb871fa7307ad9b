fn main() {
    std::process::exit(treaty_market::cli::cli_main(std::env::args_os()));
}
