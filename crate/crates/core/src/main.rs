fn main() {
    std::process::exit(kcs::cli::cli_main(std::env::args()));
}
