fn main() {
    std::process::exit(riskplan::io::cli_main(std::env::args_os()));
}
