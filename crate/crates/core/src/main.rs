fn main() {
    std::process::exit(lpmrl::harness::cli_main(std::env::args_os()));
}
