fn main() {
    std::process::exit(riccati_kit_cli::run(std::env::args_os()));
}
