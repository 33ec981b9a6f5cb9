fn main() {
    std::process::exit(hyperstab_cli::run_cli(std::env::args_os()));
}
