fn main() {
    std::process::exit(isoshell::cli_io::run_cli(std::env::args_os()));
}
