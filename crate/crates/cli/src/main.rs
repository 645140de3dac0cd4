fn main() {
    std::process::exit(hoc_cli::run_args(std::env::args_os()));
}
