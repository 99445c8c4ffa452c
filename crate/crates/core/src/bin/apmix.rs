fn main() {
    std::process::exit(apmix::cli::run_cli(std::env::args_os()));
}
