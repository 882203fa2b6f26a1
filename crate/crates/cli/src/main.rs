fn main() {
    std::process::exit(lgc_cli::run(std::env::args_os()));
}
