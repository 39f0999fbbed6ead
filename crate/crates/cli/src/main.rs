fn main() {
    std::process::exit(occlink_cli::run(std::env::args_os()));
}
