fn main() {
    std::process::exit(externa_cli::run(std::env::args_os()));
}
