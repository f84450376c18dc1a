fn main() {
    std::process::exit(qrandml_cli::run(std::env::args_os()));
}
