fn main() {
    std::process::exit(lab_cli::run(std::env::args_os()));
}
