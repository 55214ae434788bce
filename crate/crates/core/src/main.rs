fn main() {
    std::process::exit(ccrlab::cli::run(std::env::args_os()));
}
