fn main() {
    std::process::exit(kahlerlab::cli::main_with_args(std::env::args_os()));
}
