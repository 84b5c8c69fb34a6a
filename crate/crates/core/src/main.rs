fn main() {
    std::process::exit(drocal::cli::main_with_args(std::env::args_os()));
}
