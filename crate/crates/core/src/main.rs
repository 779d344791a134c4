fn main() {
    std::process::exit(wittferential::cli::main_with_args(std::env::args_os()));
}
