fn main() {
    std::process::exit(adapo::cli::main_with_args(std::env::args_os()));
}
