fn main() {
    std::process::exit(hypercd::cli::main_with_args(std::env::args_os()));
}
