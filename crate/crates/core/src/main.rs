fn main() {
    std::process::exit(transcend::cli::main_with_args(std::env::args_os()));
}
