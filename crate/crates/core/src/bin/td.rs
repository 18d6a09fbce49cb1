fn main() {
    std::process::exit(td_core::cli::main_with_args(std::env::args_os()));
}
