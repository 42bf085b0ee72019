fn main() {
    std::process::exit(arrival_core::cli::main_with(std::env::args_os()));
}
