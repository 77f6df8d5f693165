fn main() {
    blepi::cli::init_threads();
    std::process::exit(blepi::cli::main_with_args(std::env::args_os()));
}
