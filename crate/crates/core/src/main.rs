fn main() {
    std::process::exit(exposure_engine::cli::main_with_args(std::env::args_os()));
}
