fn main() {
    std::process::exit(qkr_core::cli::run(std::env::args_os()));
}
