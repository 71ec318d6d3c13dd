fn main() {
    formation_genius::cli::init_logging();
    std::process::exit(formation_genius::cli::main_with_args(std::env::args_os()));
}
