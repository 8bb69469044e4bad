fn main() {
    std::process::exit(spacetime_fvm::cli::run(std::env::args_os()));
}
