fn main() {
    std::process::exit(confsplat::cli::run(std::env::args_os()));
}
