fn main() {
    std::process::exit(geometre::cli::run(std::env::args_os()));
}
