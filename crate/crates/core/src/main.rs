fn main() {
    std::process::exit(tricentre::cli::main_with(std::env::args_os()));
}
