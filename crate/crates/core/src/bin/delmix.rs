fn main() {
    std::process::exit(delmix::cli::run(std::env::args_os()));
}
