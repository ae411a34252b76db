fn main() {
    std::process::exit(edwards::cli::run(std::env::args_os()));
}
