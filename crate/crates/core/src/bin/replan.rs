fn main() {
    std::process::exit(replan::cli::run(std::env::args_os()));
}
