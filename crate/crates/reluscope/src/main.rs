fn main() {
    std::process::exit(reluscope::cli::run(std::env::args_os()));
}
