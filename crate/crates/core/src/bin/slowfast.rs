fn main() {
    std::process::exit(stable_averaging::cli::run(std::env::args_os()));
}
