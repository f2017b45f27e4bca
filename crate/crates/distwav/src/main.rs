fn main() {
    std::process::exit(distwav::cli::run_main());
}
