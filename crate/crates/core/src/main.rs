fn main() {
    std::process::exit(hybridscope::cli::run(std::env::args_os()));
}
