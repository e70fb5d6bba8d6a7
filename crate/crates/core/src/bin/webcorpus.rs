fn main() {
    std::process::exit(webcorpus::cli::dispatch(std::env::args_os()));
}
