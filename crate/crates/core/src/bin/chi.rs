fn main() {
    std::process::exit(chi::cli::dispatch(std::env::args_os()));
}
