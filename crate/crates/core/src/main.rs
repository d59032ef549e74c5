fn main() {
    std::process::exit(hkiclock::cli::dispatch(std::env::args_os()));
}
