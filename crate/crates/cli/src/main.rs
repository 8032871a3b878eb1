fn main() {
    std::process::exit(uailab_cli::dispatch(std::env::args_os()));
}
