fn main() {
    std::process::exit(morphprobe_cli::dispatch(std::env::args_os()));
}
