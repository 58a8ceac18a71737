fn main() {
    std::process::exit(mindgauge_cli::dispatch(std::env::args_os().skip(1)));
}
