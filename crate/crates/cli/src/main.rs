fn main() {
    std::process::exit(flowgnn_cli::run(std::env::args_os()));
}
