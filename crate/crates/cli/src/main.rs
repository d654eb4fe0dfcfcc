fn main() {
    std::process::exit(iqlearn_cli::run(std::env::args_os()));
}
