fn main() {
    std::process::exit(sqisw_cli::run(std::env::args_os()));
}
