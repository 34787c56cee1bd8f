fn main() {
    std::process::exit(trendbreak::cli::run(std::env::args_os()));
}
