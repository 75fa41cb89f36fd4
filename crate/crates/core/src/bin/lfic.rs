fn main() {
    std::process::exit(lfic::cli::run(std::env::args_os()));
}
