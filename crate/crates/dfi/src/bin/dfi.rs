fn main() {
    std::process::exit(dfi::cli::run(std::env::args_os()));
}
