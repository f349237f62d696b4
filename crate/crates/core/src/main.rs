fn main() {
    std::process::exit(nce_lab::cli::run(std::env::args_os()));
}
