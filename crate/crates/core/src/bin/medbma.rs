fn main() {
    std::process::exit(medbma::cli::run(std::env::args_os()));
}
