fn main() {
    std::process::exit(abreu_bvp::cli::run(std::env::args_os()));
}
