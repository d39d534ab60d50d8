fn main() {
    std::process::exit(fnnstat::cli::run(std::env::args_os()));
}
