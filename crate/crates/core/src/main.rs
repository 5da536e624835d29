fn main() {
    std::process::exit(distmean::cli::run(std::env::args_os()));
}
