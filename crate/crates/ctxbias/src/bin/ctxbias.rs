fn main() {
    std::process::exit(ctxbias::cli::run(std::env::args()));
}
