fn main() {
    std::process::exit(ddlearn::cli::run(std::env::args()));
}
