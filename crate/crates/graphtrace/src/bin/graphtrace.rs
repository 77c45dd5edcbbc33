fn main() {
    std::process::exit(graphtrace::harness::cli(std::env::args()));
}
