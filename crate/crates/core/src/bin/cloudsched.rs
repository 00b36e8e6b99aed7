fn main() {
    std::process::exit(cloudsched::bench::cli(std::env::args_os()));
}
