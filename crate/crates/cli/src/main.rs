fn main() {
    std::process::exit(genexp_cli::run(std::env::args_os()));
}
