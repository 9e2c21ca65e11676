fn main() {
    std::process::exit(sepscore::cli::run(std::env::args_os()));
}
