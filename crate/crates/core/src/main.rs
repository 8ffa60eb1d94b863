fn main() {
    std::process::exit(convtopic::cli::run(std::env::args_os()));
}
