fn main() {
    std::process::exit(weaklimit::cli::run(std::env::args_os()));
}
